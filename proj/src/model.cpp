#include "railtrace/model.hpp"

#include <array>
#include <deque>
#include <set>
#include <sstream>

namespace railtrace {

namespace {

constexpr std::array<std::pair<SignalState, std::string_view>, 4> kStateNames{{
    {SignalState::Go, "GO"},
    {SignalState::Halt, "HALT"},
    {SignalState::Slow, "SLOW"},
    {SignalState::Invalid, "INVALID"},
}};

constexpr std::array<std::pair<ElementKind, std::string_view>, 9> kKindNames{{
    {ElementKind::MainSignal, "MainSignal"},
    {ElementKind::PreSignal, "PreSignal"},
    {ElementKind::PointOfVisibility, "PointOfVisibility"},
    {ElementKind::Balise, "Balise"},
    {ElementKind::Magnet, "Magnet"},
    {ElementKind::Zs10, "Zs10"},
    {ElementKind::PointOfDanger, "PointOfDanger"},
    {ElementKind::BufferStop, "BufferStop"},
    {ElementKind::TunnelPortal, "TunnelPortal"},
}};

template <typename T>
const T* find_by_id(const std::vector<T>& items, const auto& id) {
  for (const auto& item : items)
    if (item.id == id) return &item;
  return nullptr;
}

}  // namespace

std::string_view to_string(SignalState state) {
  for (const auto& [s, name] : kStateNames)
    if (s == state) return name;
  return "?";
}

std::optional<SignalState> parse_signal_state(std::string_view text) {
  for (const auto& [s, name] : kStateNames)
    if (name == text) return s;
  return std::nullopt;
}

std::string_view to_string(ElementKind kind) {
  for (const auto& [k, name] : kKindNames)
    if (k == kind) return name;
  return "?";
}

std::optional<ElementKind> parse_element_kind(std::string_view text) {
  for (const auto& [k, name] : kKindNames)
    if (name == text) return k;
  return std::nullopt;
}

const Node* InfrastructureGraph::find_node(const NodeId& id) const { return find_by_id(nodes, id); }
const Edge* InfrastructureGraph::find_edge(const EdgeId& id) const { return find_by_id(edges, id); }
const PhysicalElement* InfrastructureGraph::find_element(const ElementId& id) const {
  return find_by_id(elements, id);
}
PhysicalElement* InfrastructureGraph::find_element(const ElementId& id) {
  for (auto& e : elements)
    if (e.id == id) return &e;
  return nullptr;
}
const LogicalElement* InfrastructureGraph::find_logical(const ElementId& id) const {
  return find_by_id(logical, id);
}

std::vector<const PhysicalElement*> InfrastructureGraph::elements_at(const NodeId& node) const {
  std::vector<const PhysicalElement*> out;
  for (const auto& e : elements)
    if (e.node == node) out.push_back(&e);
  return out;
}

std::vector<const LogicalElement*> InfrastructureGraph::logical_of(const ElementId& element) const {
  std::vector<const LogicalElement*> out;
  for (const auto& le : logical)
    for (const auto& m : le.members)
      if (m == element) {
        out.push_back(&le);
        break;
      }
  return out;
}

std::string describe(const Information& info) {
  return std::visit(
      [](const auto& i) -> std::string {
        using T = std::decay_t<decltype(i)>;
        if constexpr (std::is_same_v<T, NoInfo>) {
          return "NoInfo";
        } else if constexpr (std::is_same_v<T, AreaEnd>) {
          return "AreaEnd(" + std::to_string(i.limit) + "," + (i.flag ? "true" : "false") + "," +
                 (i.ref ? i.ref->value : "none") + ")";
        } else if constexpr (std::is_same_v<T, ExpectState>) {
          return "ExpectState(" + std::string(to_string(i.state)) + ")";
        } else if constexpr (std::is_same_v<T, OrderedState>) {
          return "OrderedState(" + std::string(to_string(i.state)) + ")";
        } else {
          std::ostringstream os;
          os << "ObstacleReport(" << i.distance << ")";
          return os.str();
        }
      },
      info);
}

std::vector<Violation> validate_graph(const InfrastructureGraph& graph) {
  std::vector<Violation> report;
  auto add = [&](std::string code, std::string subject, std::string message) {
    report.push_back({std::move(code), std::move(subject), std::move(message)});
  };

  std::set<std::string> seen;
  for (const auto& n : graph.nodes)
    if (!seen.insert("node/" + n.id.value).second) add("id.duplicate", n.id.value, "duplicate node id");
  for (const auto& e : graph.edges)
    if (!seen.insert("edge/" + e.id.value).second) add("id.duplicate", e.id.value, "duplicate edge id");
  for (const auto& e : graph.elements)
    if (!seen.insert("element/" + e.id.value).second)
      add("id.duplicate", e.id.value, "duplicate element id");
  for (const auto& l : graph.logical)
    if (!seen.insert("element/" + l.id.value).second)
      add("id.duplicate", l.id.value, "duplicate element id");

  for (const auto& e : graph.edges) {
    if (!(e.length > 0.0)) add("edge.length", e.id.value, "edge length must be positive");
    if (e.from == e.to) add("edge.self-loop", e.id.value, "edge endpoints must differ");
    if (!graph.find_node(e.from)) add("edge.unknown-node", e.id.value, "unknown node " + e.from.value);
    if (!graph.find_node(e.to)) add("edge.unknown-node", e.id.value, "unknown node " + e.to.value);
  }

  for (const auto& el : graph.elements) {
    if (!graph.find_node(el.node)) {
      add("element.unknown-node", el.id.value, "unknown node " + el.node.value);
    }
    const Edge* facing = graph.find_edge(el.facing);
    if (!facing) {
      add("element.facing", el.id.value, "unknown facing edge " + el.facing.value);
    } else if (facing->from != el.node && facing->to != el.node) {
      add("element.facing", el.id.value, "facing edge " + el.facing.value + " is not incident to " + el.node.value);
    }
    if (has_signal_state(el.kind) != el.state.has_value()) {
      add("element.state", el.id.value,
          has_signal_state(el.kind) ? "signal without state" : "state on an element without signal state");
    }
  }

  for (const auto& le : graph.logical) {
    if (le.members.empty()) add("logical.empty", le.id.value, "logical element without members");
    for (const auto& m : le.members)
      if (!graph.find_element(m)) add("logical.dangling-member", le.id.value, "member " + m.value + " does not exist");
  }

  // A presignal paired with a main signal needs a point of visibility upstream.
  for (const auto& le : graph.logical) {
    bool has_main = false;
    std::vector<const PhysicalElement*> presignals;
    std::set<NodeId> visibility_nodes;
    for (const auto& m : le.members) {
      const PhysicalElement* el = graph.find_element(m);
      if (!el) continue;
      if (el->kind == ElementKind::MainSignal) has_main = true;
      if (el->kind == ElementKind::PreSignal) presignals.push_back(el);
      if (el->kind == ElementKind::PointOfVisibility) visibility_nodes.insert(el->node);
    }
    if (!has_main) continue;
    for (const auto* pre : presignals) {
      std::set<NodeId> visited;
      std::deque<NodeId> queue;
      bool found = false;
      if (const Edge* f = graph.find_edge(pre->facing); f && f->to == pre->node) queue.push_back(f->from);
      while (!queue.empty() && !found) {
        NodeId cur = queue.front();
        queue.pop_front();
        if (!visited.insert(cur).second) continue;
        if (visibility_nodes.count(cur)) found = true;
        for (const auto& e : graph.edges)
          if (e.to == cur) queue.push_back(e.from);
      }
      if (!found)
        add("signal.missing-visibility-point", pre->id.value,
            "no point of visibility upstream of presignal in " + le.id.value);
    }
  }
  return report;
}

std::vector<Transmission> trigger_front(const InfrastructureGraph& graph, const PhysicalElement& element,
                                        const EdgeId& approach) {
  if (approach != element.facing) return {Transmission{NoInfo{}}};

  switch (element.kind) {
    case ElementKind::Zs10:
      return {Transmission{AreaEnd{-1, false, std::nullopt}}};
    case ElementKind::MainSignal:
      return {Transmission{ExpectState{element.state.value_or(SignalState::Invalid), element.id}}};
    case ElementKind::PreSignal:
    case ElementKind::PointOfVisibility: {
      // Both report the presignal aspect of the logical signal they belong to.
      for (const auto* le : graph.logical_of(element.id)) {
        const PhysicalElement* main = nullptr;
        const PhysicalElement* pre = element.kind == ElementKind::PreSignal ? &element : nullptr;
        for (const auto& m : le->members) {
          const PhysicalElement* el = graph.find_element(m);
          if (!el) continue;
          if (el->kind == ElementKind::MainSignal && !main) main = el;
          if (el->kind == ElementKind::PreSignal && !pre) pre = el;
        }
        if (!main) continue;
        SignalState aspect = pre && pre->state ? *pre->state
                                               : presignal_aspect(main->state.value_or(SignalState::Invalid));
        if (aspect == SignalState::Invalid) aspect = SignalState::Halt;
        return {Transmission{ExpectState{aspect, main->id}}};
      }
      if (element.kind == ElementKind::PreSignal && element.state)
        return {Transmission{ExpectState{*element.state, std::nullopt}}};
      return {Transmission{NoInfo{}}};
    }
    default:
      return {Transmission{NoInfo{}}};
  }
}

}  // namespace railtrace
