#include "railtrace/log_oracle.hpp"

#include <algorithm>
#include <deque>
#include <map>
#include <optional>
#include <set>
#include <sstream>

namespace railtrace {

namespace {

enum class Passage { NotReached, AtStand, Crossed };

struct TrainRoute {
  std::vector<NodeId> nodes;
  std::vector<EdgeId> edges;
  std::map<NodeId, std::size_t> index;
  std::vector<Passage> passage;
};

std::string field(const std::vector<std::pair<std::string, std::string>>& fields, const std::string& key) {
  for (const auto& [k, v] : fields)
    if (k == key) return v;
  return {};
}

}  // namespace

std::vector<std::pair<std::string, std::string>> message_fields(const std::string& text) {
  std::vector<std::pair<std::string, std::string>> out;
  std::istringstream in(text);
  std::string token;
  while (in >> token) {
    auto eq = token.find('=');
    if (eq == std::string::npos)
      out.emplace_back(token, "");
    else
      out.emplace_back(token.substr(0, eq), token.substr(eq + 1));
  }
  return out;
}

SafetyReport check_log(const Scenario& scenario, const std::vector<SimEvent>& events) {
  SafetyReport report;
  const InfrastructureGraph& g = scenario.graph;

  std::map<std::string, std::string> state;
  for (const auto& el : g.elements)
    if (el.state) state[el.id.value] = std::string(to_string(*el.state));

  std::map<std::string, TrainRoute> routes;
  for (const auto& t : scenario.trains) {
    TrainRoute r;
    r.edges = t.route;
    for (std::size_t i = 0; i < t.route.size(); ++i) {
      const Edge* e = g.find_edge(t.route[i]);
      if (!e) continue;
      if (i == 0) r.nodes.push_back(e->from);
      r.nodes.push_back(e->to);
    }
    for (std::size_t k = 0; k < r.nodes.size(); ++k) r.index[r.nodes[k]] = k;
    r.passage.assign(r.nodes.size(), Passage::NotReached);
    if (!r.passage.empty()) r.passage[0] = Passage::Crossed;
    routes[t.id.value] = std::move(r);
  }

  struct BlockInfo {
    std::string name;
    std::set<std::string> entry_mains;
    std::set<std::string> edges;
    std::set<std::string> pods;
    std::set<std::string> occupants;
  };
  std::vector<BlockInfo> blocks;
  for (const auto& st : scenario.stations)
    for (std::size_t b = 0; b < st.blocks.size(); ++b) {
      BlockInfo info;
      info.name = st.id.value + ".blocks[" + std::to_string(b) + "]";
      if (const LogicalElement* le = g.find_logical(st.blocks[b].entry_signal))
        for (const auto& m : le->members)
          if (const PhysicalElement* el = g.find_element(m); el && el->kind == ElementKind::MainSignal)
            info.entry_mains.insert(m.value);
      for (const auto& e : st.blocks[b].edges) info.edges.insert(e.value);
      for (const auto& d : st.blocks[b].danger_points) info.pods.insert(d.value);
      blocks.push_back(std::move(info));
    }

  // (train, block) -> danger points still to be cleared before the train leaves
  std::map<std::pair<std::string, std::size_t>, std::set<std::string>> pending_exit;
  std::map<std::string, std::vector<std::string>> pod_queue;  // trains past a danger point, not yet cleared
  std::multiset<std::pair<std::string, std::string>> orders;  // (train, signal)

  auto add = [&](std::string kind, std::string subject, std::size_t i, std::string detail) {
    report.findings.push_back({std::move(kind), std::move(subject), i, events[i].time, std::move(detail)});
  };

  auto leave = [&](const std::string& train, std::size_t b) {
    blocks[b].occupants.erase(train);
    pending_exit.erase({train, b});
  };

  auto exits_of = [&](const std::string& train, std::size_t b, std::size_t from_node) {
    const TrainRoute& r = routes[train];
    std::set<std::string> exits;
    for (const auto& pod : blocks[b].pods) {
      const PhysicalElement* el = g.find_element(ElementId(pod));
      if (!el) continue;
      for (std::size_t k = std::max<std::size_t>(from_node, 1); k < r.nodes.size(); ++k)
        if (r.nodes[k] == el->node && r.edges[k - 1] == el->facing) exits.insert(pod);
    }
    return exits;
  };

  auto enter = [&](const std::string& train, std::size_t b, std::size_t from_node, std::size_t i) {
    auto& block = blocks[b];
    for (const auto& other : block.occupants)
      if (other != train) add("block-co-occupancy", block.name, i, train + " entered while occupied by " + other);
    block.occupants.insert(train);
    pending_exit[{train, b}] = exits_of(train, b, from_node);
  };

  for (const auto& t : scenario.trains) {
    if (t.route.empty()) continue;
    for (std::size_t b = 0; b < blocks.size(); ++b)
      if (blocks[b].edges.count(t.route.front().value)) {
        blocks[b].occupants.insert(t.id.value);
        pending_exit[{t.id.value, b}] = exits_of(t.id.value, b, 1);
      }
  }
  for (const auto& block : blocks)
    if (block.occupants.size() > 1)
      report.findings.push_back({"block-co-occupancy", block.name, 0, Rational(0), "several trains start inside the block"});

  auto crossing = [&](const std::string& train, std::size_t k, std::size_t i) {
    TrainRoute& r = routes[train];
    r.passage[k] = Passage::Crossed;
    for (const auto* el : g.elements_at(r.nodes[k])) {
      if (el->facing != r.edges[k - 1]) continue;
      if (el->kind == ElementKind::MainSignal) {
        ++report.crossings;
        const std::string& s = state[el->id.value];
        auto order = orders.find({train, el->id.value});
        if (order != orders.end())
          orders.erase(order);
        else if (s != "GO" && s != "SLOW")
          add("spad", train, i, "passed " + el->id.value + " showing " + (s.empty() ? "no aspect" : s));
        for (std::size_t b = 0; b < blocks.size(); ++b)
          if (blocks[b].entry_mains.count(el->id.value)) enter(train, b, k, i);
      }
      if (el->kind == ElementKind::PointOfDanger) pod_queue[el->id.value].push_back(train);
    }
  };

  for (std::size_t i = 0; i < events.size(); ++i) {
    const SimEvent& ev = events[i];
    if (i > 0 && ev.time < events[i - 1].time)
      add("clock", ev.subject, i, "timestamp " + ev.time.to_string() + " before " + events[i - 1].time.to_string());

    if (const auto* ch = std::get_if<StateChange>(&ev.payload)) {
      state[ev.subject] = ch->state;
      if (ch->state == "FREE") {
        auto queue = std::move(pod_queue[ev.subject]);
        pod_queue.erase(ev.subject);
        for (const auto& train : queue)
          for (std::size_t b = 0; b < blocks.size(); ++b) {
            auto it = pending_exit.find({train, b});
            if (it == pending_exit.end()) continue;
            if (it->second.erase(ev.subject) && it->second.empty()) leave(train, b);
          }
      }
    } else if (const auto* mv = std::get_if<Movement>(&ev.payload)) {
      auto r = routes.find(ev.subject);
      if (r == routes.end()) {
        add("unknown-subject", ev.subject, i, "movement of an undeclared train");
        continue;
      }
      auto k = r->second.index.find(NodeId(mv->node));
      if (k == r->second.index.end()) {
        add("unknown-subject", ev.subject, i, "movement at node " + mv->node + " off the route");
        continue;
      }
      Passage& p = r->second.passage[k->second];
      if (p == Passage::NotReached)
        p = mv->velocity_mm_s > 0 ? Passage::Crossed : Passage::AtStand;
      else if (p == Passage::AtStand)
        p = Passage::Crossed;
      else
        continue;
      if (p == Passage::Crossed) crossing(ev.subject, k->second, i);
    } else if (const auto* msg = std::get_if<Message>(&ev.payload)) {
      auto fields = message_fields(msg->text);
      if (fields.empty()) continue;
      const std::string& head = fields.front().first;
      if (head == "violation") ++report.violation_messages;
      if (head == "order" && fields.size() > 1 && fields[1].first == "depart-past-halt")
        orders.insert({field(fields, "train"), field(fields, "signal")});
      if (head == "arrive") {
        std::string train = field(fields, "train");
        for (std::size_t b = 0; b < blocks.size(); ++b)
          if (blocks[b].occupants.count(train)) leave(train, b);
        for (auto& [pod, queue] : pod_queue) queue.erase(std::remove(queue.begin(), queue.end(), train), queue.end());
      }
    }
  }
  return report;
}

nlohmann::json SafetyReport::to_json() const {
  nlohmann::json j;
  j["ok"] = ok();
  j["crossings"] = crossings;
  j["violation_messages"] = violation_messages;
  j["findings"] = nlohmann::json::array();
  for (const auto& f : findings)
    j["findings"].push_back({{"kind", f.kind},
                             {"subject", f.subject},
                             {"event_index", f.event_index},
                             {"time", f.time.to_string()},
                             {"detail", f.detail}});
  return j;
}

std::string SafetyReport::to_text() const {
  std::ostringstream out;
  out << "safety: " << (ok() ? "ok" : "VIOLATED") << " (" << crossings << " main signal crossings, "
      << violation_messages << " violation messages)\n";
  for (const auto& f : findings)
    out << "  " << f.kind << " " << f.subject << " at " << f.time.to_string() << " (event " << f.event_index
        << "): " << f.detail << "\n";
  return out.str();
}

}  // namespace railtrace
