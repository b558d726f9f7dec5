#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "railtrace/ids.hpp"

namespace railtrace {

enum class SignalState { Go, Halt, Slow, Invalid };

std::string_view to_string(SignalState state);
/// Accepts `GO`, `HALT`, `SLOW`, `INVALID`.
std::optional<SignalState> parse_signal_state(std::string_view text);

enum class ElementKind {
  MainSignal,
  PreSignal,
  PointOfVisibility,
  Balise,
  Magnet,
  Zs10,
  PointOfDanger,
  BufferStop,
  TunnelPortal,
};

std::string_view to_string(ElementKind kind);
std::optional<ElementKind> parse_element_kind(std::string_view text);

inline bool has_signal_state(ElementKind kind) {
  return kind == ElementKind::MainSignal || kind == ElementKind::PreSignal;
}

// Layer 1: topology.
struct Node {
  NodeId id;
  double x = 0.0;  // visualization only
  double y = 0.0;
};

struct Edge {
  EdgeId id;
  NodeId from;
  NodeId to;
  double length = 0.0;  // meters
  bool sight_restricted = false;
};

// Layer 2: physical elements (PIFs) attached to nodes.
struct PhysicalElement {
  ElementId id;
  ElementKind kind = ElementKind::MainSignal;
  NodeId node;
  EdgeId facing;  // approach edge from which the element is observed
  std::optional<SignalState> state;
  std::string name;
};

// Layer 3: logical elements grouping physical elements that share state.
struct LogicalElement {
  ElementId id;
  std::vector<ElementId> members;
  StationId station;
};

struct InfrastructureGraph {
  std::vector<Node> nodes;
  std::vector<Edge> edges;
  std::vector<PhysicalElement> elements;
  std::vector<LogicalElement> logical;

  const Node* find_node(const NodeId& id) const;
  const Edge* find_edge(const EdgeId& id) const;
  const PhysicalElement* find_element(const ElementId& id) const;
  PhysicalElement* find_element(const ElementId& id);
  const LogicalElement* find_logical(const ElementId& id) const;

  /// Physical elements at a node, in declaration order.
  std::vector<const PhysicalElement*> elements_at(const NodeId& node) const;
  /// Logical elements that list `element` as a member, in declaration order.
  std::vector<const LogicalElement*> logical_of(const ElementId& element) const;
};

// Transmissions from PIFs to trains.
struct NoInfo {
  friend bool operator==(const NoInfo&, const NoInfo&) = default;
};
struct AreaEnd {
  int limit = -1;
  bool flag = false;
  std::optional<ElementId> ref;
  friend bool operator==(const AreaEnd&, const AreaEnd&) = default;
};
/// Aspect the train must expect at the referenced main signal.
struct ExpectState {
  SignalState state = SignalState::Halt;
  std::optional<ElementId> signal;
  friend bool operator==(const ExpectState&, const ExpectState&) = default;
};
struct OrderedState {
  SignalState state = SignalState::Go;
  friend bool operator==(const OrderedState&, const OrderedState&) = default;
};
struct ObstacleReport {
  double distance = 0.0;
  friend bool operator==(const ObstacleReport&, const ObstacleReport&) = default;
};

using Information = std::variant<NoInfo, AreaEnd, ExpectState, OrderedState, ObstacleReport>;

struct Transmission {  // Pass(info)
  Information info;
  friend bool operator==(const Transmission&, const Transmission&) = default;
};

std::string describe(const Information& info);

struct Violation {
  std::string code;
  std::string subject;
  std::string message;
};

/// Structural checks over all layers. An empty result means the graph can be
/// instantiated.
std::vector<Violation> validate_graph(const InfrastructureGraph& graph);

/// What `element` emits toward a train whose front reaches the element's node
/// via `approach`. Pure.
std::vector<Transmission> trigger_front(const InfrastructureGraph& graph,
                                        const PhysicalElement& element, const EdgeId& approach);

/// Aspect a presignal shows for a main signal in `main_state`.
inline SignalState presignal_aspect(SignalState main_state) {
  switch (main_state) {
    case SignalState::Go:
      return SignalState::Go;
    case SignalState::Slow:
      return SignalState::Slow;
    default:
      return SignalState::Halt;
  }
}

}  // namespace railtrace
