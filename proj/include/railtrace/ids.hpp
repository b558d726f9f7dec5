#pragma once

#include <compare>
#include <functional>
#include <ostream>
#include <string>
#include <utility>

namespace railtrace {

template <typename Tag>
struct StrongId {
  std::string value;

  StrongId() = default;
  explicit StrongId(std::string v) : value(std::move(v)) {}

  bool empty() const { return value.empty(); }
  const std::string& str() const { return value; }

  friend auto operator<=>(const StrongId&, const StrongId&) = default;
  friend bool operator==(const StrongId&, const StrongId&) = default;
  friend std::ostream& operator<<(std::ostream& os, const StrongId& id) { return os << id.value; }
};

struct NodeTag {};
struct EdgeTag {};
struct ElementTag {};
struct RuleTag {};

using NodeId = StrongId<NodeTag>;
using EdgeId = StrongId<EdgeTag>;
/// `<TypeName>:<creation-index>`; used for physical and logical elements,
/// trains and stations.
using ElementId = StrongId<ElementTag>;
using TrainId = ElementId;
using StationId = ElementId;
using RuleId = StrongId<RuleTag>;

inline ElementId make_element_id(const std::string& type_name, long index) {
  return ElementId(type_name + ":" + std::to_string(index));
}

/// Type part of an element id (`MainSignal` for `MainSignal:3`).
inline std::string id_type_name(const ElementId& id) {
  auto pos = id.value.find(':');
  return pos == std::string::npos ? id.value : id.value.substr(0, pos);
}

}  // namespace railtrace

template <typename Tag>
struct std::hash<railtrace::StrongId<Tag>> {
  std::size_t operator()(const railtrace::StrongId<Tag>& id) const noexcept {
    return std::hash<std::string>{}(id.value);
  }
};
