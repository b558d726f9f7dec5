#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "railtrace/kinematics.hpp"
#include "railtrace/model.hpp"
#include "railtrace/rational.hpp"
#include "railtrace/trace.hpp"

namespace railtrace {

inline constexpr int kScenarioFormatVersion = 1;

struct SimConfig {
  double sight_speed_tunnel_kmh = 6.0;
  double sight_speed_open_kmh = 40.0;
  double dispatcher_delay_s = 180.0;
  double detection_range_m = 200.0;
  double slow_speed_kmh = 40.0;
  double obstacle_margin_m = 2.0;
  bool drive_on_sight_after_fault = false;

  /// Throws ScenarioError for unknown keys or mistyped values.
  void set(const std::string& key, const nlohmann::json& value);
  nlohmann::json to_json() const;
};

struct Block {
  ElementId entry_signal;  // logical element
  std::vector<EdgeId> edges;
  std::vector<ElementId> danger_points;
  std::optional<SignalState> proceed_aspect;
};

struct Station {
  StationId id;
  std::string name;
  std::vector<Block> blocks;
};

struct TrainSpec {
  TrainId id;
  std::string name;
  std::vector<EdgeId> route;
  double offset = 0.0;  // along the first route edge
  Rational departure;
  double v_max_kmh = 60.0;
  double accel = 0.8;
  double brake = 0.7;
  double length = 0.0;
  bool ato = false;
  ElementTags tags;

  TrainProfile profile() const { return {kmh_to_ms(v_max_kmh), accel, brake, length}; }
};

struct Scenario {
  std::string name;
  SimConfig config;
  InfrastructureGraph graph;
  std::vector<Station> stations;
  std::vector<TrainSpec> trains;
  /// Concept and document tags of physical and logical elements.
  std::map<ElementId, ElementTags> tags;
  /// Next creation index per type name.
  std::map<std::string, long> counters;

  const Station* find_station(const StationId& id) const;
  const TrainSpec* find_train(const TrainId& id) const;
  /// Every declared id: physical and logical elements, stations, trains.
  std::vector<ElementId> declared_ids() const;
};

class ScenarioError : public std::runtime_error {
 public:
  ScenarioError(std::string path, const std::string& message)
      : std::runtime_error(path.empty() ? message : path + ": " + message), path_(std::move(path)) {}
  const std::string& path() const { return path_; }

 private:
  std::string path_;
};

/// Schema check and conversion. Errors carry a JSON path such as
/// `$.edges[2].to`.
Scenario scenario_from_json(const nlohmann::json& j);
nlohmann::json scenario_to_json(const Scenario& scenario);
/// Canonical text: sorted keys, two-space indent, trailing newline.
std::string canonical_text(const Scenario& scenario);

/// Structural and semantic checks beyond the graph itself.
std::vector<Violation> validate_scenario(const Scenario& scenario);

/// Parses, converts and validates; any violation is a ScenarioError naming
/// the offending entity.
Scenario load_scenario(const std::filesystem::path& path);
Scenario parse_scenario(const std::string& text);
void save_scenario(const Scenario& scenario, const std::filesystem::path& path);

/// 1-based line of each declaration's `"id"` line in canonical_text().
std::map<ElementId, int> creation_lines(const Scenario& scenario);

/// Registers creation sites and element tags for every declaration.
void register_scenario(TraceRegistry& registry, const Scenario& scenario);

// --- editing ---------------------------------------------------------------

struct AddNode {
  NodeId id;
  double x = 0.0;
  double y = 0.0;
};
struct AddEdge {
  EdgeId id;
  NodeId from;
  NodeId to;
  double length = 0.0;
  bool sight_restricted = false;
};
struct AddElement {
  ElementKind kind = ElementKind::MainSignal;
  NodeId node;
  EdgeId facing;
  std::optional<SignalState> state;
  std::string name;
  ElementTags tags;
};
/// Any node, edge, element, logical element, station or train id.
struct DeleteEntity {
  std::string id;
};
/// Copies the nodes, the edges between them and the elements on them.
struct CopySubgraph {
  std::vector<NodeId> nodes;
  double dx = 0.0;
  double dy = 0.0;
};
/// Creates a logical element when `logical` is empty, else replaces its
/// members and station.
struct AssignLogical {
  ElementId logical;
  std::vector<ElementId> members;
  StationId station;
};
struct SetConfig {
  std::string key;
  nlohmann::json value;
};

using EditOp = std::variant<AddNode, AddEdge, AddElement, DeleteEntity, CopySubgraph, AssignLogical, SetConfig>;

struct EditResult {
  Scenario scenario;
  std::vector<std::string> created;
  std::vector<std::string> warnings;
};

/// Returns a new version; the input is never modified. Throws ScenarioError
/// for references to missing entities.
EditResult apply_edit(const Scenario& scenario, const EditOp& op);
EditOp edit_op_from_json(const nlohmann::json& j);

}  // namespace railtrace
