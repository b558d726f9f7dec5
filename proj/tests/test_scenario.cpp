#include <gtest/gtest.h>

#include <algorithm>
#include <filesystem>

#include "railtrace/scenario.hpp"
#include "support.hpp"

using namespace railtrace;
using nlohmann::json;

namespace {

json fixture_json(const std::string& name) {
  return scenario_to_json(fixtures::fixture(name));
}

std::string error_path(const json& j) {
  try {
    parse_scenario(j.dump());
  } catch (const ScenarioError& e) {
    return e.path();
  }
  return "no error";
}

bool contains(const std::vector<std::string>& v, const std::string& s) {
  return std::find(v.begin(), v.end(), s) != v.end();
}

}  // namespace

TEST(Scenario, FixturesRoundTripThroughCanonicalText) {
  for (const char* name : {"station_entry", "ato_obstacle", "tunnel_branch", "tunnel_branch_new_rule"}) {
    Scenario sc = fixtures::fixture(name);
    std::string text = canonical_text(sc);
    Scenario again = parse_scenario(text);
    EXPECT_EQ(canonical_text(again), text) << name;
    EXPECT_TRUE(validate_scenario(sc).empty()) << name;
  }
}

TEST(Scenario, SaveAndLoad) {
  Scenario sc = fixtures::fixture("station_entry");
  auto path = std::filesystem::temp_directory_path() / "railtrace_scenario_roundtrip.json";
  save_scenario(sc, path);
  EXPECT_EQ(canonical_text(load_scenario(path)), canonical_text(sc));
  std::filesystem::remove(path);
  EXPECT_THROW(load_scenario(path), ScenarioError);
}

TEST(Scenario, StrictReaderReportsJsonPaths) {
  json j = fixture_json("station_entry");
  try {
    parse_scenario("{");
    FAIL() << "malformed JSON accepted";
  } catch (const ScenarioError& e) {
    EXPECT_EQ(e.path(), "$");
  }

  json bad = j;
  bad["format_version"] = 2;
  EXPECT_EQ(error_path(bad), "$.format_version");

  bad = j;
  bad["surprise"] = 1;
  EXPECT_EQ(error_path(bad), "$.surprise");

  bad = j;
  bad["edges"][2]["to"] = 5;
  EXPECT_EQ(error_path(bad), "$.edges[2].to");

  bad = j;
  bad["edges"][1].erase("length");
  EXPECT_EQ(error_path(bad), "$.edges[1]");

  bad = j;
  bad["elements"][0]["kind"] = "Semaphore";
  EXPECT_EQ(error_path(bad), "$.elements[0].kind");

  bad = j;
  bad["config"]["warp_speed"] = 9;
  EXPECT_EQ(error_path(bad), "$.config.warp_speed");

  bad = j;
  bad["config"]["dispatcher_delay_s"] = -1;
  EXPECT_EQ(error_path(bad), "$.config.dispatcher_delay_s");

  bad = j;
  bad["trains"][0]["departure"] = "1/0";
  EXPECT_EQ(error_path(bad), "$.trains[0].departure");
}

TEST(Scenario, SemanticErrorsNameTheEntity) {
  json j = fixture_json("station_entry");
  json bad = j;
  bad["trains"][0]["route"] = json::array({"e400_500", "e0_400"});
  EXPECT_EQ(error_path(bad), "Train:0");

  bad = j;
  bad["edges"][0]["to"] = "n_missing";
  EXPECT_EQ(error_path(bad), "e0_400");

  bad = j;
  bad["trains"][0]["offset"] = 10000;
  EXPECT_EQ(error_path(bad), "Train:0");
}

TEST(Scenario, ConfigKeys) {
  SimConfig c;
  c.set("drive_on_sight_after_fault", true);
  EXPECT_TRUE(c.drive_on_sight_after_fault);
  c.set("dispatcher_delay_s", 30);
  EXPECT_DOUBLE_EQ(c.dispatcher_delay_s, 30);
  EXPECT_THROW(c.set("dispatcher_delay_s", "30"), ScenarioError);
  EXPECT_THROW(c.set("drive_on_sight_after_fault", 1), ScenarioError);
  EXPECT_THROW(c.set("sight_speed_tunnel_kmh", 0), ScenarioError);
  EXPECT_THROW(c.set("nope", 1), ScenarioError);
}

TEST(Scenario, CreationLinesPointAtIdLines) {
  Scenario sc = fixtures::fixture("tunnel_branch");
  std::string text = canonical_text(sc);
  std::vector<std::string> lines;
  std::istringstream in(text);
  for (std::string l; std::getline(in, l);) lines.push_back(l);
  auto sites = creation_lines(sc);
  EXPECT_EQ(sites.size(), sc.declared_ids().size());
  for (const auto& [id, line] : sites)
    EXPECT_NE(lines.at(line - 1).find("\"id\": \"" + id.value + "\""), std::string::npos) << id.value;
}

TEST(Scenario, EditsProduceNewVersions) {
  Scenario sc = fixtures::fixture("station_entry");
  std::string before = canonical_text(sc);

  auto r = apply_edit(sc, AddNode{NodeId("n2000"), 2000, 0});
  EXPECT_EQ(r.created, std::vector<std::string>{"n2000"});
  r = apply_edit(r.scenario, AddEdge{EdgeId("e1600_2000"), NodeId("n1600"), NodeId("n2000"), 400, false});
  r = apply_edit(r.scenario, AddElement{ElementKind::MainSignal, NodeId("n2000"), EdgeId("e1600_2000"),
                                        SignalState::Halt, "exit", {{"MainSignal"}, {}}});
  ASSERT_EQ(r.created.size(), 1u);
  EXPECT_EQ(id_type_name(ElementId(r.created[0])), "MainSignal");
  EXPECT_TRUE(validate_scenario(r.scenario).empty());
  EXPECT_EQ(canonical_text(sc), before);

  auto del = apply_edit(r.scenario, DeleteEntity{"n2000"});
  EXPECT_FALSE(del.warnings.empty());
  EXPECT_FALSE(del.scenario.graph.find_element(ElementId(r.created[0])));
  EXPECT_TRUE(validate_scenario(del.scenario).empty());

  EXPECT_THROW(apply_edit(sc, AddNode{NodeId("n0"), 0, 0}), ScenarioError);
  EXPECT_THROW(apply_edit(sc, AddEdge{EdgeId("x"), NodeId("n0"), NodeId("zz"), 1, false}), ScenarioError);
  EXPECT_THROW(apply_edit(sc, DeleteEntity{"nothing"}), ScenarioError);
}

TEST(Scenario, DeletingAnEdgeRemovesDependents) {
  Scenario sc = fixtures::fixture("station_entry");
  auto r = apply_edit(sc, DeleteEntity{"e0_400"});
  EXPECT_TRUE(std::none_of(r.scenario.trains.begin(), r.scenario.trains.end(), [](const TrainSpec& t) {
    return std::find(t.route.begin(), t.route.end(), EdgeId("e0_400")) != t.route.end();
  }));
  EXPECT_FALSE(r.warnings.empty());
}

TEST(Scenario, CopySubgraphUsesFreshIds) {
  Scenario sc = fixtures::fixture("station_entry");
  auto r = apply_edit(sc, CopySubgraph{{NodeId("n0"), NodeId("n400"), NodeId("n500")}, 0, 50});
  EXPECT_TRUE(contains(r.created, "n0.copy1"));
  EXPECT_TRUE(contains(r.created, "e0_400.copy1"));
  EXPECT_TRUE(r.scenario.graph.find_edge(EdgeId("e400_500.copy1")));
  for (const auto& id : r.created) EXPECT_EQ(std::count(r.created.begin(), r.created.end(), id), 1);
  auto again = apply_edit(r.scenario, CopySubgraph{{NodeId("n0")}, 0, 0});
  EXPECT_TRUE(contains(again.created, "n0.copy2"));
}

TEST(Scenario, AssignLogicalAndSetConfig) {
  Scenario sc = fixtures::fixture("ato_obstacle");
  std::string member = sc.graph.elements.front().id.value;
  auto r = apply_edit(sc, AssignLogical{ElementId(), {ElementId(member)}, StationId()});
  ASSERT_EQ(r.created.size(), 1u);
  EXPECT_EQ(id_type_name(ElementId(r.created[0])), "LogicalElement");
  EXPECT_THROW(apply_edit(sc, AssignLogical{ElementId("LogicalElement:99"), {}, StationId()}), ScenarioError);
  EXPECT_THROW(apply_edit(sc, AssignLogical{ElementId(), {ElementId("Ghost:1")}, StationId()}), ScenarioError);

  auto c = apply_edit(sc, SetConfig{"drive_on_sight_after_fault", true});
  EXPECT_TRUE(c.scenario.config.drive_on_sight_after_fault);
  EXPECT_FALSE(sc.config.drive_on_sight_after_fault);
}

TEST(Scenario, EditOpsFromJson) {
  EXPECT_TRUE(std::holds_alternative<AddNode>(edit_op_from_json({{"op", "add_node"}, {"id", "q"}})));
  EXPECT_TRUE(std::holds_alternative<DeleteEntity>(edit_op_from_json({{"op", "delete"}, {"id", "q"}})));
  EXPECT_TRUE(std::holds_alternative<SetConfig>(
      edit_op_from_json({{"op", "set_config"}, {"key", "dispatcher_delay_s"}, {"value", 3}})));
  EXPECT_THROW(edit_op_from_json({{"op", "teleport"}}), ScenarioError);
  EXPECT_THROW(edit_op_from_json({{"op", "add_node"}, {"id", "q"}, {"z", 1}}), ScenarioError);
  EXPECT_THROW(edit_op_from_json({{"op", "add_element"}, {"kind", "Nope"}, {"node", "a"}, {"facing", "b"}}),
               ScenarioError);
}
