#include <gtest/gtest.h>

#include <algorithm>

#include "railtrace/model.hpp"

using namespace railtrace;

namespace {

PhysicalElement element(const std::string& id, ElementKind kind, const std::string& node, const std::string& facing,
                        std::optional<SignalState> state = std::nullopt) {
  return {ElementId(id), kind, NodeId(node), EdgeId(facing), state, ""};
}

/// n0 -e0-> n1 -e1-> n2 -e2-> n3 with PoV at n1, presignal at n2 and main at n3.
InfrastructureGraph line() {
  InfrastructureGraph g;
  g.nodes = {{NodeId("n0")}, {NodeId("n1")}, {NodeId("n2")}, {NodeId("n3")}};
  g.edges = {{EdgeId("e0"), NodeId("n0"), NodeId("n1"), 100},
             {EdgeId("e1"), NodeId("n1"), NodeId("n2"), 100},
             {EdgeId("e2"), NodeId("n2"), NodeId("n3"), 400}};
  g.elements = {element("PointOfVisibility:0", ElementKind::PointOfVisibility, "n1", "e0"),
                element("PreSignal:0", ElementKind::PreSignal, "n2", "e1", SignalState::Halt),
                element("MainSignal:0", ElementKind::MainSignal, "n3", "e2", SignalState::Halt),
                element("Zs10:0", ElementKind::Zs10, "n3", "e2")};
  g.logical = {{ElementId("LogicalElement:0"),
                {ElementId("PointOfVisibility:0"), ElementId("PreSignal:0"), ElementId("MainSignal:0")},
                {}}};
  return g;
}

bool has_code(const std::vector<Violation>& v, const std::string& code) {
  return std::any_of(v.begin(), v.end(), [&](const Violation& x) { return x.code == code; });
}

}  // namespace

TEST(Model, ValidLineHasNoViolations) { EXPECT_TRUE(validate_graph(line()).empty()); }

TEST(Model, StructuralViolations) {
  auto g = line();
  g.nodes.push_back({NodeId("n0")});
  g.edges.push_back({EdgeId("e9"), NodeId("n1"), NodeId("n1"), 0});
  g.edges.push_back({EdgeId("e8"), NodeId("n1"), NodeId("nx"), 5});
  g.elements.push_back(element("Balise:0", ElementKind::Balise, "nx", "e0"));
  g.elements.push_back(element("Magnet:0", ElementKind::Magnet, "n3", "e0", SignalState::Go));
  g.elements.push_back(element("MainSignal:1", ElementKind::MainSignal, "n3", "e2"));
  g.logical.push_back({ElementId("LogicalElement:1"), {}, {}});
  g.logical.push_back({ElementId("LogicalElement:2"), {ElementId("Ghost:0")}, {}});
  auto v = validate_graph(g);
  for (const char* code : {"id.duplicate", "edge.length", "edge.self-loop", "edge.unknown-node", "element.unknown-node",
                           "element.facing", "element.state", "logical.empty", "logical.dangling-member"})
    EXPECT_TRUE(has_code(v, code)) << code;
}

TEST(Model, PresignalNeedsVisibilityPointUpstream) {
  auto g = line();
  g.logical[0].members.erase(g.logical[0].members.begin());
  EXPECT_TRUE(has_code(validate_graph(g), "signal.missing-visibility-point"));
}

TEST(Model, TriggerFrontOnlyFromTheFacingEdge) {
  auto g = line();
  const auto* main = g.find_element(ElementId("MainSignal:0"));
  std::vector<Transmission> none{Transmission{NoInfo{}}};
  EXPECT_EQ(trigger_front(g, *main, EdgeId("e1")), none);
  std::vector<Transmission> expect_halt{Transmission{ExpectState{SignalState::Halt, ElementId("MainSignal:0")}}};
  EXPECT_EQ(trigger_front(g, *main, EdgeId("e2")), expect_halt);
}

TEST(Model, VisibilityPointAndPresignalAnnounceTheMainSignal) {
  auto g = line();
  g.find_element(ElementId("PreSignal:0"))->state = SignalState::Go;
  const auto* pov = g.find_element(ElementId("PointOfVisibility:0"));
  const auto* pre = g.find_element(ElementId("PreSignal:0"));
  Transmission go{ExpectState{SignalState::Go, ElementId("MainSignal:0")}};
  std::vector<Transmission> want{go};
  EXPECT_EQ(trigger_front(g, *pov, EdgeId("e0")), want);
  EXPECT_EQ(trigger_front(g, *pre, EdgeId("e1")), want);
}

TEST(Model, Zs10EmitsAreaEnd) {
  auto g = line();
  const auto* zs10 = g.find_element(ElementId("Zs10:0"));
  auto t = trigger_front(g, *zs10, EdgeId("e2"));
  ASSERT_EQ(t.size(), 1u);
  EXPECT_TRUE(std::holds_alternative<AreaEnd>(t[0].info));
  EXPECT_EQ(describe(t[0].info), "AreaEnd(-1,false,none)");
}

TEST(Model, PresignalAspectMapping) {
  EXPECT_EQ(presignal_aspect(SignalState::Go), SignalState::Go);
  EXPECT_EQ(presignal_aspect(SignalState::Slow), SignalState::Slow);
  EXPECT_EQ(presignal_aspect(SignalState::Halt), SignalState::Halt);
  EXPECT_EQ(presignal_aspect(SignalState::Invalid), SignalState::Halt);
}

TEST(Model, EnumNamesRoundTrip) {
  for (auto s : {SignalState::Go, SignalState::Halt, SignalState::Slow, SignalState::Invalid})
    EXPECT_EQ(parse_signal_state(to_string(s)), s);
  EXPECT_FALSE(parse_signal_state("go"));
  for (int k = 0; k <= static_cast<int>(ElementKind::TunnelPortal); ++k)
    EXPECT_EQ(parse_element_kind(to_string(static_cast<ElementKind>(k))), static_cast<ElementKind>(k));
}
