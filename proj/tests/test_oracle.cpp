#include <gtest/gtest.h>

#include <algorithm>
#include <set>

#include "railtrace/fault_scripts.hpp"
#include "railtrace/log_oracle.hpp"
#include "support.hpp"

using namespace railtrace;

namespace {

using Events = std::vector<SimEvent>;

Events without(Events events, const std::function<bool(const SimEvent&)>& drop) {
  events.erase(std::remove_if(events.begin(), events.end(), drop), events.end());
  return events;
}

bool has_finding(const SafetyReport& r, const std::string& kind, const std::string& subject) {
  return std::any_of(r.findings.begin(), r.findings.end(),
                     [&](const SafetyFinding& f) { return f.kind == kind && f.subject == subject; });
}

bool is_message(const SimEvent& e, const std::string& prefix) {
  const auto* m = std::get_if<Message>(&e.payload);
  return m && m->text.rfind(prefix, 0) == 0;
}

}  // namespace

TEST(Oracle, FixtureLogsAreSafe) {
  for (const auto& run : fixtures::fixture_runs()) {
    Scenario sc = fixtures::fixture(run.scenario);
    auto report = check_log(sc, fixtures::run_fixture(run));
    EXPECT_TRUE(report.ok()) << run.label << "\n" << report.to_text();
    EXPECT_GT(report.crossings, 0u) << run.label;
  }
}

TEST(Oracle, PassingAFaultedSignalWithoutOrderIsASpad) {
  Scenario sc = fixtures::fixture("tunnel_branch");
  Events ev = fixtures::run_fixture({"", "tunnel_branch", "tunnel_branch_fault"});
  ASSERT_TRUE(check_log(sc, ev).ok());
  Events forged = without(ev, [](const SimEvent& e) { return is_message(e, "order depart-past-halt train=Train:0"); });
  ASSERT_LT(forged.size(), ev.size());
  auto report = check_log(sc, forged);
  EXPECT_FALSE(report.ok());
  EXPECT_TRUE(has_finding(report, "spad", "Train:0"));
  EXPECT_FALSE(has_finding(report, "spad", "Train:1"));
}

TEST(Oracle, MissingProceedAspectIsASpad) {
  Scenario sc = fixtures::fixture("station_entry");
  Events ev = fixtures::run_fixture({"", "station_entry", "station_entry"});
  Events forged = without(ev, [](const SimEvent& e) {
    const auto* c = std::get_if<StateChange>(&e.payload);
    return c && e.subject == "MainSignal:0" && c->state != "HALT";
  });
  ASSERT_LT(forged.size(), ev.size());
  auto report = check_log(sc, forged);
  EXPECT_TRUE(has_finding(report, "spad", "Train:0"));
}

TEST(Oracle, UnreleasedBlockIsCoOccupied) {
  Scenario sc = fixtures::fixture("tunnel_branch");
  Events ev = fixtures::run_fixture({"", "tunnel_branch", std::nullopt});
  // Forge a log where train 0 never clears a block and every signal keeps
  // showing proceed for train 1.
  Events forged = without(ev, [](const SimEvent& e) {
    const auto* c = std::get_if<StateChange>(&e.payload);
    return (c && (c->state == "FREE" || c->state == "HALT")) || is_message(e, "arrive train=Train:0");
  });
  auto report = check_log(sc, forged);
  EXPECT_TRUE(std::any_of(report.findings.begin(), report.findings.end(),
                          [](const SafetyFinding& f) { return f.kind == "block-co-occupancy"; }))
      << report.to_text();
}

TEST(Oracle, TwoTrainsStartingInOneBlock) {
  Scenario sc = fixtures::fixture("tunnel_branch");
  const Block& block = sc.stations.at(0).blocks.at(0);
  sc.trains[0].route = block.edges;
  sc.trains[1].route = block.edges;
  auto report = check_log(sc, {});
  EXPECT_TRUE(std::any_of(report.findings.begin(), report.findings.end(),
                          [](const SafetyFinding& f) { return f.kind == "block-co-occupancy"; }));
}

TEST(Oracle, ClockRegressionAndUnknownSubjects) {
  Scenario sc = fixtures::fixture("station_entry");
  Events ev = {{"Train:0", Movement{"n0", 0}, Rational(5)},
               {"Train:0", Movement{"n400", 100}, Rational(4)},
               {"Train:7", Movement{"n0", 0}, Rational(6)},
               {"Train:1", Movement{"n42", 0}, Rational(6)}};
  auto report = check_log(sc, ev);
  EXPECT_TRUE(has_finding(report, "clock", "Train:0"));
  EXPECT_TRUE(has_finding(report, "unknown-subject", "Train:7"));
  EXPECT_TRUE(has_finding(report, "unknown-subject", "Train:1"));
}

TEST(Oracle, ViolationMessagesFailTheReport) {
  Scenario sc = fixtures::fixture("station_entry");
  auto report = check_log(sc, {{"Train:0", Message{"violation braking train=Train:0", {}}, Rational(1)}});
  EXPECT_TRUE(report.findings.empty());
  EXPECT_EQ(report.violation_messages, 1u);
  EXPECT_FALSE(report.ok());
  EXPECT_EQ(report.to_json()["ok"], false);
  EXPECT_NE(report.to_text().find("VIOLATED"), std::string::npos);
}

TEST(Oracle, MessageFields) {
  auto f = message_fields("order depart-past-halt train=Train:0 signal=MainSignal:3 sight=yes");
  ASSERT_EQ(f.size(), 5u);
  EXPECT_EQ(f[0], (std::pair<std::string, std::string>{"order", ""}));
  EXPECT_EQ(f[2], (std::pair<std::string, std::string>{"train", "Train:0"}));
  EXPECT_EQ(f[4].second, "yes");
  EXPECT_TRUE(message_fields("").empty());
}

TEST(Oracle, RandomFaultScriptsStaySafe) {
  for (const char* name : {"tunnel_branch", "station_entry", "ato_obstacle"}) {
    Scenario sc = fixtures::fixture(name);
    for (std::uint64_t seed = 1; seed <= 8; ++seed) {
      auto script = random_fault_script(sc, seed);
      ASSERT_FALSE(script.empty()) << name << " seed " << seed;
      for (const auto& step : script) EXPECT_EQ(step.command["method"], "breakSignal");
      auto report = check_log(sc, run_batch(sc, script, std::nullopt));
      EXPECT_TRUE(report.ok()) << name << " seed " << seed << "\n" << report.to_text();
    }
  }
}

TEST(Oracle, RandomFaultScriptIsDeterministicPerSeed) {
  Scenario sc = fixtures::fixture("tunnel_branch");
  EXPECT_EQ(script_to_json(random_fault_script(sc, 7)), script_to_json(random_fault_script(sc, 7)));
  std::set<std::string> distinct;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) distinct.insert(script_to_json(random_fault_script(sc, seed)).dump());
  EXPECT_GT(distinct.size(), 1u);
}
