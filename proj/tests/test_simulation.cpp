#include <gtest/gtest.h>

#include <algorithm>
#include <functional>
#include <optional>

#include "railtrace/log_oracle.hpp"
#include "railtrace/simulation.hpp"
#include "support.hpp"

using namespace railtrace;

namespace {

using Events = std::vector<SimEvent>;

std::optional<Rational> first_time(const Events& events, const std::function<bool(const SimEvent&)>& pred) {
  for (const auto& e : events)
    if (pred(e)) return e.time;
  return std::nullopt;
}

std::function<bool(const SimEvent&)> passes(const std::string& train, const std::string& node) {
  return [=](const SimEvent& e) {
    const auto* mv = std::get_if<Movement>(&e.payload);
    return mv && e.subject == train && mv->node == node && mv->velocity_mm_s > 0;
  };
}

std::function<bool(const SimEvent&)> message(const std::string& subject, const std::string& needle) {
  return [=](const SimEvent& e) {
    const auto* m = std::get_if<Message>(&e.payload);
    return m && e.subject == subject && m->text.find(needle) != std::string::npos;
  };
}

std::function<bool(const SimEvent&)> state_change(const std::string& subject, const std::string& state) {
  return [=](const SimEvent& e) {
    const auto* c = std::get_if<StateChange>(&e.payload);
    return c && e.subject == subject && c->state == state;
  };
}

Events run(const std::string& scenario, const std::optional<std::string>& script) {
  return fixtures::run_fixture({scenario, scenario, script});
}

double seconds(const std::optional<Rational>& t) {
  if (!t) throw std::runtime_error("event not found");
  return t->to_double();
}

}  // namespace

TEST(Simulation, ConstructionEmitsNewEventsOnly) {
  Scenario sc = fixtures::fixture("tunnel_branch");
  Simulation sim(sc);
  EXPECT_EQ(sim.events().size(), sc.declared_ids().size());
  for (const auto& e : sim.events()) {
    EXPECT_EQ(e.kind(), EventKind::NEW);
    EXPECT_EQ(e.time, Rational(0));
  }
  EXPECT_TRUE(sim.step_until(Rational(0)).empty());
  for (const auto& t : sim.trains()) EXPECT_EQ(t.status, TrainStatus::Scheduled);
}

TEST(Simulation, RunsAreDeterministic) {
  for (const auto& r : fixtures::fixture_runs()) {
    std::string a = serialize_log(fixtures::run_fixture(r));
    std::string b = serialize_log(fixtures::run_fixture(r));
    EXPECT_EQ(a, b) << r.label;
    std::vector<ScriptStep> script;
    if (r.script) script = fixtures::fixture_script(*r.script);
    KernelOptions strict;
    strict.check_guard_purity = true;
    EXPECT_EQ(serialize_log(run_batch(fixtures::fixture(r.scenario), script, std::nullopt, strict)), a) << r.label;
  }
}

TEST(Simulation, EveryTrainArrivesInEveryFixture) {
  for (const auto& r : fixtures::fixture_runs()) {
    World world(fixtures::fixture(r.scenario));
    std::vector<ScriptStep> script;
    if (r.script) script = fixtures::fixture_script(*r.script);
    for (const auto& step : script) {
      world.set_limit(step.at);
      world.run();
      world.apply(step.command);
    }
    world.run_to_completion();
    for (const auto& t : world.simulation().trains()) {
      EXPECT_EQ(t.status, TrainStatus::Arrived) << r.label << " " << t.id;
      EXPECT_EQ(t.velocity, 0.0);
    }
    EXPECT_EQ(world.simulation().kernel().live_processes(), 0u) << r.label;
  }
}

TEST(Simulation, ShuffledSchedulingKeepsTheLogSafe) {
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    for (const auto& r : fixtures::fixture_runs()) {
      std::vector<ScriptStep> script;
      if (r.script) script = fixtures::fixture_script(*r.script);
      KernelOptions o;
      o.shuffle_seed = seed;
      Scenario sc = fixtures::fixture(r.scenario);
      auto events = run_batch(sc, script, std::nullopt, o);
      auto report = check_log(sc, events);
      EXPECT_TRUE(report.ok()) << r.label << " seed " << seed << "\n" << report.to_text();
    }
  }
}

TEST(Simulation, TunnelFaultUnderOldRuleDoesNotDelayTheFollower) {
  Events base = run("tunnel_branch", std::nullopt);
  Events old_rule = run("tunnel_branch", "tunnel_branch_fault");
  auto arrival = [](const Events& ev, const std::string& train) {
    return seconds(first_time(ev, message(train, "arrive ")));
  };
  EXPECT_DOUBLE_EQ(arrival(old_rule, "Train:1"), arrival(base, "Train:1"));
  EXPECT_TRUE(first_time(old_rule, message("MainSignal:3", "fault signal=MainSignal:3 state=INVALID")));
  EXPECT_TRUE(first_time(old_rule, message("Station:2", "order depart-past-halt train=Train:0")));
}

TEST(Simulation, DriveOnSightAddsAboutSixMinutesInTheTunnel) {
  Events old_rule = run("tunnel_branch", "tunnel_branch_fault");
  Events new_rule = run("tunnel_branch_new_rule", "tunnel_branch_fault");
  auto section = [](const Events& ev) {
    return seconds(first_time(ev, passes("Train:0", "n4300"))) - seconds(first_time(ev, passes("Train:0", "n3600")));
  };
  double extra = section(new_rule) - section(old_rule);
  EXPECT_NEAR(extra, 378.0, 2.0);
  // 700 m at 6 km/h, plus the short speed-up from a stand.
  EXPECT_NEAR(section(new_rule), 700.0 / (6.0 / 3.6), 2.0);

  Events base = run("tunnel_branch", std::nullopt);
  auto arrival = [](const Events& ev, const std::string& train) {
    return seconds(first_time(ev, message(train, "arrive ")));
  };
  EXPECT_GT(arrival(new_rule, "Train:0"), arrival(old_rule, "Train:0"));
  EXPECT_GT(arrival(new_rule, "Train:1"), arrival(base, "Train:1"));
}

TEST(Simulation, DriveOnSightKeepsSightSpeedUntilTheNextSignal) {
  Events ev = run("tunnel_branch_new_rule", "tunnel_branch_fault");
  Rational from = *first_time(ev, passes("Train:0", "n3600"));
  Rational to = *first_time(ev, passes("Train:0", "n4300"));
  int checked = 0;
  for (const auto& e : ev) {
    const auto* mv = std::get_if<Movement>(&e.payload);
    if (!mv || e.subject != "Train:0" || e.time < from || e.time >= to) continue;
    EXPECT_LE(mv->velocity_mm_s, to_mm_s(6.0 / 3.6)) << serialize(e);
    ++checked;
  }
  EXPECT_GT(checked, 0);
  auto order = std::find_if(ev.begin(), ev.end(), message("Station:2", "order depart-past-halt train=Train:0"));
  ASSERT_NE(order, ev.end());
  EXPECT_NE(std::get<Message>(order->payload).text.find("sight=yes"), std::string::npos);
  auto second = std::find_if(ev.begin(), ev.end(), message("Station:2", "order depart-past-halt train=Train:1"));
  ASSERT_NE(second, ev.end());
  EXPECT_NE(std::get<Message>(second->payload).text.find("sight=no"), std::string::npos);
}

TEST(Simulation, AtoHoldsForObstacleEvenWhenTheSignalClears) {
  Events ev = run("ato_obstacle", "ato_obstacle_late_clear");
  Rational go = *first_time(ev, state_change("MainSignal:0", "GO"));
  Rational halt = *first_time(ev, message("Train:0", "decision=halt-for-obstacle"));
  Rational cleared = *first_time(ev, message("Train:0", "decision=obstacle-cleared"));
  EXPECT_LT(go, Rational(400));
  EXPECT_EQ(cleared, Rational(400));
  for (const auto& e : ev) {
    const auto* mv = std::get_if<Movement>(&e.payload);
    if (mv && e.subject == "Train:0" && e.time > halt && e.time < cleared)
      EXPECT_EQ(mv->velocity_mm_s, 0) << serialize(e);
  }
  auto depart = std::find_if(ev.begin(), ev.end(), [&](const SimEvent& e) {
    return message("Train:0", "decision=depart")(e) && e.time > Rational(0);
  });
  ASSERT_NE(depart, ev.end());
  EXPECT_EQ(depart->time, Rational(400));
}

TEST(Simulation, AtoWaitsForTheSignalWhenTheObstacleClearsFirst) {
  Events ev = run("ato_obstacle", "ato_obstacle_early_clear");
  Rational cleared = *first_time(ev, message("Train:0", "decision=obstacle-cleared"));
  Rational wait = *first_time(ev, message("Train:0", "decision=wait-for-signal"));
  Rational go = *first_time(ev, state_change("MainSignal:0", "GO"));
  EXPECT_EQ(cleared, Rational(150));
  EXPECT_EQ(wait, Rational(150));
  EXPECT_GT(go, Rational(150));
  auto depart = std::find_if(ev.begin(), ev.end(), [&](const SimEvent& e) {
    return message("Train:0", "decision=depart")(e) && e.time > Rational(0);
  });
  ASSERT_NE(depart, ev.end());
  EXPECT_EQ(depart->time, go);
}

TEST(Simulation, AtoStopsShortOfTheObstacle) {
  Scenario sc = fixtures::fixture("ato_obstacle");
  Simulation sim(sc);
  sim.step_until(Rational(10));
  sim.set_obstacle(EdgeId("e1200_1500"), 295, true);
  sim.step_until(Rational(300));
  auto t = sim.train(TrainId("Train:0"));
  ASSERT_TRUE(t);
  EXPECT_EQ(t->velocity, 0.0);
  EXPECT_EQ(t->status, TrainStatus::Standing);
  double obstacle = 1200 + 295;
  EXPECT_LE(t->position, obstacle - sc.config.obstacle_margin_m + 1e-6);
  EXPECT_GT(t->position, 1200);
  ASSERT_TRUE(t->detected_obstacle);
  EXPECT_DOUBLE_EQ(*t->detected_obstacle, obstacle);
  EXPECT_EQ(sim.obstacles(), (std::vector<Obstacle>{{EdgeId("e1200_1500"), 295}}));
}

TEST(Simulation, HaltOrderStopsATrainAndResumeReleasesIt) {
  Simulation sim(fixtures::fixture("station_entry"));
  sim.step_until(Rational(20));
  sim.halt_order(TrainId("Train:0"));
  sim.step_until(Rational(120));
  auto t = sim.train(TrainId("Train:0"));
  ASSERT_TRUE(t);
  EXPECT_TRUE(t->halt_ordered);
  EXPECT_EQ(t->velocity, 0.0);
  EXPECT_EQ(t->status, TrainStatus::Standing);
  double stopped_at = t->position;
  sim.step_until(Rational(200));
  EXPECT_EQ(sim.train(TrainId("Train:0"))->position, stopped_at);
  sim.resume_normal(TrainId("Train:0"));
  sim.run_to_completion();
  EXPECT_EQ(sim.train(TrainId("Train:0"))->status, TrainStatus::Arrived);
  EXPECT_TRUE(first_time(sim.events(), message("Train:0", "order halt train=Train:0")));
  EXPECT_TRUE(first_time(sim.events(), message("Train:0", "order resume train=Train:0")));
  EXPECT_TRUE(check_log(sim.scenario(), sim.events()).ok());
}

TEST(Simulation, StationEntryShowsSlowAspectAndAreaEnd) {
  Events ev = run("station_entry", "station_entry");
  EXPECT_TRUE(first_time(ev, message("Train:0", "signal=MainSignal:0 state=SLOW")));
  EXPECT_TRUE(first_time(ev, message("Train:1", "signal=MainSignal:0 state=HALT")));
  auto area_end = first_time(ev, message("Train:0", "area-end train=Train:0"));
  ASSERT_TRUE(area_end);
  for (const auto& e : ev) {
    const auto* mv = std::get_if<Movement>(&e.payload);
    if (mv && e.subject == "Train:0" && e.time > *first_time(ev, passes("Train:0", "n750")) && e.time <= *area_end)
      EXPECT_LE(mv->velocity_mm_s, to_mm_s(40.0 / 3.6)) << serialize(e);
  }
}

TEST(Simulation, BlocksTrackTheirOccupant) {
  Simulation sim(fixtures::fixture("tunnel_branch"));
  const auto& sc = sim.scenario();
  ASSERT_FALSE(sc.stations.empty());
  sim.step_until(Rational(100));
  bool some = false;
  for (const auto& st : sc.stations)
    for (std::size_t b = 0; b < st.blocks.size(); ++b) some |= sim.block_occupant(st.id, b).has_value();
  EXPECT_TRUE(some);
  sim.run_to_completion();
  for (const auto& st : sc.stations)
    for (std::size_t b = 0; b < st.blocks.size(); ++b) EXPECT_FALSE(sim.block_occupant(st.id, b)) << st.id << b;
}

TEST(Simulation, FaultTurnsTheSignalInvalid) {
  Simulation sim(fixtures::fixture("tunnel_branch"));
  sim.inject_fault(ElementId("MainSignal:3"));
  EXPECT_TRUE(sim.faulted(ElementId("MainSignal:3")));
  sim.step_until(Rational(1));
  EXPECT_EQ(sim.graph().find_element(ElementId("MainSignal:3"))->state, SignalState::Invalid);
  EXPECT_TRUE(first_time(sim.events(), state_change("MainSignal:3", "INVALID")));
}

TEST(Simulation, InvalidInteractionsAreRejected) {
  Simulation sim(fixtures::fixture("tunnel_branch"));
  EXPECT_THROW(sim.inject_fault(ElementId("TunnelPortal:0")), InteractionError);
  EXPECT_THROW(sim.inject_fault(ElementId("MainSignal:99")), InteractionError);
  EXPECT_THROW(sim.halt_order(TrainId("Train:9")), InteractionError);
  EXPECT_THROW(sim.give_order(TrainId("Train:0"), ElementId("TunnelPortal:0"), false), InteractionError);
  EXPECT_THROW(sim.set_obstacle(EdgeId("nope"), 1, true), InteractionError);
  EXPECT_THROW(sim.set_obstacle(EdgeId(sim.scenario().graph.edges[0].id), -1, true), InteractionError);
  EXPECT_THROW(sim.set_obstacle(EdgeId(sim.scenario().graph.edges[0].id), 1e9, true), InteractionError);
  Scenario broken = fixtures::fixture("tunnel_branch");
  broken.trains[0].route.clear();
  EXPECT_THROW(Simulation{broken}, ScenarioError);
}

TEST(Simulation, ObstacleRemovalIsTolerant) {
  Simulation sim(fixtures::fixture("ato_obstacle"));
  sim.set_obstacle(EdgeId("e1200_1500"), 10, true);
  sim.set_obstacle(EdgeId("e1200_1500"), 10, false);
  EXPECT_TRUE(sim.obstacles().empty());
}
