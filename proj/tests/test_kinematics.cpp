#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "railtrace/kinematics.hpp"

using namespace railtrace;

namespace {

/// Closed-form accelerate/cruise/brake profile, written out independently of
/// the planner: peak speed from the two kinematic equations, capped at the
/// line speed.
struct Expected {
  double time;
  double accel_distance;
  double cruise_distance;
  double brake_distance;
};

Expected closed_form(double v0, double ve, double d, double limit, double a, double b) {
  Expected e{0, 0, 0, 0};
  double peak = std::sqrt((2 * a * b * d + b * v0 * v0 + a * ve * ve) / (a + b));
  if (peak <= limit) {
    e.accel_distance = (peak * peak - v0 * v0) / (2 * a);
    e.brake_distance = (peak * peak - ve * ve) / (2 * b);
    e.time = (peak - v0) / a + (peak - ve) / b;
    return e;
  }
  e.accel_distance = (limit * limit - v0 * v0) / (2 * a);
  e.brake_distance = (limit * limit - ve * ve) / (2 * b);
  e.cruise_distance = d - e.accel_distance - e.brake_distance;
  e.time = (limit - v0) / a + e.cruise_distance / limit + (limit - ve) / b;
  return e;
}

Expected measured(const MotionPlan& plan) {
  Expected m{plan.duration(), 0, 0, 0};
  for (const auto& p : plan.phases) {
    if (p.acceleration > 0) m.accel_distance += p.distance();
    else if (p.acceleration < 0) m.brake_distance += p.distance();
    else m.cruise_distance += p.distance();
  }
  return m;
}

}  // namespace

TEST(Kinematics, ThousandMetresAtSixtyFromRestToRest) {
  TrainProfile profile;
  MotionPlan plan = plan_segment(0.0, 0.0, 1000.0, kmh_to_ms(60), profile);
  double grid = plan.grid_duration().to_double();
  EXPECT_NEAR(grid, 82.3, 0.2);
  EXPECT_GE(grid, plan.duration());
  EXPECT_LT(grid - plan.duration(), 0.125);
  EXPECT_EQ(8 % plan.grid_duration().denominator(), 0);
}

TEST(Kinematics, MatchesClosedFormOnRandomFeasibleSegments) {
  std::mt19937_64 rng(20260417);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  int checked = 0;
  while (checked < 1000) {
    double a = 0.3 + unit(rng) * 1.2;
    double b = 0.3 + unit(rng) * 1.2;
    double limit = kmh_to_ms(20 + unit(rng) * 140);
    double d = 1 + unit(rng) * 3000;
    double v0 = unit(rng) * limit;
    double ve = unit(rng) * limit;
    if (v0 * v0 > ve * ve + 2 * b * d) continue;
    if (ve * ve > v0 * v0 + 2 * a * d) continue;
    TrainProfile profile{limit, a, b, 100};
    MotionPlan plan = plan_segment(v0, ve, d, limit, profile);
    Expected want = closed_form(v0, ve, d, limit, a, b);
    Expected got = measured(plan);
    ASSERT_NEAR(got.time, want.time, 1e-9 * want.time) << "v0=" << v0 << " ve=" << ve << " d=" << d;
    ASSERT_NEAR(got.accel_distance, want.accel_distance, 1e-9 * d);
    ASSERT_NEAR(got.cruise_distance, want.cruise_distance, 1e-9 * d);
    ASSERT_NEAR(got.brake_distance, want.brake_distance, 1e-9 * d);
    ASSERT_NEAR(plan.phases.empty() ? v0 : plan.phases.back().end_velocity(), ve, 1e-9 * limit);
    for (const auto& p : plan.phases) {
      ASSERT_GT(p.duration, 0.0);
      ASSERT_LE(std::max(p.start_velocity, p.end_velocity()), limit * (1 + 1e-12));
    }
    ++checked;
  }
}

TEST(Kinematics, StartAboveLimitBrakesFirst) {
  TrainProfile profile;
  double v0 = kmh_to_ms(80);
  double limit = kmh_to_ms(40);
  MotionPlan plan = plan_segment(v0, 0.0, 800, limit, profile);
  ASSERT_FALSE(plan.phases.empty());
  EXPECT_LT(plan.phases.front().acceleration, 0.0);
  EXPECT_NEAR(plan.phases.front().end_velocity(), limit, 1e-9);
  double total = 0;
  for (const auto& p : plan.phases) total += p.distance();
  EXPECT_NEAR(total, 800, 1e-9);
}

TEST(Kinematics, InfeasibleBrakingIsReported) {
  TrainProfile profile;
  double v0 = kmh_to_ms(60);
  double needed = braking_distance(v0, profile.brake);
  EXPECT_THROW(plan_segment(v0, 0.0, needed * 0.9, v0, profile), InfeasiblePlan);
  EXPECT_NO_THROW(plan_segment(v0, 0.0, needed, v0, profile));
}

TEST(Kinematics, InvalidArguments) {
  TrainProfile profile;
  EXPECT_THROW(plan_segment(0, 0, 0, 10, profile), std::invalid_argument);
  EXPECT_THROW(plan_segment(0, 0, -5, 10, profile), std::invalid_argument);
  EXPECT_THROW(plan_segment(0, 12, 100, 10, profile), std::invalid_argument);
  EXPECT_THROW(plan_segment(0, 10, 1, 10, profile), std::invalid_argument);
}

TEST(Kinematics, PositionAtFollowsThePlan) {
  TrainProfile profile;
  MotionPlan plan = plan_segment(0.0, 0.0, 1000.0, kmh_to_ms(60), profile);
  plan.origin = 250;
  EXPECT_DOUBLE_EQ(position_at(plan, 0.0).offset, 250);
  MotionState s = position_at(plan, 10.0);
  EXPECT_NEAR(s.offset, 250 + 0.5 * profile.accel * 100, 1e-9);
  EXPECT_NEAR(s.velocity, profile.accel * 10, 1e-9);
  MotionState end = position_at(plan, plan.grid_duration());
  EXPECT_NEAR(end.offset, 1250, 1e-9);
  EXPECT_NEAR(end.velocity, 0, 1e-9);
  EXPECT_THROW(position_at(plan, -1.0), std::out_of_range);
  EXPECT_THROW(position_at(plan, plan.grid_duration() + Rational(1, 8)), std::out_of_range);

  double prev = -1;
  for (int i = 0; i <= 100; ++i) {
    double off = position_at(plan, plan.duration() * i / 100).offset;
    EXPECT_GE(off, prev);
    prev = off;
  }
}

TEST(Kinematics, ReplanContinuesFromInterpolatedState) {
  TrainProfile profile;
  MotionPlan plan = plan_segment(0.0, 0.0, 1000.0, kmh_to_ms(60), profile);
  Rational t(30);
  MotionState at = position_at(plan, t);
  MotionPlan next = replan_at(plan, t, 0.0, 300.0, kmh_to_ms(60), profile);
  EXPECT_NEAR(next.origin, at.offset, 1e-9);
  EXPECT_NEAR(next.start_velocity, at.velocity, 1e-9);
  EXPECT_NEAR(position_at(next, next.duration()).offset, at.offset + 300, 1e-6);
}
