#include "railtrace/kinematics.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace railtrace {

namespace {

constexpr double kSpeedTol = 1e-9;

double scale_tol(double v) { return kSpeedTol * std::max(1.0, v * v); }

void push_phase(MotionPlan& plan, double v_start, double v_end, double distance) {
  if (distance <= 0.0) return;
  double avg = 0.5 * (v_start + v_end);
  if (avg <= 0.0) return;
  double duration = distance / avg;
  double accel = (v_end - v_start) / duration;
  plan.phases.push_back({duration, v_start, accel});
}

}  // namespace

double MotionPlan::duration() const {
  double total = 0.0;
  for (const auto& p : phases) total += p.duration;
  return total;
}

MotionPlan plan_segment(double v0, double v_end, double distance, double limit, const TrainProfile& profile) {
  if (!(distance > 0.0)) throw std::invalid_argument("plan distance must be positive");
  if (v0 < 0.0 || v_end < 0.0) throw std::invalid_argument("negative velocity");
  if (!(limit > 0.0)) throw std::invalid_argument("speed limit must be positive");
  if (v_end > limit + kSpeedTol) throw std::invalid_argument("target speed above limit");
  v_end = std::min(v_end, limit);

  const double a = profile.accel;
  const double b = profile.brake;

  if (v0 * v0 > v_end * v_end + 2.0 * b * distance + scale_tol(v0)) {
    throw InfeasiblePlan("cannot brake from " + std::to_string(v0) + " to " + std::to_string(v_end) +
                         " m/s within " + std::to_string(distance) + " m");
  }

  MotionPlan plan;
  plan.distance = distance;
  plan.start_velocity = v0;
  plan.end_velocity = v_end;

  double remaining = distance;
  double v_start = v0;
  if (v0 > limit) {
    double s = (v0 * v0 - limit * limit) / (2.0 * b);
    s = std::min(s, remaining);
    push_phase(plan, v0, limit, s);
    remaining -= s;
    v_start = limit;
  }

  if (v_end * v_end > v_start * v_start + 2.0 * a * remaining + scale_tol(v_end)) {
    throw std::invalid_argument("target speed not reachable within distance");
  }

  if (remaining <= 0.0) return plan;

  // Peak speed of the triangular profile, capped by the limit.
  double peak_sq = (2.0 * a * b * remaining + b * v_start * v_start + a * v_end * v_end) / (a + b);
  double peak = std::sqrt(std::max(0.0, peak_sq));
  peak = std::max({peak, v_start, v_end});
  peak = std::min(peak, std::max(limit, v_start));

  double s_acc = std::max(0.0, (peak * peak - v_start * v_start) / (2.0 * a));
  double s_brk = std::max(0.0, (peak * peak - v_end * v_end) / (2.0 * b));
  double s_cruise = remaining - s_acc - s_brk;
  if (s_cruise < 0.0) {
    // Rounding at the limit cap; fold the residue into the larger phase.
    if (s_acc >= s_brk)
      s_acc += s_cruise;
    else
      s_brk += s_cruise;
    s_cruise = 0.0;
  }

  push_phase(plan, v_start, peak, s_acc);
  push_phase(plan, peak, peak, s_cruise);
  push_phase(plan, peak, v_end, s_brk);
  return plan;
}

MotionState position_at(const MotionPlan& plan, double t) {
  if (t < 0.0) throw std::out_of_range("time before plan start");
  double offset = plan.origin;
  double velocity = plan.start_velocity;
  double elapsed = 0.0;
  for (const auto& p : plan.phases) {
    if (t <= elapsed + p.duration) {
      double dt = t - elapsed;
      return {offset + p.start_velocity * dt + 0.5 * p.acceleration * dt * dt, p.start_velocity + p.acceleration * dt};
    }
    elapsed += p.duration;
    offset += p.distance();
    velocity = p.end_velocity();
  }
  return {plan.origin + plan.distance, plan.phases.empty() ? velocity : plan.end_velocity};
}

MotionState position_at(const MotionPlan& plan, const Rational& t) {
  if (t > plan.grid_duration()) throw std::out_of_range("time after plan end");
  return position_at(plan, t.to_double());
}

MotionPlan replan_at(const MotionPlan& plan, const Rational& t, double new_target_speed, double new_distance,
                     double new_limit, const TrainProfile& profile) {
  MotionState state = position_at(plan, t);
  MotionPlan next = plan_segment(state.velocity, new_target_speed, new_distance, new_limit, profile);
  next.origin = state.offset;
  return next;
}

}  // namespace railtrace
