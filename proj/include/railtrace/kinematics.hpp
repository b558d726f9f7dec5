#pragma once

#include <stdexcept>
#include <vector>

#include "railtrace/rational.hpp"

namespace railtrace {

constexpr double kmh_to_ms(double kmh) { return kmh / 3.6; }

struct TrainProfile {
  double v_max = kmh_to_ms(60.0);  // m/s
  double accel = 0.8;              // m/s^2
  double brake = 0.7;              // m/s^2
  double length = 0.0;             // m
};

/// Raised when the requested end speed cannot be reached by braking within
/// the distance (a braking-distance violation).
class InfeasiblePlan : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// One constant-acceleration phase.
struct MotionPhase {
  double duration = 0.0;  // s
  double start_velocity = 0.0;
  double acceleration = 0.0;

  double end_velocity() const { return start_velocity + acceleration * duration; }
  double distance() const { return start_velocity * duration + 0.5 * acceleration * duration * duration; }
};

/// Piecewise constant-acceleration motion over `distance` meters.
///
/// Phases carry real-valued durations so the kinematics stay exact; the
/// event-facing traversal time is `grid_duration()`, the real duration rounded
/// up to 1/8 s. Between the real end and the grid end the train holds the end
/// position.
struct MotionPlan {
  std::vector<MotionPhase> phases;
  double origin = 0.0;  // offset at the start of the plan, meters along the path
  double distance = 0.0;
  double start_velocity = 0.0;
  double end_velocity = 0.0;

  double duration() const;
  Rational grid_duration() const { return Rational::ceil_to_grid(duration()); }
};

struct MotionState {
  double offset = 0.0;
  double velocity = 0.0;
};

/// Accelerate-cruise-brake (or triangular) plan from `v0` reaching exactly
/// `v_end` after `distance`, never above `limit` once at or below it. A `v0`
/// above `limit` starts with a braking phase down to `limit`.
///
/// Throws InfeasiblePlan when v0^2 > v_end^2 + 2*brake*distance, and
/// std::invalid_argument for non-positive distance, v_end above limit, or an
/// end speed that acceleration cannot reach.
MotionPlan plan_segment(double v0, double v_end, double distance, double limit, const TrainProfile& profile);

/// Kinematic state `t` seconds into the plan. Throws std::out_of_range for t
/// outside [0, grid_duration].
MotionState position_at(const MotionPlan& plan, const Rational& t);
MotionState position_at(const MotionPlan& plan, double t);

/// Re-plans from the interpolated state at `t`. `new_distance` is measured
/// from that state.
MotionPlan replan_at(const MotionPlan& plan, const Rational& t, double new_target_speed, double new_distance,
                     double new_limit, const TrainProfile& profile);

/// v^2 / (2b)
inline double braking_distance(double v, double brake) { return v * v / (2.0 * brake); }

}  // namespace railtrace
