#pragma once

#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "railtrace/kernel.hpp"
#include "railtrace/scenario.hpp"

namespace railtrace {

/// Rejected interaction (unknown target, wrong element kind, bad argument).
class InteractionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct Obstacle {
  EdgeId edge;
  double offset = 0.0;
  friend bool operator==(const Obstacle&, const Obstacle&) = default;
};

enum class TrainStatus { Scheduled, Standing, Moving, Arrived };
std::string_view to_string(TrainStatus status);

struct TrainView {
  TrainId id;
  TrainStatus status = TrainStatus::Scheduled;
  EdgeId edge;
  double edge_offset = 0.0;
  double position = 0.0;  // along the route
  double velocity = 0.0;
  bool ato = false;
  bool halt_ordered = false;
  std::optional<double> detected_obstacle;  // route position
  std::vector<ElementId> orders;            // signals the train may pass at halt
};

/// A scenario instantiated on a kernel: signals, stations, trains and the
/// dispatchers created by faults.
///
/// NEW events for every declaration are emitted at construction. Interactions
/// (faults, orders, obstacles) must only be applied between runs; they emit
/// their events at the current clock value and take effect in the next run.
class Simulation {
 public:
  explicit Simulation(Scenario scenario, KernelOptions options = {});
  ~Simulation();
  Simulation(const Simulation&) = delete;
  Simulation& operator=(const Simulation&) = delete;

  const Scenario& scenario() const;
  Kernel& kernel();
  const Kernel& kernel() const;
  const Rational& now() const;
  const std::vector<SimEvent>& events() const;

  /// Runs to the limit and returns the events of this run.
  std::vector<SimEvent> step_until(const Rational& limit);
  std::vector<SimEvent> run_to_completion();

  void inject_fault(const ElementId& signal);
  void give_order(const TrainId& train, const ElementId& signal, bool drive_on_sight);
  void resume_normal(const TrainId& train);
  void halt_order(const TrainId& train);
  void set_obstacle(const EdgeId& edge, double offset, bool present);

  /// Live infrastructure (element states change during the run).
  const InfrastructureGraph& graph() const;
  bool faulted(const ElementId& element) const;
  std::vector<Obstacle> obstacles() const;
  std::vector<TrainView> trains() const;
  std::optional<TrainView> train(const TrainId& id) const;
  std::optional<TrainId> block_occupant(const StationId& station, std::size_t block) const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace railtrace
