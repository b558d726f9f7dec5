#include "railtrace/fault_scripts.hpp"

#include <algorithm>
#include <random>

namespace railtrace {

namespace {

/// Route distance from the train's current position to `signal`, if the
/// signal lies ahead on its route and faces it.
std::optional<double> distance_ahead(const Scenario& sc, const TrainView& view, const PhysicalElement& signal) {
  const TrainSpec* spec = sc.find_train(view.id);
  if (!spec) return std::nullopt;
  double s = 0.0;
  for (const auto& id : spec->route) {
    const Edge* e = sc.graph.find_edge(id);
    if (!e) return std::nullopt;
    s += e->length;
    if (id == signal.facing && e->to == signal.node) {
      if (s + 1e-9 < view.position) return std::nullopt;
      return s - view.position;
    }
  }
  return std::nullopt;
}

bool in_approach_window(const World& world, const PhysicalElement& signal, double margin) {
  const Scenario& sc = world.scenario();
  for (const auto& view : world.simulation().trains()) {
    if (view.status == TrainStatus::Arrived) continue;
    auto d = distance_ahead(sc, view, signal);
    if (!d) continue;
    const TrainSpec* spec = sc.find_train(view.id);
    if (*d <= braking_distance(view.velocity, spec->brake) + margin) return true;
  }
  return false;
}

}  // namespace

std::vector<ScriptStep> random_fault_script(const Scenario& scenario, std::uint64_t seed,
                                            const FaultScriptOptions& options) {
  std::mt19937_64 rng(seed);
  std::vector<const PhysicalElement*> signals;
  for (const auto& el : scenario.graph.elements)
    if (has_signal_state(el.kind)) signals.push_back(&el);
  if (signals.empty() || options.max_faults == 0) return {};

  std::size_t count = std::uniform_int_distribution<std::size_t>(1, options.max_faults)(rng);
  std::vector<Rational> times;
  for (std::size_t i = 0; i < count; ++i)
    times.push_back(Rational::ceil_to_grid(std::uniform_real_distribution<double>(0.0, options.horizon_s)(rng)));
  std::sort(times.begin(), times.end());

  World world(scenario);
  std::vector<ScriptStep> script;
  for (const auto& t : times) {
    world.set_limit(t);
    world.run();
    std::vector<const PhysicalElement*> candidates;
    for (const auto* el : signals)
      if (!world.simulation().faulted(el->id) && !in_approach_window(world, *el, options.approach_margin_m))
        candidates.push_back(el);
    if (candidates.empty()) continue;
    const PhysicalElement* pick = candidates[std::uniform_int_distribution<std::size_t>(0, candidates.size() - 1)(rng)];
    nlohmann::json command = {{"type", "invoke"}, {"object", pick->id.value}, {"method", "breakSignal"}};
    world.apply(command);
    script.push_back({t, command});
  }
  return script;
}

}  // namespace railtrace
