#include "railtrace/rules.hpp"

#include <algorithm>
#include <stdexcept>

namespace railtrace::rules {

namespace {

std::vector<RuleRegistration> build_table() {
  std::vector<RuleRegistration> t = {
      {signal_halt_approach, {"MainSignal", "PreSignal"}, {"ril301-hv-hp0", "ril408-0301"},
       "brake to stand at a main signal expected to show halt"},
      {signal_proceed, {"MainSignal"}, {"ril301-hv-hp1"}, "pass a main signal showing proceed"},
      {signal_slow, {"SlowAspect"}, {"ril301-hv-hp2"}, "speed restriction from a signal showing slow"},
      {zs10_area_end, {"Zs10"}, {"ril301-zs10"}, "end of a speed restriction area"},
      {block_occupy, {"Block", "PointOfDanger"}, {"ilk-block"}, "train entering a block occupies it"},
      {block_release, {"PointOfDanger"}, {"ilk-axle-counter"},
       "block released once the rear clears its last point of danger"},
      {station_signal_control, {"Station", "LogicalElement"}, {"ilk-station"},
       "stations switch all members of a logical signal together"},
      {fault_inject, {"Fault"}, {"ril408-0611"}, "a broken signal shows no valid aspect"},
      {dispatcher_depart_past_halt, {"Zs1"}, {"ril408-0615-s2"},
       "dispatcher order to pass a faulted signal after the handling delay"},
      {dispatcher_drive_on_sight, {"DriveOnSight"}, {"ril408-0615-s3"},
       "first train after a fault drives on sight to the next main signal"},
      {ato_obstacle, {"ATO"}, {"ato-goa4-obstacle", "ril408-0301"},
       "automatic operation halts before obstacles and resumes only on proceed"},
      {train_departure, {"TrainOperation"}, {"ril408-0301"}, "departure from standstill"},
      {train_arrival, {"TrainOperation"}, {"ril408-0301"}, "arrival at the end of the route"},
      {train_halt_order, {"TrainOperation"}, {"ril408-0301"}, "halt and resume orders"},
      {train_braking_violation, {"Braking"}, {"brk-distance"},
       "emergency braking when a stop cannot be made in time"},
      {kernel_clock, {}, {}, "symbolic clock and scheduler", true},
  };
  std::sort(t.begin(), t.end(), [](const auto& a, const auto& b) { return a.rule < b.rule; });
  return t;
}

}  // namespace

const std::vector<RuleRegistration>& table() {
  static const std::vector<RuleRegistration> t = build_table();
  return t;
}

const std::vector<std::string>& anchors(const RuleId& rule) {
  for (const auto& r : table())
    if (r.rule == rule) return r.anchors;
  throw std::out_of_range("unknown rule " + rule.value);
}

void register_all(TraceRegistry& registry) {
  for (const auto& r : table()) registry.register_rule(r);
}

TraceRegistry make_registry(DocumentIndex index, TraceMatrix matrix) {
  TraceRegistry registry(std::move(index), std::move(matrix));
  register_all(registry);
  return registry;
}

}  // namespace railtrace::rules
