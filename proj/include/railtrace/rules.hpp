#pragma once

#include <string>
#include <vector>

#include "railtrace/ids.hpp"
#include "railtrace/trace.hpp"

namespace railtrace::rules {

inline const RuleId signal_halt_approach{"rule.signal.halt-approach"};
inline const RuleId signal_proceed{"rule.signal.proceed"};
inline const RuleId signal_slow{"rule.signal.slow"};
inline const RuleId zs10_area_end{"rule.zs10.area-end"};
inline const RuleId block_occupy{"rule.block.occupy"};
inline const RuleId block_release{"rule.block.release"};
inline const RuleId station_signal_control{"rule.station.signal-control"};
inline const RuleId fault_inject{"rule.fault.inject"};
inline const RuleId dispatcher_depart_past_halt{"rule.dispatcher.depart-past-halt"};
inline const RuleId dispatcher_drive_on_sight{"rule.dispatcher.drive-on-sight"};
inline const RuleId ato_obstacle{"rule.ato.obstacle"};
inline const RuleId train_departure{"rule.train.departure"};
inline const RuleId train_arrival{"rule.train.arrival"};
inline const RuleId train_halt_order{"rule.train.halt-order"};
inline const RuleId train_braking_violation{"rule.train.braking-violation"};
inline const RuleId kernel_clock{"rule.kernel.clock"};

/// Every rule handler with its document and concept references, in id order.
const std::vector<RuleRegistration>& table();

/// Direct anchors of a rule; these are attached to the MSG events the rule
/// emits. Throws std::out_of_range for unknown rules.
const std::vector<std::string>& anchors(const RuleId& rule);

void register_all(TraceRegistry& registry);

/// Registry over the given documents and matrix with every rule registered.
TraceRegistry make_registry(DocumentIndex index, TraceMatrix matrix);

}  // namespace railtrace::rules
