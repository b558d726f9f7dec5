#pragma once

#include <cstdint>
#include <vector>

#include "railtrace/control.hpp"

namespace railtrace {

struct FaultScriptOptions {
  std::size_t max_faults = 3;
  /// Faults are placed in [0, horizon] seconds.
  double horizon_s = 600.0;
  /// Extra distance beyond the braking distance that counts as approaching.
  double approach_margin_m = 50.0;
};

/// Random breakSignal script for robustness runs. A fault is only placed on a
/// signal when no train is inside its approach window, i.e. closer to the
/// signal than its braking distance plus the margin.
std::vector<ScriptStep> random_fault_script(const Scenario& scenario, std::uint64_t seed,
                                            const FaultScriptOptions& options = {});

}  // namespace railtrace
