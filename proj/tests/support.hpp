#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "railtrace/control.hpp"
#include "railtrace/log_oracle.hpp"
#include "railtrace/rules.hpp"
#include "railtrace/scenario.hpp"

#ifndef RAILTRACE_SOURCE_DIR
#define RAILTRACE_SOURCE_DIR "."
#endif

namespace railtrace::fixtures {

inline std::filesystem::path source_path(const std::string& relative) {
  return std::filesystem::path(RAILTRACE_SOURCE_DIR) / relative;
}

inline Scenario fixture(const std::string& name) { return load_scenario(source_path("scenarios/" + name + ".json")); }

inline std::vector<ScriptStep> fixture_script(const std::string& name) {
  return load_script(source_path("scenarios/" + name + ".script.json"));
}

inline TraceRegistry fixture_registry() {
  DocumentIndex index = DocumentIndex::load(source_path("data/documents.json"));
  TraceMatrix matrix = TraceMatrix::load(source_path("data/tracematrix.csv"), index);
  return rules::make_registry(std::move(index), std::move(matrix));
}

/// The fixture runs used throughout the suites: scenario, script.
struct FixtureRun {
  std::string label;
  std::string scenario;
  std::optional<std::string> script;
};

inline std::vector<FixtureRun> fixture_runs() {
  return {{"station-entry", "station_entry", "station_entry"},
          {"ato-obstacle late clear", "ato_obstacle", "ato_obstacle_late_clear"},
          {"ato-obstacle early clear", "ato_obstacle", "ato_obstacle_early_clear"},
          {"tunnel-branch", "tunnel_branch", std::nullopt},
          {"tunnel-branch fault", "tunnel_branch", "tunnel_branch_fault"},
          {"tunnel-branch new rule fault", "tunnel_branch_new_rule", "tunnel_branch_fault"}};
}

inline std::vector<SimEvent> run_fixture(const FixtureRun& run) {
  std::vector<ScriptStep> script;
  if (run.script) script = fixture_script(*run.script);
  return run_batch(fixture(run.scenario), script, std::nullopt);
}

}  // namespace railtrace::fixtures
