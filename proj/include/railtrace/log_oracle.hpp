#pragma once

#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "railtrace/eventlog.hpp"
#include "railtrace/scenario.hpp"

namespace railtrace {

// Safety checks over an event log, using only the scenario declarations and
// the logged events (no simulator state).

struct SafetyFinding {
  std::string kind;  // spad | block-co-occupancy | clock | unknown-subject
  std::string subject;
  std::size_t event_index = 0;
  Rational time;
  std::string detail;
};

struct SafetyReport {
  std::vector<SafetyFinding> findings;
  std::size_t violation_messages = 0;  // MSG events starting with "violation"
  std::size_t crossings = 0;           // main signal crossings examined

  bool ok() const { return findings.empty() && violation_messages == 0; }
  nlohmann::json to_json() const;
  std::string to_text() const;
};

SafetyReport check_log(const Scenario& scenario, const std::vector<SimEvent>& events);

/// `key=value` tokens of an MSG text, in order; bare words are returned with
/// an empty value.
std::vector<std::pair<std::string, std::string>> message_fields(const std::string& text);

}  // namespace railtrace
