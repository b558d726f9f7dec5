#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "railtrace/rational.hpp"

namespace railtrace {

// `.zug` event log. One event per line:
//
//   KIND;SUBJECT;PAYLOAD;NUM/DEN
//
//   CH   payload: new state name
//   MV   payload: NODEID:VEL_MM_S
//   MSG  payload: text@anchor1@anchor2...
//   NEW  payload: KIND:NODEID
//
// Text fields are percent-encoded (uppercase hex) for ';', '@', '%', LF
// and CR and for nothing else, so parse and serialize are mutually inverse.

enum class EventKind { CH, MV, MSG, NEW };

std::string_view to_string(EventKind kind);

struct StateChange {
  std::string state;
  friend bool operator==(const StateChange&, const StateChange&) = default;
};
struct Movement {
  std::string node;
  std::int64_t velocity_mm_s = 0;
  friend bool operator==(const Movement&, const Movement&) = default;
};
struct Message {
  std::string text;
  std::vector<std::string> anchors;
  friend bool operator==(const Message&, const Message&) = default;
};
struct Creation {
  std::string kind;
  std::string node;
  friend bool operator==(const Creation&, const Creation&) = default;
};

using EventPayload = std::variant<StateChange, Movement, Message, Creation>;

struct SimEvent {
  std::string subject;
  EventPayload payload;
  Rational time;

  EventKind kind() const { return static_cast<EventKind>(payload.index()); }
  friend bool operator==(const SimEvent&, const SimEvent&) = default;
};

class LogParseError : public std::runtime_error {
 public:
  LogParseError(std::size_t line, std::size_t column, const std::string& what)
      : std::runtime_error("line " + std::to_string(line) + ", column " + std::to_string(column) + ": " + what),
        line_(line),
        column_(column) {}
  std::size_t line() const { return line_; }
  std::size_t column() const { return column_; }

 private:
  std::size_t line_;
  std::size_t column_;
};

std::string percent_encode(std::string_view text);
/// Throws std::invalid_argument with the offending offset in the message.
std::string percent_decode(std::string_view text);

/// Line without the trailing newline. Throws std::invalid_argument for a NEW
/// kind containing ':'.
std::string serialize(const SimEvent& event);
SimEvent parse_event(std::string_view line, std::size_t line_number = 1);

/// Whole log, one line per event, each terminated by LF.
std::string serialize_log(const std::vector<SimEvent>& events);
/// Parses a complete log text; validates nondecreasing timestamps.
std::vector<SimEvent> parse_log(std::string_view text);
std::vector<SimEvent> parse_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, const std::vector<SimEvent>& events);

inline std::int64_t to_mm_s(double v) { return static_cast<std::int64_t>(v * 1000.0 + 0.5); }

}  // namespace railtrace
