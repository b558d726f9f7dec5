#pragma once

#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "railtrace/simulation.hpp"

namespace railtrace {

class ControlError : public std::runtime_error {
 public:
  enum class Kind { NotFound, BadRequest, Busy };
  ControlError(Kind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

std::string_view to_string(ControlError::Kind kind);

struct MethodParameter {
  std::string name;
  std::string type;  // string | number | boolean | ElementId | OrderKind
  bool required = true;
};

struct ExposedMethod {
  std::string name;
  std::vector<MethodParameter> parameters;
  std::vector<std::string> anchors;
};

/// Interactions an object exposes; empty for objects without any. Throws
/// ControlError(NotFound) for unknown ids.
std::vector<ExposedMethod> exposed_methods(const Scenario& scenario, const std::string& id);
nlohmann::json to_json(const ExposedMethod& method);

/// One entry of an interaction script: run to `at`, then apply `command`.
struct ScriptStep {
  Rational at;
  nlohmann::json command;  // {"type":"invoke","object":..,"method":..,"args":{..}}
};

/// Throws ControlError(BadRequest) for malformed entries or decreasing `at`.
std::vector<ScriptStep> parse_script(const nlohmann::json& j);
std::vector<ScriptStep> load_script(const std::filesystem::path& path);
nlohmann::json script_to_json(const std::vector<ScriptStep>& steps);

/// The instantiated world behind the control service: object queries,
/// invocations and clock control. Not thread-safe; the HTTP layer serializes
/// access.
class World {
 public:
  explicit World(Scenario scenario, KernelOptions options = {});

  Simulation& simulation() { return sim_; }
  const Simulation& simulation() const { return sim_; }
  const Scenario& scenario() const { return sim_.scenario(); }
  const std::vector<SimEvent>& events() const { return sim_.events(); }

  nlohmann::json list_objects() const;
  nlohmann::json object(const std::string& id) const;

  /// Applies an exposed method; returns {"object","method","events":[indices]}.
  nlohmann::json invoke(const std::string& id, const std::string& method, const nlohmann::json& args);
  /// Applies a script command.
  nlohmann::json apply(const nlohmann::json& command);

  const Rational& limit() const { return limit_; }
  void set_limit(const Rational& t);
  void run();
  void run_to_completion();
  bool finished() const { return finished_; }
  nlohmann::json clock_json() const;

 private:
  Simulation sim_;
  Rational limit_;
  bool finished_ = false;
};

/// Headless run: each step runs to its `at` and applies its command; then the
/// run continues to `until`, or until every process has terminated.
std::vector<SimEvent> run_batch(const Scenario& scenario, const std::vector<ScriptStep>& script,
                                const std::optional<Rational>& until, KernelOptions options = {});

}  // namespace railtrace
