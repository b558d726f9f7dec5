#include <cstdlib>
#include <fstream>
#include <iostream>
#include <map>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "railtrace/control.hpp"
#include "railtrace/http_api.hpp"
#include "railtrace/log_oracle.hpp"
#include "railtrace/rules.hpp"
#include "railtrace/scenario.hpp"

#ifndef RAILTRACE_DATA_DIR
#define RAILTRACE_DATA_DIR "data"
#endif

namespace {

using namespace railtrace;
using nlohmann::json;

enum Exit { kOk = 0, kError = 1, kUnsafe = 2, kUncovered = 3 };

std::string default_data(const std::string& file) {
  if (const char* dir = std::getenv("RAILTRACE_DATA")) return std::string(dir) + "/" + file;
  return std::string(RAILTRACE_DATA_DIR) + "/" + file;
}

/// `N/D`, or a whole number of seconds.
Rational parse_clock(const std::string& text) {
  if (text.find('/') != std::string::npos) return Rational::parse(text);
  return Rational::parse(text + "/1");
}

struct TraceInputs {
  std::string documents = default_data("documents.json");
  std::string matrix = default_data("tracematrix.csv");
  std::string scenario;

  void add_options(CLI::App* app) {
    app->add_option("--documents", documents, "document index (JSON)");
    app->add_option("--matrix", matrix, "concept/anchor matrix (CSV)");
  }

  TraceRegistry load() const {
    DocumentIndex index = DocumentIndex::load(documents);
    TraceMatrix m = TraceMatrix::load(matrix, index);
    TraceRegistry registry = rules::make_registry(std::move(index), std::move(m));
    if (!scenario.empty()) register_scenario(registry, load_scenario(scenario));
    return registry;
  }
};

Scenario load_with_overrides(const std::string& path, const std::vector<std::string>& overrides) {
  Scenario sc = load_scenario(path);
  for (const auto& kv : overrides) {
    auto eq = kv.find('=');
    if (eq == std::string::npos) throw ScenarioError("--set", "expected key=value, got '" + kv + "'");
    json value;
    try {
      value = json::parse(kv.substr(eq + 1));
    } catch (const json::parse_error&) {
      value = kv.substr(eq + 1);
    }
    sc.config.set(kv.substr(0, eq), value);
  }
  return sc;
}

KernelOptions kernel_options(const std::optional<std::uint64_t>& seed) {
  KernelOptions o;
  o.shuffle_seed = seed;
  return o;
}

int cmd_run(const std::string& scenario_path, const std::optional<std::string>& script_path,
            const std::optional<std::string>& until_text, const std::optional<std::string>& out_path,
            const std::vector<std::string>& overrides, const std::optional<std::uint64_t>& seed) {
  Scenario sc;
  std::vector<ScriptStep> script;
  std::optional<Rational> until;
  try {
    sc = load_with_overrides(scenario_path, overrides);
    if (script_path) script = load_script(*script_path);
    if (until_text) until = parse_clock(*until_text);
  } catch (const ScenarioError& e) {
    std::cerr << "error: " << scenario_path << ": " << e.path() << ": " << e.what() << "\n";
    return kError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kError;
  }

  std::vector<SimEvent> events;
  try {
    events = run_batch(sc, script, until, kernel_options(seed));
  } catch (const ControlError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kError;
  } catch (const DeadlockError& e) {
    std::cerr << "error: deadlock: " << e.what() << "\n";
    return kError;
  }

  std::string text = serialize_log(events);
  if (out_path) {
    std::ofstream out(*out_path, std::ios::binary | std::ios::trunc);
    if (!out) {
      std::cerr << "error: cannot write " << *out_path << "\n";
      return kError;
    }
    out << text;
  } else {
    std::cout << text;
  }
  SafetyReport safety = check_log(sc, events);
  std::cerr << safety.to_text();
  return safety.ok() ? kOk : kUnsafe;
}

int cmd_replay(const std::string& path) {
  std::vector<SimEvent> events;
  try {
    events = parse_file(path);
  } catch (const LogParseError& e) {
    std::cerr << "error: " << path << ": " << e.what() << "\n";
    return kError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kError;
  }
  std::map<std::string, std::size_t> by_kind = {{"CH", 0}, {"MV", 0}, {"MSG", 0}, {"NEW", 0}};
  std::map<std::string, const SimEvent*> last_mv;
  std::vector<std::string> order;
  for (const auto& e : events) {
    ++by_kind[std::string(to_string(e.kind()))];
    if (e.kind() == EventKind::MV) {
      if (!last_mv.count(e.subject)) order.push_back(e.subject);
      last_mv[e.subject] = &e;
    }
  }
  std::cout << "events: " << events.size() << " (CH " << by_kind["CH"] << ", MV " << by_kind["MV"] << ", MSG "
            << by_kind["MSG"] << ", NEW " << by_kind["NEW"] << ")\n";
  if (!events.empty())
    std::cout << "first: " << events.front().time.to_string() << "\nlast: " << events.back().time.to_string() << "\n";
  std::cout << "arrivals:\n";
  for (const auto& train : order) {
    const SimEvent& e = *last_mv[train];
    const auto& mv = std::get<Movement>(e.payload);
    char secs[32];
    std::snprintf(secs, sizeof secs, "%.3f", e.time.to_double());
    std::cout << "  " << train << " " << mv.node << " " << e.time.to_string() << " (" << secs << " s)\n";
  }
  return kOk;
}

int cmd_validate(const std::string& path, const TraceInputs& trace, bool with_trace) {
  int rc = kOk;
  try {
    Scenario sc = scenario_from_json(json::parse(std::ifstream(path)));
    auto report = validate_scenario(sc);
    for (const auto& v : report) std::cout << path << ": " << v.code << " " << v.subject << ": " << v.message << "\n";
    if (!report.empty()) rc = kError;
  } catch (const ScenarioError& e) {
    std::cout << path << ": " << e.path() << ": " << e.what() << "\n";
    rc = kError;
  } catch (const std::exception& e) {
    std::cout << path << ": " << e.what() << "\n";
    rc = kError;
  }
  if (with_trace) {
    try {
      trace.load();
    } catch (const std::exception& e) {
      std::cout << e.what() << "\n";
      rc = kError;
    }
  }
  if (rc == kOk) std::cout << path << ": ok\n";
  return rc;
}

int cmd_trace(const std::string& what, const std::string& id, const TraceInputs& inputs, bool as_json) {
  TraceRegistry registry;
  try {
    registry = inputs.load();
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kError;
  }
  if (what == "coverage") {
    CoverageReport report = registry.coverage_report();
    std::cout << (as_json ? report.to_json().dump(2) + "\n" : report.to_text());
    return report.uncovered_anchors.empty() ? kOk : kUncovered;
  }
  try {
    json out = what == "concept"  ? concept_query(registry, id)
               : what == "anchor" ? anchor_query(registry, id)
                                  : rule_query(registry, RuleId(id));
    if (as_json) {
      std::cout << out.dump(2) << "\n";
    } else if (what == "concept") {
      for (const auto& a : out["anchors"])
        std::cout << a["id"].get<std::string>() << "\t" << a["document"].get<std::string>() << "\t"
                  << a["title"].get<std::string>() << "\n";
    } else if (what == "anchor") {
      for (const auto& r : out["rules"]) std::cout << "rule\t" << r.get<std::string>() << "\n";
      for (const auto& s : out["sites"])
        std::cout << "site\t" << s["element"].get<std::string>() << "\tline " << s["line"].get<int>() << "\n";
    } else {
      for (const auto& a : out["anchors"]) std::cout << a["id"].get<std::string>() << "\n";
      for (const auto& w : out["warnings"]) std::cerr << "warning: " << w.get<std::string>() << "\n";
    }
  } catch (const TraceError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kError;
  }
  return kOk;
}

int cmd_serve(const std::string& scenario_path, ServerOptions options, const TraceInputs& inputs) {
  Scenario sc;
  TraceRegistry registry;
  try {
    sc = load_scenario(scenario_path);
    registry = inputs.load();
  } catch (const ScenarioError& e) {
    std::cerr << "error: " << scenario_path << ": " << e.path() << ": " << e.what() << "\n";
    return kError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kError;
  }
  try {
    ControlServer server(std::move(sc), std::move(registry), options);
    int port = server.bind();
    std::cerr << "serving " << scenario_path << " on http://" << options.bind << ":" << port << "\n";
    server.listen();
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kError;
  }
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"railway operations simulator with requirement tracing"};
  app.require_subcommand(1);

  std::string scenario_path;
  std::optional<std::string> script_path, until_text, out_path;
  std::vector<std::string> overrides;
  std::optional<std::uint64_t> seed;
  auto* run = app.add_subcommand("run", "run a scenario headless and write the .zug log");
  run->add_option("scenario", scenario_path, "scenario JSON")->required();
  run->add_option("--script", script_path, "interaction script JSON");
  run->add_option("--until", until_text, "clock limit N/D or whole seconds (default: run to completion)");
  run->add_option("--out", out_path, ".zug output (default: stdout)");
  run->add_option("--set", overrides, "config override key=value");
  run->add_option("--seed", seed, "randomized scheduling (robustness testing, not deterministic)");

  std::string zug_path;
  auto* replay = app.add_subcommand("replay", "validate a .zug log and summarize it");
  replay->add_option("log", zug_path, ".zug file")->required();

  ServerOptions server_options;
  TraceInputs serve_trace;
  auto* serve = app.add_subcommand("serve", "host the control API for a scenario");
  serve->add_option("scenario", scenario_path, "scenario JSON")->required();
  serve->add_option("--port", server_options.port, "TCP port")->envname("RAILTRACE_PORT");
  serve->add_option("--bind", server_options.bind, "bind address")->envname("RAILTRACE_BIND");
  serve->add_option("--seed", seed, "randomized scheduling (robustness testing, not deterministic)");
  serve_trace.add_options(serve);

  TraceInputs validate_trace;
  bool validate_with_trace = false;
  auto* validate = app.add_subcommand("validate", "check a scenario (and optionally the trace inputs)");
  validate->add_option("scenario", scenario_path, "scenario JSON")->required();
  validate->add_flag("--trace", validate_with_trace, "also load the document index and matrix");
  validate_trace.add_options(validate);

  TraceInputs trace_inputs;
  bool as_json = false;
  std::string trace_id;
  auto* trace = app.add_subcommand("trace", "requirement trace queries");
  trace->require_subcommand(1);
  trace_inputs.add_options(trace);
  trace->add_option("--scenario", trace_inputs.scenario, "scenario whose element tags and creation sites to include");
  trace->add_flag("--json", as_json, "JSON output");
  std::string trace_what;
  for (const std::string what : {"concept", "anchor", "rule"}) {
    auto* sub = trace->add_subcommand(what, std::string(what == "anchor" ? "trace an " : "trace a ") + what);
    sub->add_option("id", trace_id, what + " id")->required();
    sub->fallthrough();
    sub->callback([&trace_what, what] { trace_what = what; });
  }
  auto* coverage = trace->add_subcommand("coverage", "coverage report; exit 3 if an anchor has no link");
  coverage->fallthrough();
  coverage->callback([&trace_what] { trace_what = "coverage"; });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kOk : kError;
  }

  if (run->parsed()) return cmd_run(scenario_path, script_path, until_text, out_path, overrides, seed);
  if (replay->parsed()) return cmd_replay(zug_path);
  if (serve->parsed()) {
    server_options.kernel = kernel_options(seed);
    return cmd_serve(scenario_path, server_options, serve_trace);
  }
  if (validate->parsed()) return cmd_validate(scenario_path, validate_trace, validate_with_trace);
  if (trace->parsed()) return cmd_trace(trace_what, trace_id, trace_inputs, as_json);
  return kError;
}
