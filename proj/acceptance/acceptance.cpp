// Acceptance suite: one PASS/FAIL line per criterion; exit status 1 if any
// criterion fails.

#include <arpa/inet.h>
#include <netinet/in.h>
#include <sys/socket.h>
#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <csignal>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <thread>

#include <httplib.h>

#include "railtrace/control.hpp"
#include "railtrace/eventlog.hpp"
#include "railtrace/fault_scripts.hpp"
#include "railtrace/http_api.hpp"
#include "railtrace/kernel.hpp"
#include "railtrace/kinematics.hpp"
#include "railtrace/log_oracle.hpp"
#include "railtrace/rules.hpp"
#include "railtrace/scenario.hpp"

using namespace railtrace;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

class Failed : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

void check(bool ok, const std::string& what) {
  if (!ok) throw Failed(what);
}

fs::path source(const std::string& rel) { return fs::path(RAILTRACE_SOURCE_DIR) / rel; }

fs::path scratch(const std::string& name) {
  fs::path dir = fs::temp_directory_path() / "railtrace_acceptance";
  fs::create_directories(dir);
  return dir / name;
}

std::string read(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

int shell(const std::string& cmd) {
  int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string cli() { return std::string("\"") + RAILTRACE_CLI + "\""; }

struct Run {
  std::string label;
  std::string scenario;
  std::string script;  // empty: none
};

const std::vector<Run>& fixture_runs() {
  static const std::vector<Run> runs = {{"station-entry", "station_entry", "station_entry"},
                                        {"ato-obstacle late clear", "ato_obstacle", "ato_obstacle_late_clear"},
                                        {"ato-obstacle early clear", "ato_obstacle", "ato_obstacle_early_clear"},
                                        {"tunnel-branch", "tunnel_branch", ""},
                                        {"tunnel-branch fault", "tunnel_branch", "tunnel_branch_fault"},
                                        {"tunnel-branch new rule", "tunnel_branch_new_rule", "tunnel_branch_fault"}};
  return runs;
}

std::string scenario_file(const Run& r) { return source("scenarios/" + r.scenario + ".json").string(); }
std::string script_file(const Run& r) { return source("scenarios/" + r.script + ".script.json").string(); }

std::vector<SimEvent> batch(const Run& r) {
  std::vector<ScriptStep> script;
  if (!r.script.empty()) script = load_script(script_file(r));
  return run_batch(load_scenario(scenario_file(r)), script, std::nullopt);
}

std::string run_args(const Run& r) {
  std::string args = "run \"" + scenario_file(r) + "\"";
  if (!r.script.empty()) args += " --script \"" + script_file(r) + "\"";
  return args;
}

// --- criteria ------------------------------------------------------------------

void determinism() {
  for (const auto& r : fixture_runs()) {
    std::string out[2];
    for (int i = 0; i < 2; ++i) {
      fs::path log = scratch("det" + std::to_string(i) + ".zug");
      auto start = Clock::now();
      int rc = shell(cli() + " " + run_args(r) + " --out \"" + log.string() + "\" 2>/dev/null");
      double secs = std::chrono::duration<double>(Clock::now() - start).count();
      check(rc == 0, r.label + ": run exited " + std::to_string(rc));
      check(secs < 5.0, r.label + ": run took " + std::to_string(secs) + " s");
      out[i] = read(log);
    }
    check(!out[0].empty() && out[0] == out[1], r.label + ": logs differ");
  }
}

std::string random_text(std::mt19937_64& rng, std::size_t max_len, bool allow_empty, bool allow_colon = true) {
  static const std::string alphabet = "abXY09:._-<>()/=,#!\"\\\t;@% \n\r\xc3\xa4";
  std::size_t len = std::uniform_int_distribution<std::size_t>(allow_empty ? 0 : 1, max_len)(rng);
  std::string s;
  for (std::size_t i = 0; i < len; ++i) {
    char c = alphabet[rng() % alphabet.size()];
    if (c == ':' && !allow_colon) c = '.';
    s += c;
  }
  return s;
}

void eventlog_round_trip() {
  std::mt19937_64 rng(4242);
  for (int i = 0; i < 10000; ++i) {
    SimEvent e;
    e.subject = random_text(rng, 20, true);
    e.time = Rational(static_cast<std::int64_t>(rng() % 100'000'000), static_cast<std::int64_t>(1 + rng() % 1024));
    switch (rng() % 4) {
      case 0:
        e.payload = StateChange{random_text(rng, 10, true)};
        break;
      case 1:
        e.payload = Movement{random_text(rng, 10, true), static_cast<std::int64_t>(rng() >> 2)};
        break;
      case 2: {
        Message m{random_text(rng, 40, true), {}};
        for (int k = rng() % 3; k > 0; --k) m.anchors.push_back(random_text(rng, 10, false));
        e.payload = m;
        break;
      }
      default:
        e.payload = Creation{random_text(rng, 10, true, false), random_text(rng, 10, true)};
    }
    std::string line = serialize(e);
    SimEvent back = parse_event(line);
    check(back == e, "parse(serialize(e)) != e for " + line);
    check(serialize(back) == line, "re-serialization differs for " + line);
  }
  SimEvent lit = parse_event("CH;TrackElements.HauptSignalImpl:<0.581.0>;FAHRT;459/8");
  check(lit.time == Rational(459, 8), "literal line time");
  check(std::get<StateChange>(lit.payload).state == "FAHRT", "literal line state");
  check(serialize(lit) == "CH;TrackElements.HauptSignalImpl:<0.581.0>;FAHRT;459/8", "literal line re-serialization");
}

void clock_semantics() {
  {
    Kernel k;
    k.spawn([] { return WaitCondition{DurationWait{Rational(5), Rational(9)}}; });
    k.spawn([] { return WaitCondition{DurationWait{Rational(3), Rational(4)}}; });
    k.run_until_quiescent();
    check(k.advance_clock().now == Rational(3), "advance to min earliest");
  }
  {
    Kernel k;
    k.spawn([] { return wait_for(Rational(10)); });
    k.set_clock_limit(Rational(4));
    k.run_until_quiescent();
    AdvanceResult r = k.advance_clock();
    check(r.blocked && r.now == Rational(4), "limit blocks the clock");
  }
  {
    Kernel k;
    k.spawn([] { return wait_until([] { return false; }); });
    k.run_until_quiescent();
    bool deadlock = false;
    try {
      k.advance_clock();
    } catch (const DeadlockError&) {
      deadlock = true;
    }
    check(deadlock, "deadlock detected");
  }
  for (const auto& r : fixture_runs()) {
    auto events = batch(r);
    for (std::size_t i = 1; i < events.size(); ++i)
      check(events[i - 1].time <= events[i].time, r.label + ": clock decreases at event " + std::to_string(i));
  }
}

void kinematics() {
  std::mt19937_64 rng(1234);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  int cases = 0;
  while (cases < 1000) {
    double a = 0.2 + 1.3 * u(rng), b = 0.2 + 1.3 * u(rng);
    double limit = (10 + 150 * u(rng)) / 3.6;
    double d = 0.5 + 4000 * u(rng);
    double v0 = limit * u(rng), ve = limit * u(rng);
    if (v0 * v0 > ve * ve + 2 * b * d || ve * ve > v0 * v0 + 2 * a * d) continue;
    ++cases;
    // Independent closed form.
    double peak = std::sqrt((2 * a * b * d + b * v0 * v0 + a * ve * ve) / (a + b));
    double vp = std::min(peak, limit);
    double acc_d = (vp * vp - v0 * v0) / (2 * a);
    double brk_d = (vp * vp - ve * ve) / (2 * b);
    double cruise_d = d - acc_d - brk_d;
    double t = (vp - v0) / a + (vp - ve) / b + (cruise_d > 0 ? cruise_d / vp : 0.0);
    if (peak <= limit) cruise_d = 0;

    MotionPlan plan = plan_segment(v0, ve, d, limit, TrainProfile{limit, a, b, 0});
    double pa = 0, pc = 0, pb = 0;
    for (const auto& p : plan.phases)
      (p.acceleration > 0 ? pa : p.acceleration < 0 ? pb : pc) += p.distance();
    auto close = [](double x, double y, double scale) { return std::abs(x - y) <= 1e-9 * scale; };
    check(close(plan.duration(), t, t), "total time differs (case " + std::to_string(cases) + ")");
    check(close(pa, acc_d, d) && close(pc, cruise_d, d) && close(pb, brk_d, d),
          "phase distances differ (case " + std::to_string(cases) + ")");
  }
  MotionPlan plan = plan_segment(0, 0, 1000, 60 / 3.6, TrainProfile{60 / 3.6, 0.8, 0.7, 0});
  double total = plan.grid_duration().to_double();
  check(std::abs(total - 82.3) <= 0.2, "1000 m case took " + std::to_string(total) + " s");
}

void safety() {
  for (const auto& r : fixture_runs()) {
    auto report = check_log(load_scenario(scenario_file(r)), batch(r));
    check(report.ok(), r.label + ": " + report.to_text());
  }
  const std::vector<std::string> scenarios = {"tunnel_branch", "tunnel_branch_new_rule", "station_entry", "ato_obstacle"};
  std::size_t faults = 0;
  for (int i = 0; i < 50; ++i) {
    const std::string& name = scenarios[i % scenarios.size()];
    Scenario sc = load_scenario(source("scenarios/" + name + ".json"));
    auto script = random_fault_script(sc, 1000 + i);
    faults += script.size();
    auto report = check_log(sc, run_batch(sc, script, std::nullopt));
    check(report.ok(), name + " random script " + std::to_string(i) + ": " + script_to_json(script).dump() + "\n" +
                           report.to_text());
  }
  check(faults >= 50, "random scripts injected only " + std::to_string(faults) + " faults");
}

bool msg_starts(const SimEvent& e, const std::string& prefix) {
  const auto* m = std::get_if<Message>(&e.payload);
  return m && m->text.rfind(prefix, 0) == 0;
}

/// Replays the log tracking obstacle presence and the aspect of the signal
/// ahead; the first departure of the train after its obstacle halt must happen
/// with the obstacle gone and the signal showing proceed.
struct AtoTrace {
  bool halted = false;
  bool departed_after_halt = false;
  bool cleared_while_halt_aspect = false;
};

AtoTrace ato_predicates(const std::vector<SimEvent>& log) {
  AtoTrace t;
  bool obstacle = false;
  std::string aspect = "HALT";
  for (const auto& e : log) {
    if (const auto* c = std::get_if<StateChange>(&e.payload); c && e.subject == "MainSignal:0") aspect = c->state;
    if (msg_starts(e, "obstacle ")) {
      auto f = message_fields(std::get<Message>(e.payload).text);
      bool present = std::find(f.begin(), f.end(), std::pair<std::string, std::string>{"present", "yes"}) != f.end();
      if (obstacle && !present && aspect == "HALT" && t.halted) t.cleared_while_halt_aspect = true;
      obstacle = present;
    }
    if (e.subject != "Train:0") continue;
    if (msg_starts(e, "ato train=Train:0 decision=halt-for-obstacle")) t.halted = true;
    if (!t.halted || t.departed_after_halt) continue;
    if (msg_starts(e, "depart train=Train:0")) {
      check(!obstacle, "departure while the obstacle is present at " + e.time.to_string());
      check(aspect == "GO" || aspect == "SLOW", "departure at signal " + aspect + " at " + e.time.to_string());
      t.departed_after_halt = true;
    }
  }
  return t;
}

void ato() {
  const auto& runs = fixture_runs();
  auto late = batch(runs[1]);
  auto early = batch(runs[2]);
  AtoTrace l = ato_predicates(late);
  AtoTrace e = ato_predicates(early);
  check(l.halted && l.departed_after_halt, "late clear: no halt/departure");
  check(e.halted && e.departed_after_halt, "early clear: no halt/departure");
  check(e.cleared_while_halt_aspect, "early clear: obstacle did not clear while the signal showed HALT");

  // With the obstacle present and the signal at GO, no departure message.
  Rational go, cleared;
  for (const auto& ev : late) {
    if (const auto* c = std::get_if<StateChange>(&ev.payload); c && ev.subject == "MainSignal:0" && c->state == "GO" &&
                                                               go == Rational(0))
      go = ev.time;
    if (msg_starts(ev, "obstacle ") && std::get<Message>(ev.payload).text.find("present=no") != std::string::npos)
      cleared = ev.time;
  }
  check(go > Rational(0) && go < cleared, "late clear: signal was not GO while the obstacle was present");
  for (const auto& ev : late)
    if (ev.subject == "Train:0" && ev.time >= go && ev.time < cleared)
      check(!msg_starts(ev, "depart ") && !(std::holds_alternative<Movement>(ev.payload) &&
                                            std::get<Movement>(ev.payload).velocity_mm_s > 0),
            "late clear: train moved at " + ev.time.to_string());
  // After clearance under HALT the train stays until the signal clears.
  Rational e_cleared, e_go;
  for (const auto& ev : early) {
    if (msg_starts(ev, "obstacle ") && std::get<Message>(ev.payload).text.find("present=no") != std::string::npos)
      e_cleared = ev.time;
    if (const auto* c = std::get_if<StateChange>(&ev.payload);
        c && ev.subject == "MainSignal:0" && c->state == "GO" && e_go == Rational(0))
      e_go = ev.time;
  }
  check(e_cleared < e_go, "early clear: obstacle cleared after the signal");
  for (const auto& ev : early)
    if (ev.subject == "Train:0" && ev.time >= e_cleared && ev.time < e_go)
      check(!msg_starts(ev, "depart ") && !(std::holds_alternative<Movement>(ev.payload) &&
                                            std::get<Movement>(ev.payload).velocity_mm_s > 0),
            "early clear: train moved at " + ev.time.to_string());
}

std::optional<double> first_pass(const std::vector<SimEvent>& log, const std::string& train, const std::string& node) {
  for (const auto& e : log)
    if (const auto* mv = std::get_if<Movement>(&e.payload);
        mv && e.subject == train && mv->node == node && mv->velocity_mm_s > 0)
      return e.time.to_double();
  return std::nullopt;
}

std::optional<double> arrival(const std::vector<SimEvent>& log, const std::string& train) {
  for (const auto& e : log)
    if (e.subject == train && msg_starts(e, "arrive ")) return e.time.to_double();
  return std::nullopt;
}

void rule_change() {
  auto start = Clock::now();
  const auto& runs = fixture_runs();
  auto base = batch(runs[3]);
  auto old_rule = batch(runs[4]);
  auto new_rule = batch(runs[5]);
  double secs = std::chrono::duration<double>(Clock::now() - start).count();
  check(secs < 10.0, "runtime " + std::to_string(secs) + " s");

  auto a_old = arrival(old_rule, "Train:1"), a_new = arrival(new_rule, "Train:1"), a_base = arrival(base, "Train:1");
  check(a_old && a_new && a_base, "missing arrival");
  check(*a_new > *a_old, "(i) new-rule arrival not later");

  auto section = [&](const std::vector<SimEvent>& log) {
    auto in = first_pass(log, "Train:0", "n3600");
    auto out = first_pass(log, "Train:0", "n4300");
    check(in && out, "sight block passage missing");
    return *out - *in;
  };
  double expected = 700.0 / (6.0 / 3.6) - 700.0 / (60.0 / 3.6);
  double extra = section(new_rule) - section(old_rule);
  check(std::abs(extra - expected) <= 2.0,
        "(ii) extra traversal " + std::to_string(extra) + " s, expected " + std::to_string(expected) + " s");

  double delay_old = *a_old - *a_base, delay_new = *a_new - *a_base;
  check(delay_old >= 0, "(iii) old-rule delay negative");
  check(delay_new > delay_old, "(iii) new-rule delay not larger");
  std::cout << "  extra traversal " << extra << " s; second-train delay " << delay_old << " s (old) vs " << delay_new
            << " s (new)\n";
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out(1);
  for (char c : line) {
    if (c == ',')
      out.emplace_back();
    else if (c != '\r')
      out.back() += c;
  }
  return out;
}

void trace_engine() {
  // Duality over random registries; expected links computed directly.
  std::mt19937_64 rng(31337);
  for (int trial = 0; trial < 1000; ++trial) {
    DocumentIndex index;
    std::vector<std::string> anchors;
    for (int d = 0, nd = 1 + rng() % 3; d < nd; ++d) {
      Document doc{"d" + std::to_string(d), "", {}};
      for (int s = 0, ns = 1 + rng() % 4; s < ns; ++s) {
        anchors.push_back(doc.id + "." + std::to_string(s));
        doc.sections.push_back({anchors.back(), "", "", 0, ""});
      }
      index.add(doc);
    }
    std::vector<std::string> concepts = {"P", "Q", "R"};
    std::set<std::pair<std::string, std::string>> rows;
    TraceMatrix matrix;
    for (int i = 0, n = rng() % 7; i < n; ++i) {
      auto row = std::make_pair(concepts[rng() % 3], anchors[rng() % anchors.size()]);
      if (rows.insert(row).second) matrix.add({row.first, row.second});
    }
    TraceRegistry reg(index, matrix);
    std::map<std::string, std::set<std::string>> links;
    for (int r = 0, n = 1 + rng() % 4; r < n; ++r) {
      RuleRegistration rr{RuleId("r" + std::to_string(r)), {}, {}, "", false};
      if (rng() % 2) rr.concepts.push_back(concepts[rng() % 3]);
      if (rng() % 2) rr.anchors.push_back(anchors[rng() % anchors.size()]);
      auto& l = links[rr.rule.value];
      for (const auto& a : rr.anchors) l.insert(a);
      for (const auto& c : rr.concepts)
        for (const auto& [rc, ra] : rows)
          if (rc == c) l.insert(ra);
      reg.register_rule(rr);
    }
    for (const auto& a : anchors) {
      std::set<std::string> forward;
      for (const auto& t : reg.forward_trace(a))
        if (const auto* r = std::get_if<RuleId>(&t)) forward.insert(r->value);
      for (const auto& [rule, l] : links) {
        std::set<std::string> backward;
        for (const auto& x : reg.backward_trace(RuleId(rule)).anchors) backward.insert(x.id);
        check(backward == l, "backward trace of " + rule + " (trial " + std::to_string(trial) + ")");
        check(forward.count(rule) == l.count(a), "duality broken for " + a + " / " + rule);
      }
    }
  }

  // Coverage exit code over the CLI: drop each anchor's matrix rows in turn.
  std::string csv = read(source("data/tracematrix.csv"));
  std::map<std::string, std::set<std::string>> by_concept;
  std::set<std::string> matrix_anchors;
  {
    std::istringstream in(csv);
    bool header = false;
    for (std::string line; std::getline(in, line);) {
      if (line.empty() || line[0] == '#') continue;
      if (!header) {
        header = true;
        continue;
      }
      auto f = split_csv_line(line);
      by_concept[f[0]].insert(f[1]);
      matrix_anchors.insert(f[1]);
    }
  }
  check(shell(cli() + " trace coverage >/dev/null 2>&1") == 0, "full matrix coverage does not exit 0");
  std::set<std::string> direct;
  for (const auto& r : rules::table())
    for (const auto& a : r.anchors) direct.insert(a);
  for (const auto& anchor : matrix_anchors) {
    std::string reduced;
    std::istringstream in(csv);
    for (std::string line; std::getline(in, line);)
      if (line.empty() || line[0] == '#' || split_csv_line(line).back() != anchor) reduced += line + "\n";
    fs::path m = scratch("reduced.csv");
    std::ofstream(m, std::ios::binary) << reduced;
    int rc = shell(cli() + " trace --matrix \"" + m.string() + "\" coverage >/dev/null 2>&1");
    int expected = direct.count(anchor) ? 0 : 3;
    check(rc == expected, "coverage without " + anchor + " exited " + std::to_string(rc) + ", expected " +
                              std::to_string(expected));
  }

  // `trace concept` returns exactly the matrix rows of each concept.
  for (const auto& [concept_name, expected] : by_concept) {
    fs::path out = scratch("concept.json");
    int rc = shell(cli() + " trace --json concept \"" + concept_name + "\" >\"" + out.string() + "\" 2>/dev/null");
    check(rc == 0, "trace concept " + concept_name + " exited " + std::to_string(rc));
    std::set<std::string> got;
    nlohmann::json result = nlohmann::json::parse(read(out));
    for (const auto& a : result["anchors"]) got.insert(a["id"].get<std::string>());
    auto join = [](const std::set<std::string>& xs) {
      std::string s;
      for (const auto& x : xs) s += (s.empty() ? "" : " ") + x;
      return s;
    };
    check(got == expected, "trace concept " + concept_name + " returned {" + join(got) + "}, matrix has {" +
                               join(expected) + "}");
  }
}

int free_port() {
  int fd = ::socket(AF_INET, SOCK_STREAM, 0);
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
  addr.sin_port = 0;
  ::bind(fd, reinterpret_cast<sockaddr*>(&addr), sizeof addr);
  socklen_t len = sizeof addr;
  ::getsockname(fd, reinterpret_cast<sockaddr*>(&addr), &len);
  int port = ntohs(addr.sin_port);
  ::close(fd);
  return port;
}

/// `railtrace serve` in a child process.
class ServeProcess {
 public:
  ServeProcess(const std::string& scenario, int port) {
    pid_ = ::fork();
    if (pid_ == 0) {
      std::string p = std::to_string(port);
      if (!std::freopen("/dev/null", "w", stderr)) std::_Exit(127);
      ::execl(RAILTRACE_CLI, RAILTRACE_CLI, "serve", scenario.c_str(), "--port", p.c_str(), "--bind", "127.0.0.1",
              static_cast<char*>(nullptr));
      std::_Exit(127);
    }
    httplib::Client c("127.0.0.1", port);
    for (int i = 0; i < 200; ++i) {
      if (auto r = c.Get("/clock"); r && r->status == 200) return;
      std::this_thread::sleep_for(std::chrono::milliseconds(25));
    }
    throw Failed("serve did not come up on port " + std::to_string(port));
  }
  ~ServeProcess() {
    ::kill(pid_, SIGTERM);
    ::waitpid(pid_, nullptr, 0);
  }

 private:
  pid_t pid_;
};

void api_batch_equivalence() {
  for (const auto& r : fixture_runs()) {
    fs::path log = scratch("batch.zug");
    check(shell(cli() + " " + run_args(r) + " --out \"" + log.string() + "\" 2>/dev/null") == 0,
          r.label + ": batch run failed");
    int port = free_port();
    ServeProcess serve(scenario_file(r), port);
    std::vector<ScriptStep> script;
    if (!r.script.empty()) script = load_script(script_file(r));
    std::string over_http = run_script_over_http("127.0.0.1", port, script, std::nullopt);
    check(over_http == read(log), r.label + ": HTTP session log differs from batch log");
  }
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<void()>>> criteria = {
      {"determinism", determinism},
      {"eventlog-round-trip", eventlog_round_trip},
      {"clock-semantics", clock_semantics},
      {"kinematics-oracle", kinematics},
      {"safety-oracles", safety},
      {"ato-scenario", ato},
      {"rule-change-scenario", rule_change},
      {"trace-engine", trace_engine},
      {"api-batch-equivalence", api_batch_equivalence},
  };
  int failures = 0;
  for (const auto& [name, run] : criteria) {
    auto start = Clock::now();
    std::string error;
    try {
      run();
    } catch (const std::exception& e) {
      error = e.what();
    }
    double secs = std::chrono::duration<double>(Clock::now() - start).count();
    if (error.empty()) {
      std::cout << "PASS " << name << " (" << secs << " s)\n";
    } else {
      ++failures;
      std::cout << "FAIL " << name << ": " << error << "\n";
    }
    std::cout.flush();
  }
  return failures == 0 ? 0 : 1;
}
