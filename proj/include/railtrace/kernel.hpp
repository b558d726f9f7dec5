#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <stdexcept>
#include <variant>
#include <vector>

#include "railtrace/eventlog.hpp"
#include "railtrace/rational.hpp"

namespace railtrace {

using ProcessId = std::uint32_t;

/// Suspend for at least `earliest` and at most `latest` time units. The
/// scheduler always wakes at `earliest`.
struct DurationWait {
  Rational earliest;
  Rational latest;
};

/// Suspend until the predicate holds. Predicates must not have side effects.
struct GuardWait {
  std::function<bool()> predicate;
};

struct Terminated {};

using WaitCondition = std::variant<DurationWait, GuardWait, Terminated>;

inline WaitCondition wait_for(const Rational& d) { return DurationWait{d, d}; }
inline WaitCondition wait_until(std::function<bool()> predicate) { return GuardWait{std::move(predicate)}; }

/// A process is a step function: it runs to its next suspension point and
/// says what it waits on.
using StepFunction = std::function<WaitCondition()>;

class DeadlockError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};
class LivelockError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};
class GuardImpurityError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct KernelOptions {
  std::uint64_t max_steps_per_instant = 1'000'000;
  /// Evaluate every guard twice and fail on disagreement.
  bool check_guard_purity = false;
  /// Randomized choice among ready processes (robustness testing only).
  std::optional<std::uint64_t> shuffle_seed;
};

struct AdvanceResult {
  Rational now;
  bool blocked = false;
};

/// Cooperative scheduler over an exact symbolic clock.
///
/// Ready processes run in (wake time, id) order. The clock only moves once no
/// process is ready, by the smallest remaining duration wait, and never past
/// the limit. Guards are re-checked after every process step and after every
/// clock advance.
class Kernel {
 public:
  explicit Kernel(KernelOptions options = {});

  ProcessId spawn(StepFunction step);

  /// Makes a suspended process ready now (used to deliver orders or aspect
  /// changes to a process that is waiting on a duration).
  void wake(ProcessId pid);

  void run_until_quiescent();
  AdvanceResult advance_clock();
  void set_clock_limit(const Rational& t);
  /// Runs until the clock is blocked at `limit`. A limit equal to the current
  /// clock value is a no-op: nothing runs, not even processes ready now.
  std::vector<SimEvent> step_until(const Rational& limit);
  /// Drops the limit and runs until every process has terminated. Throws
  /// DeadlockError if live processes only wait on guards.
  std::vector<SimEvent> run_to_completion();

  const Rational& now() const { return now_; }
  const std::optional<Rational>& limit() const { return limit_; }
  bool quiescent() const;
  std::size_t live_processes() const;
  bool is_terminated(ProcessId pid) const;

  void emit(SimEvent event);
  const std::vector<SimEvent>& events() const { return events_; }

 private:
  enum class State { Ready, Duration, Guard, Done };
  struct Process {
    StepFunction step;
    State state = State::Ready;
    Rational wake_time;  // Ready: when it became ready; Duration: due time
    std::function<bool()> guard;
  };

  bool evaluate(Process& p);
  void recheck_guards();
  std::optional<ProcessId> pick_ready();
  void apply_wait(ProcessId pid, WaitCondition wait);

  KernelOptions options_;
  std::vector<Process> processes_;
  Rational now_;
  std::optional<Rational> limit_;
  std::vector<SimEvent> events_;
  std::mt19937_64 rng_;
  bool stepping_ = false;
};

}  // namespace railtrace
