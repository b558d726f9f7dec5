#include "railtrace/kernel.hpp"

#include <algorithm>

namespace railtrace {

Kernel::Kernel(KernelOptions options) : options_(options), rng_(options.shuffle_seed.value_or(0)) {}

ProcessId Kernel::spawn(StepFunction step) {
  Process p;
  p.step = std::move(step);
  p.state = State::Ready;
  p.wake_time = now_;
  processes_.push_back(std::move(p));
  return static_cast<ProcessId>(processes_.size() - 1);
}

void Kernel::wake(ProcessId pid) {
  Process& p = processes_.at(pid);
  if (p.state == State::Duration || p.state == State::Guard) {
    p.state = State::Ready;
    p.wake_time = now_;
    p.guard = nullptr;
  }
}

bool Kernel::evaluate(Process& p) {
  bool result = p.guard();
  if (options_.check_guard_purity && p.guard() != result)
    throw GuardImpurityError("guard evaluated differently in the same state");
  return result;
}

void Kernel::recheck_guards() {
  for (auto& p : processes_) {
    if (p.state == State::Guard && evaluate(p)) {
      p.state = State::Ready;
      p.wake_time = now_;
      p.guard = nullptr;
    }
  }
}

std::optional<ProcessId> Kernel::pick_ready() {
  std::vector<ProcessId> ready;
  for (ProcessId i = 0; i < processes_.size(); ++i)
    if (processes_[i].state == State::Ready) ready.push_back(i);
  if (ready.empty()) return std::nullopt;
  if (options_.shuffle_seed) {
    std::uniform_int_distribution<std::size_t> pick(0, ready.size() - 1);
    return ready[pick(rng_)];
  }
  return *std::min_element(ready.begin(), ready.end(), [&](ProcessId a, ProcessId b) {
    const auto& pa = processes_[a];
    const auto& pb = processes_[b];
    if (pa.wake_time != pb.wake_time) return pa.wake_time < pb.wake_time;
    return a < b;
  });
}

void Kernel::apply_wait(ProcessId pid, WaitCondition wait) {
  Process& p = processes_[pid];
  std::visit(
      [&](auto& w) {
        using T = std::decay_t<decltype(w)>;
        if constexpr (std::is_same_v<T, DurationWait>) {
          if (w.latest < w.earliest) throw std::invalid_argument("duration wait with latest < earliest");
          p.state = State::Duration;
          p.wake_time = now_ + w.earliest;
        } else if constexpr (std::is_same_v<T, GuardWait>) {
          p.state = State::Guard;
          p.guard = std::move(w.predicate);
          if (evaluate(p)) {
            p.state = State::Ready;
            p.wake_time = now_;
            p.guard = nullptr;
          }
        } else {
          p.state = State::Done;
          p.step = nullptr;
        }
      },
      wait);
}

void Kernel::run_until_quiescent() {
  recheck_guards();
  std::uint64_t steps = 0;
  while (auto pid = pick_ready()) {
    if (++steps > options_.max_steps_per_instant)
      throw LivelockError("more than " + std::to_string(options_.max_steps_per_instant) +
                          " steps without the clock advancing at t=" + now_.to_string());
    stepping_ = true;
    // The step function may spawn, which can reallocate processes_.
    StepFunction step = processes_[*pid].step;
    WaitCondition wait = step();
    stepping_ = false;
    apply_wait(*pid, std::move(wait));
    recheck_guards();
  }
}

bool Kernel::quiescent() const {
  return std::none_of(processes_.begin(), processes_.end(), [](const Process& p) { return p.state == State::Ready; });
}

std::size_t Kernel::live_processes() const {
  return static_cast<std::size_t>(
      std::count_if(processes_.begin(), processes_.end(), [](const Process& p) { return p.state != State::Done; }));
}

bool Kernel::is_terminated(ProcessId pid) const { return processes_.at(pid).state == State::Done; }

AdvanceResult Kernel::advance_clock() {
  std::optional<Rational> next;
  for (const auto& p : processes_)
    if (p.state == State::Duration && (!next || p.wake_time < *next)) next = p.wake_time;

  if (!next) {
    if (live_processes() > 0 && !limit_)
      throw DeadlockError("no process waits for time to pass at t=" + now_.to_string());
    // Nothing can happen without outside interaction: park at the limit.
    if (limit_) now_ = max(now_, *limit_);
    return {now_, true};
  }
  if (limit_ && *next > *limit_) {
    now_ = *limit_;
    return {now_, true};
  }
  now_ = *next;
  for (auto& p : processes_)
    if (p.state == State::Duration && p.wake_time <= now_) p.state = State::Ready;
  recheck_guards();
  return {now_, false};
}

void Kernel::set_clock_limit(const Rational& t) {
  if (t < now_) throw std::invalid_argument("clock limit " + t.to_string() + " is before now " + now_.to_string());
  limit_ = t;
}

std::vector<SimEvent> Kernel::step_until(const Rational& limit) {
  set_clock_limit(limit);
  if (limit == now_) return {};
  std::size_t first = events_.size();
  while (true) {
    run_until_quiescent();
    if (advance_clock().blocked) break;
  }
  return {events_.begin() + static_cast<std::ptrdiff_t>(first), events_.end()};
}

std::vector<SimEvent> Kernel::run_to_completion() {
  limit_.reset();
  std::size_t first = events_.size();
  while (true) {
    run_until_quiescent();
    if (advance_clock().blocked) break;
  }
  return {events_.begin() + static_cast<std::ptrdiff_t>(first), events_.end()};
}

void Kernel::emit(SimEvent event) {
  event.time = now_;
  events_.push_back(std::move(event));
}

}  // namespace railtrace
