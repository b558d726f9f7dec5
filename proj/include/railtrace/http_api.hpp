#pragma once

#include <chrono>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "railtrace/control.hpp"
#include "railtrace/trace.hpp"

namespace railtrace {

struct ServerOptions {
  std::string bind = "127.0.0.1";
  int port = 8080;  // 0 picks a free port
  KernelOptions kernel;
  /// Longest time GET /events waits for new events.
  std::chrono::milliseconds max_poll{std::chrono::seconds(30)};
  /// Called on the runner thread before each run starts.
  std::function<void()> before_run;
};

/// HTTP/JSON front end of the control service.
///
/// Runs execute on a background thread; while one is in progress every
/// mutating request answers 409 busy and reads are served from the snapshot
/// taken when the kernel last blocked.
class ControlServer {
 public:
  /// `registry` holds documents, the matrix and rule registrations; scenario
  /// creation sites are registered by the server.
  ControlServer(Scenario scenario, TraceRegistry registry, ServerOptions options = {});
  ~ControlServer();
  ControlServer(const ControlServer&) = delete;
  ControlServer& operator=(const ControlServer&) = delete;

  /// Binds the socket; returns the bound port. Throws std::runtime_error.
  int bind();
  /// Serves until stop(); call after bind().
  void listen();
  /// bind() + listen() on a background thread; returns the bound port.
  int start();
  void stop();

 private:
  struct State;
  std::unique_ptr<State> state_;
};

/// Drives a running server through a script exactly like run_batch does and
/// returns the complete `.zug` text read back from GET /events.
std::string run_script_over_http(const std::string& host, int port, const std::vector<ScriptStep>& script,
                                 const std::optional<Rational>& until);

}  // namespace railtrace
