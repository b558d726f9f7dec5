#include "railtrace/http_api.hpp"

#include <condition_variable>
#include <mutex>
#include <thread>

#include <httplib.h>

#include "railtrace/scenario.hpp"

namespace railtrace {

using nlohmann::json;

namespace {

void reply(httplib::Response& res, int status, const json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

void reply_error(httplib::Response& res, int status, const std::string& kind, const std::string& message) {
  reply(res, status, {{"error", kind}, {"message", message}});
}

json parse_body(const httplib::Request& req) {
  if (req.body.empty()) return json::object();
  json body;
  try {
    body = json::parse(req.body);
  } catch (const json::parse_error& e) {
    throw ControlError(ControlError::Kind::BadRequest, std::string("malformed JSON body: ") + e.what());
  }
  if (!body.is_object()) throw ControlError(ControlError::Kind::BadRequest, "request body must be a JSON object");
  return body;
}

json event_json(std::size_t index, const SimEvent& e) {
  return {{"index", index},
          {"time", e.time.to_string()},
          {"kind", std::string(to_string(e.kind()))},
          {"subject", e.subject},
          {"line", serialize(e)}};
}

}  // namespace

struct ControlServer::State {
  ServerOptions options;
  httplib::Server server;
  std::thread listener;
  int port = 0;

  std::mutex mu;
  std::condition_variable changed;
  Scenario scenario;
  std::unique_ptr<World> world;
  TraceRegistry registry;
  std::uint64_t generation = 0;
  bool running = false;
  bool stopping = false;
  std::string last_error;
  std::thread runner;

  // Snapshot taken at the last Blocked point.
  json clock;
  json objects;
  std::vector<SimEvent> published;

  State(Scenario sc, TraceRegistry reg, ServerOptions opts)
      : options(std::move(opts)), scenario(std::move(sc)), registry(std::move(reg)) {
    reset_world();
    routes();
  }

  // Callers hold `mu`.
  void publish() {
    clock = world->clock_json();
    clock["generation"] = generation;
    if (!last_error.empty()) clock["error"] = last_error;
    objects = world->list_objects();
    const auto& events = world->events();
    published.insert(published.end(), events.begin() + static_cast<std::ptrdiff_t>(published.size()), events.end());
    changed.notify_all();
  }

  void reset_world() {
    world = std::make_unique<World>(scenario, options.kernel);
    registry.clear_elements();
    register_scenario(registry, scenario);
    ++generation;
    published.clear();
    last_error.clear();
    publish();
  }

  void require_idle() const {
    if (running) throw ControlError(ControlError::Kind::Busy, "busy: a run is in progress");
  }

  template <typename F>
  httplib::Server::Handler guarded(F f) {
    return [f](const httplib::Request& req, httplib::Response& res) {
      try {
        f(req, res);
      } catch (const ControlError& e) {
        int status = e.kind() == ControlError::Kind::NotFound ? 404 : e.kind() == ControlError::Kind::Busy ? 409 : 400;
        reply_error(res, status, std::string(to_string(e.kind())), e.what());
      } catch (const ScenarioError& e) {
        reply(res, 400, {{"error", "scenario"}, {"path", e.path()}, {"message", e.what()}});
      } catch (const TraceError& e) {
        reply_error(res, 404, "not-found", e.what());
      } catch (const std::invalid_argument& e) {
        reply_error(res, 400, "bad-request", e.what());
      } catch (const std::out_of_range& e) {
        reply_error(res, 400, "bad-request", e.what());
      } catch (const std::exception& e) {
        reply_error(res, 500, "internal", e.what());
      }
    };
  }

  void start_run(bool complete) {
    if (runner.joinable()) runner.join();
    running = true;
    clock["state"] = "running";
    runner = std::thread([this, complete] {
      std::string error;
      try {
        if (options.before_run) options.before_run();
        if (complete)
          world->run_to_completion();
        else
          world->run();
      } catch (const std::exception& e) {
        error = e.what();
      }
      std::lock_guard lock(mu);
      running = false;
      last_error = error;
      publish();
    });
  }

  void routes() {
    server.Get("/objects", guarded([this](const httplib::Request&, httplib::Response& res) {
                 std::lock_guard lock(mu);
                 reply(res, 200, {{"clock", clock}, {"objects", objects}});
               }));
    server.Get(R"(/objects/([^/]+))", guarded([this](const httplib::Request& req, httplib::Response& res) {
                 std::lock_guard lock(mu);
                 for (const auto& o : objects)
                   if (o["id"] == req.matches[1].str()) return reply(res, 200, o);
                 throw ControlError(ControlError::Kind::NotFound, "unknown object " + req.matches[1].str());
               }));
    server.Get(R"(/objects/([^/]+)/methods)", guarded([this](const httplib::Request& req, httplib::Response& res) {
                 std::lock_guard lock(mu);
                 json out = json::array();
                 for (const auto& m : exposed_methods(scenario, req.matches[1].str())) out.push_back(to_json(m));
                 reply(res, 200, out);
               }));
    server.Post(R"(/objects/([^/]+)/call)", guarded([this](const httplib::Request& req, httplib::Response& res) {
                  json body = parse_body(req);
                  std::lock_guard lock(mu);
                  require_idle();
                  if (!body.contains("method") || !body["method"].is_string())
                    throw ControlError(ControlError::Kind::BadRequest, "body needs a string 'method'");
                  json receipt = world->invoke(req.matches[1].str(), body["method"].get<std::string>(),
                                               body.value("args", json::object()));
                  publish();
                  reply(res, 200, receipt);
                }));

    server.Get("/clock", guarded([this](const httplib::Request& req, httplib::Response& res) {
                 std::unique_lock lock(mu);
                 if (req.has_param("wait")) {
                   auto ms = std::min<long>(std::stol(req.get_param_value("wait")),
                                            static_cast<long>(options.max_poll.count()));
                   changed.wait_for(lock, std::chrono::milliseconds(ms), [this] { return !running || stopping; });
                 }
                 json c = clock;
                 if (running) c["state"] = "running";
                 reply(res, 200, c);
               }));
    server.Post("/clock/limit", guarded([this](const httplib::Request& req, httplib::Response& res) {
                  json body = parse_body(req);
                  std::lock_guard lock(mu);
                  require_idle();
                  if (!body.contains("t") || !body["t"].is_string())
                    throw ControlError(ControlError::Kind::BadRequest, "body needs 't' as \"N/D\"");
                  Rational t;
                  try {
                    t = Rational::parse(body["t"].get<std::string>());
                  } catch (const std::exception& e) {
                    throw ControlError(ControlError::Kind::BadRequest, e.what());
                  }
                  world->set_limit(t);
                  publish();
                  reply(res, 200, clock);
                }));
    server.Post("/run", guarded([this](const httplib::Request& req, httplib::Response& res) {
                  json body = parse_body(req);
                  std::lock_guard lock(mu);
                  require_idle();
                  if (world->finished()) throw ControlError(ControlError::Kind::BadRequest, "run already finished");
                  bool complete = body.value("complete", false);
                  if (body.contains("until")) {
                    if (!body["until"].is_string())
                      throw ControlError(ControlError::Kind::BadRequest, "'until' must be \"N/D\"");
                    try {
                      world->set_limit(Rational::parse(body["until"].get<std::string>()));
                    } catch (const ControlError&) {
                      throw;
                    } catch (const std::exception& e) {
                      throw ControlError(ControlError::Kind::BadRequest, e.what());
                    }
                  }
                  start_run(complete);
                  reply(res, 202, {{"state", "running"}, {"limit", world->limit().to_string()}, {"complete", complete}});
                }));
    server.Get("/events", guarded([this](const httplib::Request& req, httplib::Response& res) {
                 std::size_t since = req.has_param("since") ? std::stoul(req.get_param_value("since")) : 0;
                 long wait = req.has_param("wait") ? std::stol(req.get_param_value("wait")) : 0;
                 wait = std::min<long>(wait, static_cast<long>(options.max_poll.count()));
                 std::unique_lock lock(mu);
                 std::uint64_t gen = generation;
                 if (wait > 0)
                   changed.wait_for(lock, std::chrono::milliseconds(wait), [&] {
                     return published.size() > since || generation != gen || stopping;
                   });
                 json events = json::array();
                 for (std::size_t i = since; i < published.size(); ++i) events.push_back(event_json(i, published[i]));
                 reply(res, 200,
                       {{"generation", generation}, {"since", since}, {"next", std::max(since, published.size())},
                        {"events", events}});
               }));

    server.Get(R"(/trace/concept/(.+))", guarded([this](const httplib::Request& req, httplib::Response& res) {
                 std::lock_guard lock(mu);
                 reply(res, 200, concept_query(registry, req.matches[1].str()));
               }));
    server.Get(R"(/trace/anchor/(.+))", guarded([this](const httplib::Request& req, httplib::Response& res) {
                 std::lock_guard lock(mu);
                 reply(res, 200, anchor_query(registry, req.matches[1].str()));
               }));
    server.Get(R"(/trace/rule/(.+))", guarded([this](const httplib::Request& req, httplib::Response& res) {
                 std::lock_guard lock(mu);
                 reply(res, 200, rule_query(registry, RuleId(req.matches[1].str())));
               }));
    server.Get("/documents", guarded([this](const httplib::Request&, httplib::Response& res) {
                 std::lock_guard lock(mu);
                 reply(res, 200, registry.documents().to_json());
               }));

    server.Get("/scenario", guarded([this](const httplib::Request&, httplib::Response& res) {
                 std::lock_guard lock(mu);
                 res.status = 200;
                 res.set_content(canonical_text(scenario), "application/json");
               }));
    server.Put("/scenario", guarded([this](const httplib::Request& req, httplib::Response& res) {
                 Scenario next = parse_scenario(req.body);
                 std::lock_guard lock(mu);
                 require_idle();
                 scenario = std::move(next);
                 reset_world();
                 reply(res, 200, {{"generation", generation}, {"clock", clock}});
               }));
    server.Post("/scenario/edit", guarded([this](const httplib::Request& req, httplib::Response& res) {
                  json body = parse_body(req);
                  EditOp op = edit_op_from_json(body);
                  std::lock_guard lock(mu);
                  require_idle();
                  EditResult result = apply_edit(scenario, op);
                  auto report = validate_scenario(result.scenario);
                  if (!report.empty())
                    throw ScenarioError(report.front().subject, report.front().code + ": " + report.front().message);
                  scenario = std::move(result.scenario);
                  reset_world();
                  reply(res, 200,
                        {{"created", result.created}, {"warnings", result.warnings}, {"generation", generation}});
                }));
  }
};

ControlServer::ControlServer(Scenario scenario, TraceRegistry registry, ServerOptions options)
    : state_(std::make_unique<State>(std::move(scenario), std::move(registry), std::move(options))) {}

ControlServer::~ControlServer() {
  stop();
  if (state_->listener.joinable()) state_->listener.join();
  if (state_->runner.joinable()) state_->runner.join();
}

int ControlServer::bind() {
  auto& s = *state_;
  if (s.options.port == 0)
    s.port = s.server.bind_to_any_port(s.options.bind);
  else if (s.server.bind_to_port(s.options.bind, s.options.port))
    s.port = s.options.port;
  else
    s.port = -1;
  if (s.port <= 0)
    throw std::runtime_error("cannot bind " + s.options.bind + ":" + std::to_string(s.options.port));
  return s.port;
}

void ControlServer::listen() { state_->server.listen_after_bind(); }

int ControlServer::start() {
  int port = bind();
  state_->listener = std::thread([this] { listen(); });
  state_->server.wait_until_ready();
  return port;
}

void ControlServer::stop() {
  {
    std::lock_guard lock(state_->mu);
    if (state_->stopping) return;
    state_->stopping = true;
    state_->changed.notify_all();
  }
  state_->server.stop();
}

// --- scripted client -----------------------------------------------------------

namespace {

json request(httplib::Client& client, const std::string& method, const std::string& path,
             const json& body = json::object()) {
  httplib::Result r = method == "GET" ? client.Get(path) : client.Post(path, body.dump(), "application/json");
  if (!r) throw std::runtime_error(method + " " + path + ": " + httplib::to_string(r.error()));
  json j = r->body.empty() ? json::object() : json::parse(r->body);
  if (r->status >= 300)
    throw std::runtime_error(method + " " + path + ": HTTP " + std::to_string(r->status) + " " + r->body);
  return j;
}

void await_blocked(httplib::Client& client) {
  while (true) {
    json c = request(client, "GET", "/clock?wait=1000");
    if (c.contains("error")) throw std::runtime_error("run failed: " + c["error"].get<std::string>());
    if (c["state"] != "running") return;
  }
}

}  // namespace

std::string run_script_over_http(const std::string& host, int port, const std::vector<ScriptStep>& script,
                                 const std::optional<Rational>& until) {
  httplib::Client client(host, port);
  client.set_read_timeout(std::chrono::seconds(60));
  for (const auto& step : script) {
    request(client, "POST", "/clock/limit", {{"t", step.at.to_string()}});
    request(client, "POST", "/run");
    await_blocked(client);
    const json& c = step.command;
    request(client, "POST", "/objects/" + c["object"].get<std::string>() + "/call",
            {{"method", c["method"]}, {"args", c.value("args", json::object())}});
  }
  if (until)
    request(client, "POST", "/run", {{"until", until->to_string()}});
  else
    request(client, "POST", "/run", {{"complete", true}});
  await_blocked(client);

  std::string log;
  std::size_t since = 0;
  while (true) {
    json page = request(client, "GET", "/events?since=" + std::to_string(since));
    if (page["events"].empty()) break;
    for (const auto& e : page["events"]) log += e["line"].get<std::string>() + "\n";
    since = page["next"].get<std::size_t>();
  }
  return log;
}

}  // namespace railtrace
