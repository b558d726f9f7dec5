#include <gtest/gtest.h>

#include <future>
#include <thread>

#include <httplib.h>

#include "railtrace/http_api.hpp"
#include "support.hpp"

using namespace railtrace;
using nlohmann::json;

namespace {

struct Reply {
  int status = 0;
  json body;
};

Reply call(httplib::Client& c, const std::string& method, const std::string& path, const std::string& body = "") {
  httplib::Result r = method == "GET"   ? c.Get(path)
                      : method == "PUT" ? c.Put(path, body, "application/json")
                                        : c.Post(path, body, "application/json");
  if (!r) throw std::runtime_error(method + " " + path + " failed: " + httplib::to_string(r.error()));
  Reply out{r->status, json()};
  if (!r->body.empty()) out.body = json::parse(r->body);
  return out;
}

class Served {
 public:
  explicit Served(const std::string& scenario, ServerOptions options = {}) {
    options.port = 0;
    server_ = std::make_unique<ControlServer>(fixtures::fixture(scenario), fixtures::fixture_registry(), options);
    port_ = server_->start();
    client_ = std::make_unique<httplib::Client>("127.0.0.1", port_);
    client_->set_read_timeout(std::chrono::seconds(30));
  }
  ~Served() { server_->stop(); }

  int port() const { return port_; }
  httplib::Client& client() { return *client_; }
  Reply get(const std::string& path) { return call(*client_, "GET", path); }
  Reply post(const std::string& path, const json& body = json::object()) {
    return call(*client_, "POST", path, body.dump());
  }
  Reply put(const std::string& path, const std::string& body) { return call(*client_, "PUT", path, body); }
  json await_blocked() {
    for (;;) {
      Reply r = get("/clock?wait=1000");
      if (r.body["state"] != "running") return r.body;
    }
  }

 private:
  std::unique_ptr<ControlServer> server_;
  int port_ = 0;
  std::unique_ptr<httplib::Client> client_;
};

}  // namespace

TEST(Http, ObjectsAndMethods) {
  Served s("tunnel_branch");
  Reply r = s.get("/objects");
  ASSERT_EQ(r.status, 200);
  EXPECT_EQ(r.body["clock"]["now"], "0/1");
  EXPECT_EQ(r.body["clock"]["state"], "blocked");
  EXPECT_FALSE(r.body["objects"].empty());
  r = s.get("/objects/MainSignal:3");
  EXPECT_EQ(r.status, 200);
  EXPECT_EQ(r.body["state"], "HALT");
  EXPECT_EQ(s.get("/objects/Nope:1").status, 404);
  r = s.get("/objects/Train:0/methods");
  ASSERT_EQ(r.status, 200);
  EXPECT_EQ(r.body[0]["name"], "giveOrder");
  EXPECT_EQ(s.get("/objects/Ghost:0/methods").status, 404);
}

TEST(Http, CallsAndErrors) {
  Served s("tunnel_branch");
  Reply r = s.post("/objects/MainSignal:3/call", {{"method", "breakSignal"}});
  ASSERT_EQ(r.status, 200) << r.body.dump();
  EXPECT_EQ(r.body["time"], "0/1");
  EXPECT_EQ(s.get("/objects/MainSignal:3").body["faulted"], true);
  EXPECT_EQ(s.post("/objects/MainSignal:3/call", {{"method", "fly"}}).status, 404);
  EXPECT_EQ(s.post("/objects/MainSignal:3/call", json::object()).status, 400);
  EXPECT_EQ(call(s.client(), "POST", "/objects/MainSignal:3/call", "{not json").status, 400);
  EXPECT_EQ(call(s.client(), "POST", "/run", "null").status, 400);
  r = s.post("/objects/Train:0/call", {{"method", "giveOrder"}, {"args", {{"order", "Nope"}}}});
  EXPECT_EQ(r.status, 400);
  EXPECT_EQ(r.body["error"], "bad-request");
  EXPECT_EQ(s.post("/clock/limit", {{"t", "abc"}}).status, 400);
  EXPECT_EQ(s.post("/clock/limit", {{"t", 5}}).status, 400);
  EXPECT_EQ(s.get("/events?since=abc").status, 400);
}

TEST(Http, ClockAndRun) {
  Served s("station_entry");
  Reply r = s.post("/clock/limit", {{"t", "30/1"}});
  ASSERT_EQ(r.status, 200);
  EXPECT_EQ(r.body["limit"], "30/1");
  EXPECT_EQ(s.post("/run").status, 202);
  json c = s.await_blocked();
  EXPECT_EQ(c["now"], "30/1");
  EXPECT_EQ(c["state"], "blocked");
  EXPECT_EQ(s.post("/clock/limit", {{"t", "10/1"}}).status, 400);
  EXPECT_EQ(s.post("/run", {{"complete", true}}).status, 202);
  c = s.await_blocked();
  EXPECT_EQ(c["state"], "finished");
  EXPECT_EQ(s.post("/run").status, 400);
  r = s.get("/objects/Train:1");
  EXPECT_EQ(r.body["status"], "arrived");
}

TEST(Http, MutationsWhileRunningAreBusy) {
  std::promise<void> release;
  std::shared_future<void> gate = release.get_future().share();
  std::promise<void> entered;
  ServerOptions options;
  bool first = true;
  options.before_run = [&] {
    if (!first) return;
    first = false;
    entered.set_value();
    gate.wait();
  };
  Served s("tunnel_branch", options);
  ASSERT_EQ(s.post("/run", {{"complete", true}}).status, 202);
  entered.get_future().wait();

  EXPECT_EQ(s.get("/clock").body["state"], "running");
  EXPECT_EQ(s.get("/objects").body["clock"]["state"], "running");
  Reply busy = s.post("/objects/MainSignal:3/call", {{"method", "breakSignal"}});
  EXPECT_EQ(busy.status, 409);
  EXPECT_EQ(busy.body["error"], "busy");
  EXPECT_EQ(s.post("/clock/limit", {{"t", "5/1"}}).status, 409);
  EXPECT_EQ(s.post("/run").status, 409);
  EXPECT_EQ(s.put("/scenario", canonical_text(fixtures::fixture("station_entry"))).status, 409);
  EXPECT_EQ(s.post("/scenario/edit", {{"op", "add_node"}, {"id", "x"}}).status, 409);
  EXPECT_EQ(s.get("/objects/Train:0").status, 200);
  EXPECT_EQ(s.get("/trace/concept/Zs10").status, 200);

  release.set_value();
  json c = s.await_blocked();
  EXPECT_EQ(c["state"], "finished");
  EXPECT_EQ(s.post("/objects/MainSignal:3/call", {{"method", "breakSignal"}}).status, 200);
}

TEST(Http, EventLongPollSeenIdenticallyByTwoClients) {
  Served s("tunnel_branch");
  std::size_t initial = s.get("/events").body["next"].get<std::size_t>();
  EXPECT_EQ(initial, fixtures::fixture("tunnel_branch").declared_ids().size());

  auto follow = [&](std::size_t since) {
    httplib::Client c("127.0.0.1", s.port());
    c.set_read_timeout(std::chrono::seconds(30));
    std::vector<std::string> lines;
    for (;;) {
      Reply r = call(c, "GET", "/events?since=" + std::to_string(since) + "&wait=5000");
      if (r.body["events"].empty()) break;
      for (const auto& e : r.body["events"]) {
        EXPECT_EQ(e["index"].get<std::size_t>(), since + (&e - &r.body["events"][0]));
        lines.push_back(e["line"]);
      }
      since = r.body["next"];
      Reply clock = call(c, "GET", "/clock");
      if (clock.body["state"] == "finished" && since == clock.body["events"].get<std::size_t>()) break;
    }
    return lines;
  };
  auto a = std::async(std::launch::async, follow, initial);
  auto b = std::async(std::launch::async, follow, initial);
  std::this_thread::sleep_for(std::chrono::milliseconds(100));
  ASSERT_EQ(s.post("/run", {{"complete", true}}).status, 202);
  auto la = a.get();
  auto lb = b.get();
  EXPECT_FALSE(la.empty());
  EXPECT_EQ(la, lb);

  auto batch = run_batch(fixtures::fixture("tunnel_branch"), {}, std::nullopt);
  std::vector<std::string> expected;
  for (std::size_t i = initial; i < batch.size(); ++i) expected.push_back(serialize(batch[i]));
  EXPECT_EQ(la, expected);
}

TEST(Http, ScriptedRunEqualsBatchRun) {
  for (const auto& run : fixtures::fixture_runs()) {
    Served s(run.scenario);
    std::vector<ScriptStep> script;
    if (run.script) script = fixtures::fixture_script(*run.script);
    std::string over_http = run_script_over_http("127.0.0.1", s.port(), script, std::nullopt);
    EXPECT_EQ(over_http, serialize_log(fixtures::run_fixture(run))) << run.label;
  }
  Served s("tunnel_branch");
  auto script = fixtures::fixture_script("tunnel_branch_fault");
  EXPECT_EQ(run_script_over_http("127.0.0.1", s.port(), script, Rational(500)),
            serialize_log(run_batch(fixtures::fixture("tunnel_branch"), script, Rational(500))));
}

TEST(Http, ScenarioReplaceAndEdit) {
  Served s("tunnel_branch");
  httplib::Result text = s.client().Get("/scenario");
  ASSERT_TRUE(text);
  EXPECT_EQ(text->body, canonical_text(fixtures::fixture("tunnel_branch")));
  std::uint64_t gen = s.get("/clock").body["generation"];

  Reply r = s.put("/scenario", canonical_text(fixtures::fixture("station_entry")));
  ASSERT_EQ(r.status, 200) << r.body.dump();
  EXPECT_GT(r.body["generation"].get<std::uint64_t>(), gen);
  EXPECT_EQ(s.get("/events").body["next"], fixtures::fixture("station_entry").declared_ids().size());
  EXPECT_EQ(s.get("/objects/TunnelPortal:0").status, 404);

  r = s.put("/scenario", "{\"format_version\": 1, \"nodes\": 3}");
  EXPECT_EQ(r.status, 400);
  EXPECT_EQ(r.body["error"], "scenario");
  EXPECT_EQ(r.body["path"], "$.nodes");

  r = s.post("/scenario/edit", {{"op", "add_node"}, {"id", "n9000"}, {"x", 9000}});
  ASSERT_EQ(r.status, 200) << r.body.dump();
  EXPECT_EQ(r.body["created"], json::array({"n9000"}));
  r = s.post("/scenario/edit", {{"op", "add_edge"}, {"id", "e_new"}, {"from", "n1600"}, {"to", "n9000"}, {"length", 10}});
  ASSERT_EQ(r.status, 200) << r.body.dump();
  EXPECT_EQ(s.get("/objects/e_new").status, 200);
  EXPECT_EQ(s.post("/scenario/edit", {{"op", "add_node"}, {"id", "n0"}}).status, 400);
  EXPECT_EQ(s.post("/scenario/edit", {{"op", "explode"}}).status, 400);
  r = s.post("/scenario/edit", {{"op", "add_edge"}, {"id", "e_loop"}, {"from", "n0"}, {"to", "n0"}, {"length", 1}});
  EXPECT_EQ(r.status, 400);
}

TEST(Http, TraceEndpoints) {
  Served s("tunnel_branch");
  Reply r = s.get("/trace/concept/Zs10");
  ASSERT_EQ(r.status, 200);
  EXPECT_EQ(r.body["anchors"].size(), 2u);
  EXPECT_EQ(s.get("/trace/concept/Unknown").status, 404);
  r = s.get("/trace/anchor/ril408-0615-s3");
  ASSERT_EQ(r.status, 200);
  bool tunnel = false;
  for (const auto& site : r.body["sites"]) tunnel |= site["element"] == "TunnelPortal:0";
  EXPECT_TRUE(tunnel);
  EXPECT_FALSE(r.body["rules"].empty());
  r = s.get("/trace/rule/rule.ato.obstacle");
  ASSERT_EQ(r.status, 200);
  EXPECT_FALSE(r.body["anchors"].empty());
  EXPECT_EQ(s.get("/trace/rule/rule.nope").status, 404);
  r = s.get("/documents");
  ASSERT_EQ(r.status, 200);
  EXPECT_FALSE(r.body["documents"].empty());
}

TEST(Http, StopIsIdempotent) {
  for (int i = 0; i < 20; ++i) {
    ServerOptions options;
    options.port = 0;
    ControlServer server(fixtures::fixture("station_entry"), fixtures::fixture_registry(), options);
    server.start();
    server.stop();
    server.stop();
  }
}
