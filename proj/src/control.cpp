#include "railtrace/control.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "railtrace/rules.hpp"

namespace railtrace {

using nlohmann::json;

namespace {

ControlError bad(const std::string& what) { return ControlError(ControlError::Kind::BadRequest, what); }

Rational parse_time(const json& j, const std::string& where) {
  if (!j.is_string()) throw bad(where + ": expected a rational \"N/D\" string");
  try {
    return Rational::parse(j.get<std::string>());
  } catch (const std::exception& e) {
    throw bad(where + ": " + e.what());
  }
}

std::vector<std::string> merged(std::initializer_list<RuleId> ids) {
  std::vector<std::string> out;
  for (const auto& id : ids)
    for (const auto& a : rules::anchors(id))
      if (std::find(out.begin(), out.end(), a) == out.end()) out.push_back(a);
  return out;
}

/// Checks that `args` is an object with only the method's parameters, of the
/// right JSON types, and all required ones present.
void check_args(const ExposedMethod& method, const json& args) {
  if (!args.is_object()) throw bad(method.name + ": args must be an object");
  for (const auto& [key, value] : args.items()) {
    auto p = std::find_if(method.parameters.begin(), method.parameters.end(),
                          [&](const MethodParameter& mp) { return mp.name == key; });
    if (p == method.parameters.end()) throw bad(method.name + ": unknown argument '" + key + "'");
    bool ok = p->type == "number" ? value.is_number() : p->type == "boolean" ? value.is_boolean() : value.is_string();
    if (!ok) throw bad(method.name + ": argument '" + key + "' must be a " + p->type);
  }
  for (const auto& p : method.parameters)
    if (p.required && !args.contains(p.name)) throw bad(method.name + ": missing argument '" + p.name + "'");
}

json element_json(const PhysicalElement& el, const Simulation& sim) {
  json j = {{"id", el.id.value},
            {"kind", std::string(to_string(el.kind))},
            {"node", el.node.value},
            {"facing", el.facing.value},
            {"name", el.name}};
  if (el.state) j["state"] = std::string(to_string(*el.state));
  if (has_signal_state(el.kind)) j["faulted"] = sim.faulted(el.id);
  j["logical"] = json::array();
  for (const auto* le : sim.graph().logical_of(el.id)) {
    j["logical"].push_back(le->id.value);
    if (!le->station.empty()) j["station"] = le->station.value;
  }
  return j;
}

json edge_json(const Edge& e, const Simulation& sim) {
  json j = {{"id", e.id.value},
            {"kind", "Edge"},
            {"from", e.from.value},
            {"to", e.to.value},
            {"length", e.length},
            {"sight_restricted", e.sight_restricted},
            {"obstacles", json::array()}};
  for (const auto& o : sim.obstacles())
    if (o.edge == e.id) j["obstacles"].push_back(o.offset);
  return j;
}

json train_json(const TrainSpec& spec, const TrainView& v) {
  json j = {{"id", v.id.value},
            {"kind", "Train"},
            {"name", spec.name},
            {"status", std::string(to_string(v.status))},
            {"edge", v.edge.value},
            {"edge_offset", v.edge_offset},
            {"position", v.position},
            {"velocity", v.velocity},
            {"ato", v.ato},
            {"halt_ordered", v.halt_ordered},
            {"orders", json::array()},
            {"departure", spec.departure.to_string()},
            {"profile",
             {{"v_max_kmh", spec.v_max_kmh}, {"accel", spec.accel}, {"brake", spec.brake}, {"length", spec.length}}}};
  for (const auto& o : v.orders) j["orders"].push_back(o.value);
  if (v.detected_obstacle) j["detected_obstacle"] = *v.detected_obstacle;
  return j;
}

}  // namespace

std::string_view to_string(ControlError::Kind kind) {
  switch (kind) {
    case ControlError::Kind::NotFound:
      return "not-found";
    case ControlError::Kind::BadRequest:
      return "bad-request";
    case ControlError::Kind::Busy:
      return "busy";
  }
  return "?";
}

std::vector<ExposedMethod> exposed_methods(const Scenario& scenario, const std::string& id) {
  if (const PhysicalElement* el = scenario.graph.find_element(ElementId(id))) {
    if (el->kind == ElementKind::MainSignal || el->kind == ElementKind::PreSignal)
      return {{"breakSignal", {}, merged({rules::fault_inject})}};
    return {};
  }
  if (scenario.graph.find_edge(EdgeId(id)))
    return {{"setObstacle", {{"offset", "number", true}, {"present", "boolean", false}}, merged({rules::ato_obstacle})}};
  if (scenario.find_train(TrainId(id)))
    return {{"giveOrder",
             {{"order", "OrderKind", true}, {"signal", "ElementId", false}, {"drive_on_sight", "boolean", false}},
             merged({rules::dispatcher_depart_past_halt, rules::dispatcher_drive_on_sight, rules::train_halt_order})},
            {"haltOrder", {}, merged({rules::train_halt_order})}};
  throw ControlError(ControlError::Kind::NotFound, "unknown object " + id);
}

json to_json(const ExposedMethod& method) {
  json params = json::array();
  for (const auto& p : method.parameters) params.push_back({{"name", p.name}, {"type", p.type}, {"required", p.required}});
  return {{"name", method.name}, {"parameters", params}, {"anchors", method.anchors}};
}

// --- scripts -------------------------------------------------------------------

std::vector<ScriptStep> parse_script(const json& j) {
  if (!j.is_array()) throw bad("script: expected a JSON array");
  std::vector<ScriptStep> steps;
  for (std::size_t i = 0; i < j.size(); ++i) {
    std::string where = "script[" + std::to_string(i) + "]";
    const json& entry = j[i];
    if (!entry.is_object() || !entry.contains("at") || !entry.contains("command"))
      throw bad(where + ": expected {\"at\", \"command\"}");
    for (const auto& [key, value] : entry.items())
      if (key != "at" && key != "command") throw bad(where + ": unknown key '" + key + "'");
    ScriptStep step{parse_time(entry["at"], where + ".at"), entry["command"]};
    if (step.at < Rational(0)) throw bad(where + ".at: negative time");
    if (!steps.empty() && step.at < steps.back().at)
      throw bad(where + ".at: " + step.at.to_string() + " is before the previous step at " +
                steps.back().at.to_string());
    const json& c = step.command;
    if (!c.is_object() || c.value("type", "") != "invoke" || !c.contains("object") || !c["object"].is_string() ||
        !c.contains("method") || !c["method"].is_string())
      throw bad(where + ".command: expected {\"type\":\"invoke\",\"object\",\"method\",\"args\"}");
    if (c.contains("args") && !c["args"].is_object()) throw bad(where + ".command.args: expected an object");
    steps.push_back(std::move(step));
  }
  return steps;
}

std::vector<ScriptStep> load_script(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw bad("cannot read script " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  json j;
  try {
    j = json::parse(buf.str());
  } catch (const json::parse_error& e) {
    throw bad("script " + path.string() + ": malformed JSON: " + e.what());
  }
  return parse_script(j);
}

json script_to_json(const std::vector<ScriptStep>& steps) {
  json out = json::array();
  for (const auto& s : steps) out.push_back({{"at", s.at.to_string()}, {"command", s.command}});
  return out;
}

// --- world ---------------------------------------------------------------------

World::World(Scenario scenario, KernelOptions options) : sim_(std::move(scenario), options) {}

json World::list_objects() const {
  json out = json::array();
  for (const auto& el : sim_.graph().elements) out.push_back(element_json(el, sim_));
  for (const auto& e : sim_.graph().edges) out.push_back(edge_json(e, sim_));
  for (const auto& t : scenario().trains) out.push_back(train_json(t, *sim_.train(t.id)));
  return out;
}

json World::object(const std::string& id) const {
  if (const PhysicalElement* el = sim_.graph().find_element(ElementId(id))) return element_json(*el, sim_);
  if (const Edge* e = sim_.graph().find_edge(EdgeId(id))) return edge_json(*e, sim_);
  if (const TrainSpec* t = scenario().find_train(TrainId(id))) return train_json(*t, *sim_.train(t->id));
  throw ControlError(ControlError::Kind::NotFound, "unknown object " + id);
}

json World::invoke(const std::string& id, const std::string& method, const json& raw_args) {
  auto methods = exposed_methods(scenario(), id);
  auto m = std::find_if(methods.begin(), methods.end(), [&](const ExposedMethod& e) { return e.name == method; });
  if (m == methods.end()) throw ControlError(ControlError::Kind::NotFound, id + " exposes no method " + method);
  json args = raw_args.is_null() ? json::object() : raw_args;
  check_args(*m, args);

  std::size_t first = events().size();
  try {
    if (method == "breakSignal") {
      sim_.inject_fault(ElementId(id));
    } else if (method == "setObstacle") {
      sim_.set_obstacle(EdgeId(id), args["offset"].get<double>(), args.value("present", true));
    } else if (method == "haltOrder") {
      sim_.halt_order(TrainId(id));
    } else if (method == "giveOrder") {
      std::string order = args["order"].get<std::string>();
      if (order == "DepartPastHalt") {
        if (!args.contains("signal")) throw bad("giveOrder: DepartPastHalt needs a signal");
        sim_.give_order(TrainId(id), ElementId(args["signal"].get<std::string>()), args.value("drive_on_sight", false));
      } else if (order == "ResumeNormal") {
        sim_.resume_normal(TrainId(id));
      } else {
        throw bad("giveOrder: unknown order '" + order + "' (DepartPastHalt or ResumeNormal)");
      }
    }
  } catch (const InteractionError& e) {
    throw bad(e.what());
  }
  json indices = json::array();
  for (std::size_t i = first; i < events().size(); ++i) indices.push_back(i);
  return {{"object", id}, {"method", method}, {"time", sim_.now().to_string()}, {"events", indices}};
}

json World::apply(const json& command) {
  if (!command.is_object() || command.value("type", "") != "invoke")
    throw bad("unsupported command; expected {\"type\":\"invoke\", ...}");
  if (!command.contains("object") || !command["object"].is_string() || !command.contains("method") ||
      !command["method"].is_string())
    throw bad("invoke command needs string 'object' and 'method'");
  return invoke(command["object"].get<std::string>(), command["method"].get<std::string>(),
                command.value("args", json::object()));
}

void World::set_limit(const Rational& t) {
  if (t < sim_.now()) throw bad("limit " + t.to_string() + " is before now " + sim_.now().to_string());
  limit_ = t;
}

void World::run() { sim_.step_until(limit_); }

void World::run_to_completion() {
  sim_.run_to_completion();
  finished_ = true;
  limit_ = max(limit_, sim_.now());
}

json World::clock_json() const {
  return {{"now", sim_.now().to_string()},
          {"limit", limit_.to_string()},
          {"state", finished_ ? "finished" : "blocked"},
          {"events", events().size()}};
}

std::vector<SimEvent> run_batch(const Scenario& scenario, const std::vector<ScriptStep>& script,
                                const std::optional<Rational>& until, KernelOptions options) {
  World world(scenario, options);
  for (const auto& step : script) {
    if (until && *until < step.at)
      throw bad("script step at " + step.at.to_string() + " lies beyond --until " + until->to_string());
    world.set_limit(step.at);
    world.run();
    world.apply(step.command);
  }
  if (until) {
    world.set_limit(*until);
    world.run();
  } else {
    world.run_to_completion();
  }
  return world.events();
}

}  // namespace railtrace
