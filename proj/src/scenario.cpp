#include "railtrace/scenario.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

namespace railtrace {

using nlohmann::json;

namespace {

class Reader {
 public:
  Reader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ScenarioError(path_, "expected an object");
  }

  std::string at(const std::string& key) const { return path_ + "." + key; }

  const json* optional(const std::string& key) {
    used_.insert(key);
    auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }

  const json& required(const std::string& key) {
    const json* v = optional(key);
    if (!v) throw ScenarioError(path_, "missing key '" + key + "'");
    return *v;
  }

  std::string string(const std::string& key) {
    const json& v = required(key);
    if (!v.is_string()) throw ScenarioError(at(key), "expected a string");
    return v.get<std::string>();
  }

  std::string string_or(const std::string& key, const std::string& fallback) {
    const json* v = optional(key);
    if (!v) return fallback;
    if (!v->is_string()) throw ScenarioError(at(key), "expected a string");
    return v->get<std::string>();
  }

  double number(const std::string& key) {
    const json& v = required(key);
    if (!v.is_number()) throw ScenarioError(at(key), "expected a number");
    return v.get<double>();
  }

  double number_or(const std::string& key, double fallback) {
    const json* v = optional(key);
    if (!v) return fallback;
    if (!v->is_number()) throw ScenarioError(at(key), "expected a number");
    return v->get<double>();
  }

  bool boolean_or(const std::string& key, bool fallback) {
    const json* v = optional(key);
    if (!v) return fallback;
    if (!v->is_boolean()) throw ScenarioError(at(key), "expected a boolean");
    return v->get<bool>();
  }

  std::vector<std::string> strings_or_empty(const std::string& key) {
    std::vector<std::string> out;
    const json* v = optional(key);
    if (!v) return out;
    if (!v->is_array()) throw ScenarioError(at(key), "expected an array of strings");
    for (std::size_t i = 0; i < v->size(); ++i) {
      if (!(*v)[i].is_string())
        throw ScenarioError(at(key) + "[" + std::to_string(i) + "]", "expected a string");
      out.push_back((*v)[i].get<std::string>());
    }
    return out;
  }

  const json& array(const std::string& key, bool required_key = true) {
    static const json empty = json::array();
    const json* v = required_key ? &required(key) : optional(key);
    if (!v) return empty;
    if (!v->is_array()) throw ScenarioError(at(key), "expected an array");
    return *v;
  }

  void finish() const {
    for (const auto& [key, value] : j_.items())
      if (!used_.count(key)) throw ScenarioError(at(key), "unknown key");
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> used_;
};

std::string item_path(const std::string& base, std::size_t i) { return base + "[" + std::to_string(i) + "]"; }

template <typename Id>
std::vector<Id> to_ids(const std::vector<std::string>& values) {
  std::vector<Id> out;
  for (const auto& v : values) out.emplace_back(v);
  return out;
}

template <typename Id>
json ids_json(const std::vector<Id>& ids) {
  json out = json::array();
  for (const auto& id : ids) out.push_back(id.value);
  return out;
}

SignalState state_from(const std::string& text, const std::string& path) {
  auto s = parse_signal_state(text);
  if (!s) throw ScenarioError(path, "unknown signal state '" + text + "'");
  return *s;
}

ElementTags read_tags(Reader& r) {
  ElementTags tags;
  tags.concepts = r.strings_or_empty("concepts");
  tags.documents = r.strings_or_empty("documents");
  return tags;
}

void write_tags(json& out, const ElementTags& tags) {
  if (!tags.concepts.empty()) out["concepts"] = tags.concepts;
  if (!tags.documents.empty()) out["documents"] = tags.documents;
}

// Parses `Type:n`; returns -1 when the id does not have that shape.
long id_index(const std::string& id, const std::string& type) {
  if (id.size() <= type.size() + 1 || id.compare(0, type.size(), type) != 0 || id[type.size()] != ':') return -1;
  std::string digits = id.substr(type.size() + 1);
  if (digits.empty() || !std::all_of(digits.begin(), digits.end(), [](char c) { return c >= '0' && c <= '9'; }))
    return -1;
  if (digits.size() > 1 && digits[0] == '0') return -1;
  if (digits.size() > 15) return -1;
  return std::stol(digits);
}

void bump_counter(std::map<std::string, long>& counters, const std::string& id) {
  auto pos = id.find(':');
  if (pos == std::string::npos) return;
  std::string type = id.substr(0, pos);
  long index = id_index(id, type);
  if (index < 0) return;
  long& c = counters[type];
  c = std::max(c, index + 1);
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ScenarioError("", "cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

}  // namespace

// --- config ----------------------------------------------------------------

void SimConfig::set(const std::string& key, const json& value) {
  auto number = [&](double& field) {
    if (!value.is_number()) throw ScenarioError("$.config." + key, "expected a number");
    double v = value.get<double>();
    if (!(v >= 0.0)) throw ScenarioError("$.config." + key, "must be nonnegative");
    field = v;
  };
  if (key == "sight_speed_tunnel_kmh")
    number(sight_speed_tunnel_kmh);
  else if (key == "sight_speed_open_kmh")
    number(sight_speed_open_kmh);
  else if (key == "dispatcher_delay_s")
    number(dispatcher_delay_s);
  else if (key == "detection_range_m")
    number(detection_range_m);
  else if (key == "slow_speed_kmh")
    number(slow_speed_kmh);
  else if (key == "obstacle_margin_m")
    number(obstacle_margin_m);
  else if (key == "drive_on_sight_after_fault") {
    if (!value.is_boolean()) throw ScenarioError("$.config." + key, "expected a boolean");
    drive_on_sight_after_fault = value.get<bool>();
  } else {
    throw ScenarioError("$.config." + key, "unknown configuration key");
  }
  if ((key == "sight_speed_tunnel_kmh" || key == "sight_speed_open_kmh" || key == "slow_speed_kmh") &&
      !(value.get<double>() > 0.0))
    throw ScenarioError("$.config." + key, "speed must be positive");
}

json SimConfig::to_json() const {
  return {{"sight_speed_tunnel_kmh", sight_speed_tunnel_kmh},
          {"sight_speed_open_kmh", sight_speed_open_kmh},
          {"dispatcher_delay_s", dispatcher_delay_s},
          {"detection_range_m", detection_range_m},
          {"slow_speed_kmh", slow_speed_kmh},
          {"obstacle_margin_m", obstacle_margin_m},
          {"drive_on_sight_after_fault", drive_on_sight_after_fault}};
}

// --- scenario lookups ------------------------------------------------------

const Station* Scenario::find_station(const StationId& id) const {
  for (const auto& s : stations)
    if (s.id == id) return &s;
  return nullptr;
}

const TrainSpec* Scenario::find_train(const TrainId& id) const {
  for (const auto& t : trains)
    if (t.id == id) return &t;
  return nullptr;
}

std::vector<ElementId> Scenario::declared_ids() const {
  std::vector<ElementId> out;
  for (const auto& e : graph.elements) out.push_back(e.id);
  for (const auto& l : graph.logical) out.push_back(l.id);
  for (const auto& s : stations) out.push_back(s.id);
  for (const auto& t : trains) out.push_back(t.id);
  return out;
}

// --- JSON conversion -------------------------------------------------------

Scenario scenario_from_json(const json& j) {
  Scenario sc;
  Reader top(j, "$");
  const json& version = top.required("format_version");
  if (!version.is_number_integer() || version.get<int>() != kScenarioFormatVersion)
    throw ScenarioError("$.format_version", "unsupported format version (expected " +
                                                std::to_string(kScenarioFormatVersion) + ")");
  sc.name = top.string_or("name", "");

  if (const json* cfg = top.optional("config")) {
    if (!cfg->is_object()) throw ScenarioError("$.config", "expected an object");
    for (const auto& [key, value] : cfg->items()) sc.config.set(key, value);
  }

  const json& nodes = top.array("nodes");
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    Reader r(nodes[i], item_path("$.nodes", i));
    Node n;
    n.id = NodeId(r.string("id"));
    n.x = r.number_or("x", 0.0);
    n.y = r.number_or("y", 0.0);
    r.finish();
    sc.graph.nodes.push_back(std::move(n));
  }

  const json& edges = top.array("edges");
  for (std::size_t i = 0; i < edges.size(); ++i) {
    Reader r(edges[i], item_path("$.edges", i));
    Edge e;
    e.id = EdgeId(r.string("id"));
    e.from = NodeId(r.string("from"));
    e.to = NodeId(r.string("to"));
    e.length = r.number("length");
    e.sight_restricted = r.boolean_or("sight_restricted", false);
    r.finish();
    sc.graph.edges.push_back(std::move(e));
  }

  const json& elements = top.array("elements");
  for (std::size_t i = 0; i < elements.size(); ++i) {
    std::string path = item_path("$.elements", i);
    Reader r(elements[i], path);
    PhysicalElement el;
    el.id = ElementId(r.string("id"));
    std::string kind = r.string("kind");
    auto k = parse_element_kind(kind);
    if (!k) throw ScenarioError(r.at("kind"), "unknown element kind '" + kind + "'");
    el.kind = *k;
    el.node = NodeId(r.string("node"));
    el.facing = EdgeId(r.string("facing"));
    if (r.optional("state")) el.state = state_from(r.string("state"), r.at("state"));
    el.name = r.string_or("name", "");
    ElementTags tags = read_tags(r);
    r.finish();
    if (!tags.concepts.empty() || !tags.documents.empty()) sc.tags[el.id] = std::move(tags);
    sc.graph.elements.push_back(std::move(el));
  }

  const json& logical = top.array("logical", false);
  for (std::size_t i = 0; i < logical.size(); ++i) {
    Reader r(logical[i], item_path("$.logical", i));
    LogicalElement le;
    le.id = ElementId(r.string("id"));
    le.members = to_ids<ElementId>(r.strings_or_empty("members"));
    le.station = StationId(r.string_or("station", ""));
    ElementTags tags = read_tags(r);
    r.finish();
    if (!tags.concepts.empty() || !tags.documents.empty()) sc.tags[le.id] = std::move(tags);
    sc.graph.logical.push_back(std::move(le));
  }

  const json& stations = top.array("stations", false);
  for (std::size_t i = 0; i < stations.size(); ++i) {
    std::string path = item_path("$.stations", i);
    Reader r(stations[i], path);
    Station st;
    st.id = StationId(r.string("id"));
    st.name = r.string_or("name", "");
    const json& blocks = r.array("blocks", false);
    for (std::size_t b = 0; b < blocks.size(); ++b) {
      Reader br(blocks[b], item_path(path + ".blocks", b));
      Block block;
      block.entry_signal = ElementId(br.string("entry_signal"));
      block.edges = to_ids<EdgeId>(br.strings_or_empty("edges"));
      block.danger_points = to_ids<ElementId>(br.strings_or_empty("danger_points"));
      if (br.optional("proceed_aspect"))
        block.proceed_aspect = state_from(br.string("proceed_aspect"), br.at("proceed_aspect"));
      br.finish();
      st.blocks.push_back(std::move(block));
    }
    r.finish();
    sc.stations.push_back(std::move(st));
  }

  const json& trains = top.array("trains", false);
  for (std::size_t i = 0; i < trains.size(); ++i) {
    std::string path = item_path("$.trains", i);
    Reader r(trains[i], path);
    TrainSpec t;
    t.id = TrainId(r.string("id"));
    t.name = r.string_or("name", "");
    t.route = to_ids<EdgeId>(r.strings_or_empty("route"));
    t.offset = r.number_or("offset", 0.0);
    std::string departure = r.string_or("departure", "0/1");
    try {
      t.departure = Rational::parse(departure);
    } catch (const std::exception& e) {
      throw ScenarioError(r.at("departure"), e.what());
    }
    if (const json* p = r.optional("profile")) {
      Reader pr(*p, r.at("profile"));
      t.v_max_kmh = pr.number_or("v_max_kmh", t.v_max_kmh);
      t.accel = pr.number_or("accel", t.accel);
      t.brake = pr.number_or("brake", t.brake);
      t.length = pr.number_or("length", t.length);
      pr.finish();
    }
    t.ato = r.boolean_or("ato", false);
    t.tags = read_tags(r);
    r.finish();
    sc.trains.push_back(std::move(t));
  }

  if (const json* counters = top.optional("counters")) {
    if (!counters->is_object()) throw ScenarioError("$.counters", "expected an object");
    for (const auto& [key, value] : counters->items()) {
      if (!value.is_number_integer() || value.get<long>() < 0)
        throw ScenarioError("$.counters." + key, "expected a nonnegative integer");
      sc.counters[key] = value.get<long>();
    }
  }
  top.finish();

  for (const auto& id : sc.declared_ids()) bump_counter(sc.counters, id.value);
  return sc;
}

json scenario_to_json(const Scenario& sc) {
  json j;
  j["format_version"] = kScenarioFormatVersion;
  j["name"] = sc.name;
  j["config"] = sc.config.to_json();

  j["nodes"] = json::array();
  for (const auto& n : sc.graph.nodes) j["nodes"].push_back({{"id", n.id.value}, {"x", n.x}, {"y", n.y}});

  j["edges"] = json::array();
  for (const auto& e : sc.graph.edges)
    j["edges"].push_back({{"id", e.id.value},
                          {"from", e.from.value},
                          {"to", e.to.value},
                          {"length", e.length},
                          {"sight_restricted", e.sight_restricted}});

  j["elements"] = json::array();
  for (const auto& el : sc.graph.elements) {
    json o = {{"id", el.id.value},
              {"kind", std::string(to_string(el.kind))},
              {"node", el.node.value},
              {"facing", el.facing.value},
              {"name", el.name}};
    if (el.state) o["state"] = std::string(to_string(*el.state));
    if (auto it = sc.tags.find(el.id); it != sc.tags.end()) write_tags(o, it->second);
    j["elements"].push_back(std::move(o));
  }

  j["logical"] = json::array();
  for (const auto& le : sc.graph.logical) {
    json o = {{"id", le.id.value}, {"members", ids_json(le.members)}, {"station", le.station.value}};
    if (auto it = sc.tags.find(le.id); it != sc.tags.end()) write_tags(o, it->second);
    j["logical"].push_back(std::move(o));
  }

  j["stations"] = json::array();
  for (const auto& st : sc.stations) {
    json blocks = json::array();
    for (const auto& b : st.blocks) {
      json o = {{"entry_signal", b.entry_signal.value},
                {"edges", ids_json(b.edges)},
                {"danger_points", ids_json(b.danger_points)}};
      if (b.proceed_aspect) o["proceed_aspect"] = std::string(to_string(*b.proceed_aspect));
      blocks.push_back(std::move(o));
    }
    j["stations"].push_back({{"id", st.id.value}, {"name", st.name}, {"blocks", blocks}});
  }

  j["trains"] = json::array();
  for (const auto& t : sc.trains) {
    json o = {{"id", t.id.value},
              {"name", t.name},
              {"route", ids_json(t.route)},
              {"offset", t.offset},
              {"departure", t.departure.to_string()},
              {"profile", {{"v_max_kmh", t.v_max_kmh}, {"accel", t.accel}, {"brake", t.brake}, {"length", t.length}}},
              {"ato", t.ato}};
    write_tags(o, t.tags);
    j["trains"].push_back(std::move(o));
  }

  j["counters"] = json::object();
  for (const auto& [type, next] : sc.counters) j["counters"][type] = next;
  return j;
}

std::string canonical_text(const Scenario& scenario) { return scenario_to_json(scenario).dump(2) + "\n"; }

// --- validation ------------------------------------------------------------

std::vector<Violation> validate_scenario(const Scenario& sc) {
  std::vector<Violation> report = validate_graph(sc.graph);
  auto add = [&](std::string code, std::string subject, std::string message) {
    report.push_back({std::move(code), std::move(subject), std::move(message)});
  };
  const auto& g = sc.graph;

  for (const auto& el : g.elements)
    if (id_index(el.id.value, std::string(to_string(el.kind))) < 0)
      add("element.id-format", el.id.value, "element id must be " + std::string(to_string(el.kind)) + ":<index>");

  std::set<std::string> ids;
  for (const auto& id : sc.declared_ids())
    if (!ids.insert(id.value).second && !g.find_element(id) && !g.find_logical(id))
      add("id.duplicate", id.value, "duplicate declaration id");
  for (const auto& st : sc.stations)
    if (g.find_element(st.id) || g.find_logical(st.id)) add("id.duplicate", st.id.value, "id already used by an element");
  for (const auto& t : sc.trains)
    if (g.find_element(t.id) || g.find_logical(t.id) || sc.find_station(t.id))
      add("id.duplicate", t.id.value, "id already used by another declaration");

  for (const auto& le : g.logical)
    if (!le.station.empty() && !sc.find_station(le.station))
      add("logical.unknown-station", le.id.value, "unknown station " + le.station.value);

  for (const auto& st : sc.stations) {
    for (std::size_t b = 0; b < st.blocks.size(); ++b) {
      const Block& block = st.blocks[b];
      std::string subject = st.id.value + ".blocks[" + std::to_string(b) + "]";
      const LogicalElement* le = g.find_logical(block.entry_signal);
      if (!le) {
        add("block.unknown-entry", subject, "unknown entry signal " + block.entry_signal.value);
      } else {
        bool has_main = std::any_of(le->members.begin(), le->members.end(), [&](const ElementId& m) {
          const PhysicalElement* el = g.find_element(m);
          return el && el->kind == ElementKind::MainSignal;
        });
        if (!has_main) add("block.entry-without-signal", subject, block.entry_signal.value + " has no main signal");
        if (le->station != st.id)
          add("block.foreign-entry", subject, block.entry_signal.value + " is not controlled by " + st.id.value);
      }
      for (const auto& e : block.edges)
        if (!g.find_edge(e)) add("block.unknown-edge", subject, "unknown edge " + e.value);
      for (const auto& d : block.danger_points) {
        const PhysicalElement* el = g.find_element(d);
        if (!el || el->kind != ElementKind::PointOfDanger)
          add("block.danger-point", subject, d.value + " is not a point of danger");
      }
      if (block.proceed_aspect && *block.proceed_aspect != SignalState::Go &&
          *block.proceed_aspect != SignalState::Slow)
        add("block.proceed-aspect", subject, "proceed aspect must be GO or SLOW");
    }
  }

  for (const auto& t : sc.trains) {
    if (id_index(t.id.value, "Train") < 0) add("train.id-format", t.id.value, "train id must be Train:<index>");
    if (t.route.empty()) {
      add("train.route", t.id.value, "empty route");
      continue;
    }
    std::set<NodeId> visited;
    bool ok = true;
    for (std::size_t i = 0; i < t.route.size(); ++i) {
      const Edge* e = g.find_edge(t.route[i]);
      if (!e) {
        add("train.route", t.id.value, "unknown edge " + t.route[i].value);
        ok = false;
        break;
      }
      if (i == 0) visited.insert(e->from);
      if (i > 0) {
        const Edge* prev = g.find_edge(t.route[i - 1]);
        if (prev && prev->to != e->from) {
          add("train.route", t.id.value, "edge " + e->id.value + " does not continue from " + prev->id.value);
          ok = false;
        }
      }
      if (!visited.insert(e->to).second) {
        add("train.route", t.id.value, "route visits node " + e->to.value + " twice");
        ok = false;
      }
    }
    if (ok) {
      const Edge* first = g.find_edge(t.route.front());
      if (t.offset < 0.0 || t.offset >= first->length)
        add("train.offset", t.id.value, "offset outside the first route edge");
    }
    if (!(t.v_max_kmh > 0.0) || !(t.accel > 0.0) || !(t.brake > 0.0) || t.length < 0.0)
      add("train.profile", t.id.value, "v_max, accel and brake must be positive and length nonnegative");
  }
  return report;
}

Scenario parse_scenario(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ScenarioError("$", std::string("malformed JSON: ") + e.what());
  }
  Scenario sc = scenario_from_json(j);
  auto report = validate_scenario(sc);
  if (!report.empty()) {
    std::string message;
    for (const auto& v : report) {
      if (!message.empty()) message += "; ";
      message += v.subject + ": " + v.code + ": " + v.message;
    }
    throw ScenarioError(report.front().subject, message);
  }
  return sc;
}

Scenario load_scenario(const std::filesystem::path& path) { return parse_scenario(read_text(path)); }

void save_scenario(const Scenario& scenario, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ScenarioError("", "cannot write " + path.string());
  out << canonical_text(scenario);
}

std::map<ElementId, int> creation_lines(const Scenario& scenario) {
  static const std::set<std::string> sections = {"elements", "logical", "stations", "trains"};
  std::map<ElementId, int> out;
  std::istringstream in(canonical_text(scenario));
  std::string line;
  std::string section;
  int number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (line.rfind("  \"", 0) == 0 && line.size() > 3 && line[3] != ' ') {
      auto close = line.find('"', 3);
      section = line.substr(3, close - 3);
      continue;
    }
    static const std::string prefix = "      \"id\": ";
    if (sections.count(section) && line.rfind(prefix, 0) == 0) {
      std::string value = line.substr(prefix.size());
      if (!value.empty() && value.back() == ',') value.pop_back();
      out[ElementId(json::parse(value).get<std::string>())] = number;
    }
  }
  return out;
}

void register_scenario(TraceRegistry& registry, const Scenario& scenario) {
  auto lines = creation_lines(scenario);
  for (const auto& id : scenario.declared_ids()) {
    ElementTags tags;
    if (auto it = scenario.tags.find(id); it != scenario.tags.end()) tags = it->second;
    if (const TrainSpec* t = scenario.find_train(id)) tags = t->tags;
    registry.register_element(id, id.value, lines.at(id), tags);
  }
}

// --- editing ---------------------------------------------------------------

namespace {

struct Editor {
  Scenario sc;
  EditResult result;

  ElementId next_id(const std::string& type) {
    long& c = sc.counters[type];
    return make_element_id(type, c++);
  }

  void delete_element(const ElementId& id) {
    auto& els = sc.graph.elements;
    els.erase(std::remove_if(els.begin(), els.end(), [&](const PhysicalElement& e) { return e.id == id; }), els.end());
    sc.tags.erase(id);
    for (auto& le : sc.graph.logical) {
      auto it = std::find(le.members.begin(), le.members.end(), id);
      if (it != le.members.end()) {
        le.members.erase(it);
        result.warnings.push_back("removed " + id.value + " from " + le.id.value);
      }
    }
    for (auto& st : sc.stations)
      for (auto& b : st.blocks) {
        auto it = std::find(b.danger_points.begin(), b.danger_points.end(), id);
        if (it != b.danger_points.end()) {
          b.danger_points.erase(it);
          result.warnings.push_back("removed " + id.value + " from a block of " + st.id.value);
        }
      }
  }

  void delete_edge(const EdgeId& id) {
    auto& edges = sc.graph.edges;
    edges.erase(std::remove_if(edges.begin(), edges.end(), [&](const Edge& e) { return e.id == id; }), edges.end());
    std::vector<ElementId> facing;
    for (const auto& el : sc.graph.elements)
      if (el.facing == id) facing.push_back(el.id);
    for (const auto& el : facing) {
      result.warnings.push_back("deleted " + el.value + " facing " + id.value);
      delete_element(el);
    }
    for (auto& st : sc.stations)
      for (auto& b : st.blocks) {
        auto it = std::find(b.edges.begin(), b.edges.end(), id);
        if (it != b.edges.end()) {
          b.edges.erase(it);
          result.warnings.push_back("removed " + id.value + " from a block of " + st.id.value);
        }
      }
    std::vector<TrainId> trains;
    for (const auto& t : sc.trains)
      if (std::find(t.route.begin(), t.route.end(), id) != t.route.end()) trains.push_back(t.id);
    for (const auto& t : trains) {
      result.warnings.push_back("deleted " + t.value + " whose route used " + id.value);
      delete_train(t);
    }
  }

  void delete_node(const NodeId& id) {
    auto& nodes = sc.graph.nodes;
    nodes.erase(std::remove_if(nodes.begin(), nodes.end(), [&](const Node& n) { return n.id == id; }), nodes.end());
    std::vector<EdgeId> incident;
    for (const auto& e : sc.graph.edges)
      if (e.from == id || e.to == id) incident.push_back(e.id);
    for (const auto& e : incident) {
      result.warnings.push_back("deleted " + e.value + " incident to " + id.value);
      delete_edge(e);
    }
    std::vector<ElementId> on_node;
    for (const auto& el : sc.graph.elements)
      if (el.node == id) on_node.push_back(el.id);
    for (const auto& el : on_node) {
      result.warnings.push_back("deleted " + el.value + " on " + id.value);
      delete_element(el);
    }
  }

  void delete_logical(const ElementId& id) {
    auto& ls = sc.graph.logical;
    ls.erase(std::remove_if(ls.begin(), ls.end(), [&](const LogicalElement& l) { return l.id == id; }), ls.end());
    sc.tags.erase(id);
    for (auto& st : sc.stations) {
      auto before = st.blocks.size();
      st.blocks.erase(std::remove_if(st.blocks.begin(), st.blocks.end(),
                                     [&](const Block& b) { return b.entry_signal == id; }),
                      st.blocks.end());
      if (st.blocks.size() != before) result.warnings.push_back("removed blocks of " + st.id.value + " entered at " + id.value);
    }
  }

  void delete_station(const StationId& id) {
    auto& ss = sc.stations;
    ss.erase(std::remove_if(ss.begin(), ss.end(), [&](const Station& s) { return s.id == id; }), ss.end());
    for (auto& le : sc.graph.logical)
      if (le.station == id) {
        le.station = StationId();
        result.warnings.push_back(le.id.value + " is no longer controlled by a station");
      }
  }

  void delete_train(const TrainId& id) {
    auto& ts = sc.trains;
    ts.erase(std::remove_if(ts.begin(), ts.end(), [&](const TrainSpec& t) { return t.id == id; }), ts.end());
  }

  void operator()(const AddNode& op) {
    if (op.id.empty()) throw ScenarioError("id", "node id must not be empty");
    if (sc.graph.find_node(op.id)) throw ScenarioError("id", "node " + op.id.value + " already exists");
    sc.graph.nodes.push_back({op.id, op.x, op.y});
    result.created.push_back(op.id.value);
  }

  void operator()(const AddEdge& op) {
    if (op.id.empty()) throw ScenarioError("id", "edge id must not be empty");
    if (sc.graph.find_edge(op.id)) throw ScenarioError("id", "edge " + op.id.value + " already exists");
    if (!sc.graph.find_node(op.from)) throw ScenarioError("from", "unknown node " + op.from.value);
    if (!sc.graph.find_node(op.to)) throw ScenarioError("to", "unknown node " + op.to.value);
    sc.graph.edges.push_back({op.id, op.from, op.to, op.length, op.sight_restricted});
    result.created.push_back(op.id.value);
  }

  void operator()(const AddElement& op) {
    if (!sc.graph.find_node(op.node)) throw ScenarioError("node", "unknown node " + op.node.value);
    if (!sc.graph.find_edge(op.facing)) throw ScenarioError("facing", "unknown edge " + op.facing.value);
    PhysicalElement el;
    el.id = next_id(std::string(to_string(op.kind)));
    el.kind = op.kind;
    el.node = op.node;
    el.facing = op.facing;
    el.state = op.state;
    if (has_signal_state(op.kind) && !el.state) el.state = SignalState::Halt;
    el.name = op.name;
    if (!op.tags.concepts.empty() || !op.tags.documents.empty()) sc.tags[el.id] = op.tags;
    result.created.push_back(el.id.value);
    sc.graph.elements.push_back(std::move(el));
  }

  void operator()(const DeleteEntity& op) {
    if (sc.graph.find_node(NodeId(op.id)))
      delete_node(NodeId(op.id));
    else if (sc.graph.find_edge(EdgeId(op.id)))
      delete_edge(EdgeId(op.id));
    else if (sc.graph.find_element(ElementId(op.id)))
      delete_element(ElementId(op.id));
    else if (sc.graph.find_logical(ElementId(op.id)))
      delete_logical(ElementId(op.id));
    else if (sc.find_station(StationId(op.id)))
      delete_station(StationId(op.id));
    else if (sc.find_train(TrainId(op.id)))
      delete_train(TrainId(op.id));
    else
      throw ScenarioError("id", "unknown entity " + op.id);
  }

  void operator()(const CopySubgraph& op) {
    std::set<NodeId> selected;
    for (const auto& n : op.nodes) {
      if (!sc.graph.find_node(n)) throw ScenarioError("nodes", "unknown node " + n.value);
      selected.insert(n);
    }
    std::vector<const Edge*> inner;
    for (const auto& e : sc.graph.edges)
      if (selected.count(e.from) && selected.count(e.to)) inner.push_back(&e);

    int k = 1;
    auto suffix = [&](const std::string& id) { return id + ".copy" + std::to_string(k); };
    auto free_suffix = [&] {
      for (const auto& n : op.nodes)
        if (sc.graph.find_node(NodeId(suffix(n.value)))) return false;
      for (const auto* e : inner)
        if (sc.graph.find_edge(EdgeId(suffix(e->id.value)))) return false;
      return true;
    };
    while (!free_suffix()) ++k;

    std::vector<Edge> new_edges;
    std::map<EdgeId, EdgeId> edge_map;
    for (const auto* e : inner) {
      EdgeId id(suffix(e->id.value));
      edge_map[e->id] = id;
      new_edges.push_back({id, NodeId(suffix(e->from.value)), NodeId(suffix(e->to.value)), e->length, e->sight_restricted});
    }
    std::vector<PhysicalElement> originals;
    for (const auto& el : sc.graph.elements)
      if (selected.count(el.node)) originals.push_back(el);

    std::set<NodeId> seen;
    for (const auto& n : op.nodes) {
      if (!seen.insert(n).second) continue;
      const Node* src = sc.graph.find_node(n);
      Node copy{NodeId(suffix(n.value)), src->x + op.dx, src->y + op.dy};
      result.created.push_back(copy.id.value);
      sc.graph.nodes.push_back(copy);
    }
    for (auto& e : new_edges) {
      result.created.push_back(e.id.value);
      sc.graph.edges.push_back(std::move(e));
    }
    for (const auto& el : originals) {
      auto facing = edge_map.find(el.facing);
      if (facing == edge_map.end()) {
        result.warnings.push_back("not copied: " + el.id.value + " faces an edge outside the selection");
        continue;
      }
      PhysicalElement copy = el;
      copy.id = next_id(std::string(to_string(el.kind)));
      copy.node = NodeId(suffix(el.node.value));
      copy.facing = facing->second;
      if (auto tags = sc.tags.find(el.id); tags != sc.tags.end()) sc.tags[copy.id] = tags->second;
      result.created.push_back(copy.id.value);
      sc.graph.elements.push_back(std::move(copy));
    }
  }

  void operator()(const AssignLogical& op) {
    for (const auto& m : op.members)
      if (!sc.graph.find_element(m)) throw ScenarioError("members", "unknown element " + m.value);
    if (!op.station.empty() && !sc.find_station(op.station))
      throw ScenarioError("station", "unknown station " + op.station.value);
    if (op.logical.empty()) {
      LogicalElement le{next_id("LogicalElement"), op.members, op.station};
      result.created.push_back(le.id.value);
      sc.graph.logical.push_back(std::move(le));
      return;
    }
    for (auto& le : sc.graph.logical) {
      if (le.id == op.logical) {
        le.members = op.members;
        le.station = op.station;
        return;
      }
    }
    throw ScenarioError("logical", "unknown logical element " + op.logical.value);
  }

  void operator()(const SetConfig& op) { sc.config.set(op.key, op.value); }
};

}  // namespace

EditResult apply_edit(const Scenario& scenario, const EditOp& op) {
  Editor editor{scenario, {}};
  std::visit(editor, op);
  editor.result.scenario = std::move(editor.sc);
  return std::move(editor.result);
}

EditOp edit_op_from_json(const json& j) {
  Reader r(j, "$");
  std::string op = r.string("op");
  EditOp out;
  if (op == "add_node") {
    out = AddNode{NodeId(r.string("id")), r.number_or("x", 0.0), r.number_or("y", 0.0)};
  } else if (op == "add_edge") {
    out = AddEdge{EdgeId(r.string("id")), NodeId(r.string("from")), NodeId(r.string("to")), r.number("length"),
                  r.boolean_or("sight_restricted", false)};
  } else if (op == "add_element") {
    AddElement a;
    std::string kind = r.string("kind");
    auto k = parse_element_kind(kind);
    if (!k) throw ScenarioError(r.at("kind"), "unknown element kind '" + kind + "'");
    a.kind = *k;
    a.node = NodeId(r.string("node"));
    a.facing = EdgeId(r.string("facing"));
    if (r.optional("state")) a.state = state_from(r.string("state"), r.at("state"));
    a.name = r.string_or("name", "");
    a.tags = read_tags(r);
    out = std::move(a);
  } else if (op == "delete") {
    out = DeleteEntity{r.string("id")};
  } else if (op == "copy_subgraph") {
    out = CopySubgraph{to_ids<NodeId>(r.strings_or_empty("nodes")), r.number_or("dx", 0.0), r.number_or("dy", 0.0)};
  } else if (op == "assign_logical") {
    out = AssignLogical{ElementId(r.string_or("logical", "")), to_ids<ElementId>(r.strings_or_empty("members")),
                        StationId(r.string_or("station", ""))};
  } else if (op == "set_config") {
    out = SetConfig{r.string("key"), r.required("value")};
  } else {
    throw ScenarioError("$.op", "unknown edit operation '" + op + "'");
  }
  r.finish();
  return out;
}

}  // namespace railtrace
