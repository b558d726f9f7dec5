#include "railtrace/simulation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <set>

#include "railtrace/rules.hpp"

namespace railtrace {

namespace {

constexpr double kEps = 1e-6;

std::string fmt3(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.3f", x);
  return buf;
}

bool proceeds(SignalState s) { return s == SignalState::Go || s == SignalState::Slow; }

std::vector<std::string> anchors_of(std::initializer_list<RuleId> ids) {
  std::vector<std::string> out;
  for (const auto& id : ids)
    for (const auto& a : rules::anchors(id))
      if (std::find(out.begin(), out.end(), a) == out.end()) out.push_back(a);
  return out;
}

}  // namespace

std::string_view to_string(TrainStatus status) {
  switch (status) {
    case TrainStatus::Scheduled:
      return "scheduled";
    case TrainStatus::Standing:
      return "standing";
    case TrainStatus::Moving:
      return "moving";
    case TrainStatus::Arrived:
      return "arrived";
  }
  return "?";
}

struct Simulation::Impl {
  struct Train;
  struct Dispatcher;

  struct BlockState {
    StationId station;
    const Block* decl = nullptr;
    std::optional<TrainId> occupant;
  };

  Scenario sc;
  InfrastructureGraph graph;
  Kernel kernel;
  std::set<ElementId> faulted;
  std::vector<BlockState> blocks;
  std::map<ElementId, int> pod_count;
  std::vector<Obstacle> obstacles;
  std::vector<std::unique_ptr<Train>> trains;
  std::vector<std::unique_ptr<Dispatcher>> dispatchers;

  Impl(Scenario scenario, KernelOptions options);

  void emit_msg(const std::string& subject, std::string text, std::initializer_list<RuleId> rule_ids) {
    kernel.emit({subject, Message{std::move(text), anchors_of(rule_ids)}, {}});
  }
  void emit_ch(const ElementId& id, std::string state) { kernel.emit({id.value, StateChange{std::move(state)}, {}}); }

  SignalState state_of(const ElementId& id) const {
    const PhysicalElement* el = graph.find_element(id);
    return el && el->state ? *el->state : SignalState::Invalid;
  }

  void set_state(const ElementId& id, SignalState s, std::vector<std::pair<ElementId, SignalState>>& changed_mains) {
    PhysicalElement* el = graph.find_element(id);
    if (!el || !el->state || *el->state == s) return;
    el->state = s;
    emit_ch(id, std::string(to_string(s)));
    if (el->kind == ElementKind::MainSignal) changed_mains.emplace_back(id, s);
  }

  void station_update(const StationId& station);
  void relay(const ElementId& main, SignalState state);
  Train* find_train(const TrainId& id);
  const Train* find_train(const TrainId& id) const;
  void spawn_dispatcher(const ElementId& signal);
};

// --- trains ----------------------------------------------------------------

struct Simulation::Impl::Train {
  struct RouteSignal {
    std::size_t node;
    ElementId id;
    double s;
  };
  struct Region {
    enum Kind { Slow, Sight } kind;
    double start;
    double end;
    double speed;
    ElementId ref;
  };
  struct Order {
    ElementId signal;
    bool drive_on_sight;
  };
  struct Occupation {
    std::size_t block;
    std::set<ElementId> remaining;
  };

  Impl& w;
  TrainSpec spec;
  TrainProfile profile;
  ProcessId pid = 0;

  std::vector<EdgeId> route;
  std::vector<NodeId> nodes;
  std::vector<double> node_s;
  std::vector<RouteSignal> mains;
  std::map<ElementId, double> sighting_point;
  std::vector<double> zs10_s;

  TrainStatus status = TrainStatus::Scheduled;
  bool waiting_departure = false;
  double s = 0.0;
  double v = 0.0;
  std::size_t next_node = 1;
  bool at_node = false;

  MotionPlan plan;
  Rational plan_start;
  Rational plan_end;
  double target_s = 0.0;
  double target_v = 0.0;

  std::map<ElementId, SignalState> expected;
  std::set<ElementId> sighted;
  std::set<ElementId> crossed;
  std::vector<Order> orders;
  std::vector<Region> regions;
  bool halt_ordered = false;
  double halt_at = 0.0;
  std::optional<double> emergency_at;
  std::optional<double> obstacle_s;
  std::vector<std::pair<double, ElementId>> rear_clears;
  std::vector<Occupation> occupations;
  bool pending = false;
  std::string ato_decision;

  Train(Impl& world, const TrainSpec& t) : w(world), spec(t), profile(t.profile()), route(t.route) {
    const Edge* first = w.graph.find_edge(route.front());
    nodes.push_back(first->from);
    node_s.push_back(0.0);
    for (const auto& id : route) {
      const Edge* e = w.graph.find_edge(id);
      nodes.push_back(e->to);
      node_s.push_back(node_s.back() + e->length);
    }
    for (std::size_t k = 1; k < nodes.size(); ++k) {
      for (const auto* el : w.graph.elements_at(nodes[k])) {
        if (el->facing != route[k - 1]) continue;
        if (el->kind == ElementKind::MainSignal) mains.push_back({k, el->id, node_s[k]});
        if (el->kind == ElementKind::Zs10) zs10_s.push_back(node_s[k]);
      }
    }
    for (std::size_t k = 1; k < nodes.size(); ++k) {
      for (const auto* el : w.graph.elements_at(nodes[k])) {
        if (el->facing != route[k - 1]) continue;
        if (el->kind != ElementKind::PointOfVisibility && el->kind != ElementKind::PreSignal) continue;
        for (const auto* le : w.graph.logical_of(el->id))
          for (const auto& m : le->members)
            for (const auto& rs : mains)
              if (rs.id == m && rs.node > k && !sighting_point.count(m)) sighting_point[m] = node_s[k];
      }
    }
    s = spec.offset;
  }

  const RouteSignal* route_signal(const ElementId& id) const {
    for (const auto& rs : mains)
      if (rs.id == id) return &rs;
    return nullptr;
  }

  bool has_order(const ElementId& signal) const {
    return std::any_of(orders.begin(), orders.end(), [&](const Order& o) { return o.signal == signal; });
  }

  const NodeId& mv_node() const { return at_node ? nodes[next_node] : nodes[next_node - 1]; }

  double max_speed() const { return profile.v_max; }

  void notify() {
    pending = true;
    if (status == TrainStatus::Moving) w.kernel.wake(pid);
  }

  void emit_mv(const NodeId& node, double velocity, bool crossing) {
    std::int64_t mm = to_mm_s(velocity);
    if (crossing) mm = std::max<std::int64_t>(mm, 1);
    w.kernel.emit({spec.id.value, Movement{node.value, mm}, {}});
  }

  void msg(std::string text, std::initializer_list<RuleId> rule_ids) {
    w.emit_msg(spec.id.value, std::move(text), rule_ids);
  }

  std::optional<double> route_position(const EdgeId& edge, double offset) const {
    for (std::size_t i = 0; i < route.size(); ++i)
      if (route[i] == edge) return node_s[i] + offset;
    return std::nullopt;
  }

  // --- knowledge ------------------------------------------------------------

  double slow_end(const RouteSignal& rs) const {
    for (double z : zs10_s)
      if (z > rs.s + kEps) return z;
    return node_s.back();
  }

  void apply_expect(const ElementId& signal, SignalState state, bool from_pif) {
    if (crossed.count(signal)) return;
    const RouteSignal* rs = route_signal(signal);
    if (!rs) return;
    auto old = expected.find(signal);
    bool changed = old == expected.end() || old->second != state;
    expected[signal] = state;
    sighted.insert(signal);
    regions.erase(std::remove_if(regions.begin(), regions.end(),
                                 [&](const Region& r) {
                                   return r.kind == Region::Slow && r.ref == signal && r.start > s + kEps;
                                 }),
                  regions.end());
    if (state == SignalState::Slow)
      regions.push_back({Region::Slow, rs->s, slow_end(*rs), kmh_to_ms(w.sc.config.slow_speed_kmh), signal});
    if (from_pif && changed && state != SignalState::Go) {
      RuleId rule = state == SignalState::Slow ? rules::signal_slow : rules::signal_halt_approach;
      msg("expect train=" + spec.id.value + " signal=" + signal.value + " state=" + std::string(to_string(state)),
          {rule});
    }
  }

  void sight_update() {
    for (const auto& rs : mains) {
      if (crossed.count(rs.id)) continue;
      if (!sighted.count(rs.id)) {
        auto it = sighting_point.find(rs.id);
        if (it == sighting_point.end() || it->second <= s + kEps) apply_expect(rs.id, w.state_of(rs.id), false);
      }
      break;  // only the next main signal can be sighted without a point of visibility
    }
  }

  void add_sight_regions(const ElementId& signal) {
    const RouteSignal* rs = route_signal(signal);
    if (!rs) return;
    std::size_t end_node = nodes.size() - 1;
    for (const auto& other : mains)
      if (other.node > rs->node) {
        end_node = other.node;
        break;
      }
    for (std::size_t i = rs->node; i < end_node; ++i) {
      const Edge* e = w.graph.find_edge(route[i]);
      double kmh = e->sight_restricted ? w.sc.config.sight_speed_tunnel_kmh : w.sc.config.sight_speed_open_kmh;
      regions.push_back({Region::Sight, node_s[i], node_s[i + 1], kmh_to_ms(kmh), signal});
    }
  }

  void add_order(const ElementId& signal, bool drive_on_sight) {
    if (!has_order(signal)) orders.push_back({signal, drive_on_sight});
    if (drive_on_sight) add_sight_regions(signal);
  }

  void drop_regions() {
    regions.erase(std::remove_if(regions.begin(), regions.end(), [&](const Region& r) { return r.end <= s + kEps; }),
                  regions.end());
  }

  void refresh_obstacle() {
    if (!spec.ato) return;
    std::optional<double> nearest;
    const Obstacle* which = nullptr;
    for (const auto& o : w.obstacles) {
      auto pos = route_position(o.edge, o.offset);
      if (!pos || *pos <= s + kEps) continue;
      if (*pos - w.sc.config.detection_range_m > s + kEps) continue;
      if (!nearest || *pos < *nearest) {
        nearest = pos;
        which = &o;
      }
    }
    if (nearest && (!obstacle_s || std::abs(*obstacle_s - *nearest) > kEps)) {
      obstacle_s = nearest;
      ato_decision = "halt-for-obstacle";
      msg("ato train=" + spec.id.value + " decision=halt-for-obstacle obstacle=" + which->edge.value + "@" +
              fmt3(which->offset) + " distance=" + fmt3(*nearest - s),
          {rules::ato_obstacle});
    } else if (!nearest && obstacle_s) {
      obstacle_s.reset();
      ato_decision = "obstacle-cleared";
      msg("ato train=" + spec.id.value + " decision=obstacle-cleared", {rules::ato_obstacle});
    }
  }

  // --- motion ---------------------------------------------------------------

  double stop_target() const {
    if (emergency_at) return *emergency_at;
    double stop = node_s.back();
    for (const auto& rs : mains) {
      if (crossed.count(rs.id) || !sighted.count(rs.id) || has_order(rs.id)) continue;
      auto it = expected.find(rs.id);
      if (it != expected.end() && !proceeds(it->second)) stop = std::min(stop, rs.s);
    }
    if (halt_ordered) stop = std::min(stop, halt_at);
    if (obstacle_s) stop = std::min(stop, *obstacle_s - w.sc.config.obstacle_margin_m);
    return stop;
  }

  double limit_at(double x) const {
    double limit = max_speed();
    for (const auto& r : regions)
      if (r.start <= x + kEps && x < r.end - kEps) limit = std::min(limit, r.speed);
    return limit;
  }

  WaitCondition start_plan(double waypoint, double v_end, double limit) {
    double distance = waypoint - s;
    try {
      plan = plan_segment(v, v_end, distance, limit, profile);
    } catch (const InfeasiblePlan&) {
      double v_e = std::sqrt(std::max(0.0, v * v - 2.0 * profile.brake * distance));
      msg("violation braking train=" + spec.id.value + " position=" + fmt3(s) + " speed=" + fmt3(v) +
              " required=" + fmt3(v_end) + " at=" + fmt3(waypoint),
          {rules::train_braking_violation});
      v_end = v_e;
      plan = plan_segment(v, v_end, distance, std::max(v, v_end), profile);
    }
    plan.origin = s;
    plan_start = w.kernel.now();
    Rational duration = plan.grid_duration();
    plan_end = plan_start + duration;
    target_s = waypoint;
    target_v = v_end;
    status = TrainStatus::Moving;
    return wait_for(duration);
  }

  WaitCondition stand() {
    status = TrainStatus::Standing;
    v = 0.0;
    pending = false;
    return wait_until([this] { return pending; });
  }

  WaitCondition plan_next() {
    refresh_obstacle();
    drop_regions();
    double stop = stop_target();
    if (v <= kEps) {
      v = 0.0;
      if (stop <= s + kEps) return stand();
    } else if (!emergency_at && v * v > 2.0 * profile.brake * (stop - s) + 1e-6) {
      msg("violation braking train=" + spec.id.value + " position=" + fmt3(s) + " speed=" + fmt3(v) +
              " stop=" + fmt3(stop),
          {rules::train_braking_violation});
      emergency_at = s + braking_distance(v, profile.brake);
      stop = *emergency_at;
    }

    double waypoint = stop;
    auto consider = [&](double x) {
      if (x > s + kEps && x < waypoint) waypoint = x;
    };
    if (next_node < nodes.size()) consider(node_s[next_node]);
    for (const auto& rc : rear_clears) consider(rc.first);
    for (const auto& r : regions) {
      consider(r.start);
      consider(r.end);
    }
    if (spec.ato)
      for (const auto& o : w.obstacles)
        if (auto pos = route_position(o.edge, o.offset); pos && *pos > s + kEps)
          consider(*pos - w.sc.config.detection_range_m);
    if (waypoint <= s + kEps) return stand();

    double limit = limit_at(s);
    double v_end = 0.0;
    if (std::abs(waypoint - stop) > kEps) {
      const double b = profile.brake;
      v_end = std::min(limit, limit_at(waypoint));
      v_end = std::min(v_end, std::sqrt(2.0 * b * (stop - waypoint)));
      for (const auto& r : regions)
        if (r.start >= waypoint - kEps)
          v_end = std::min(v_end, std::sqrt(r.speed * r.speed + 2.0 * b * std::max(0.0, r.start - waypoint)));
      v_end = std::min(v_end, std::sqrt(v * v + 2.0 * profile.accel * (waypoint - s)));
    } else {
      waypoint = stop;
    }
    return start_plan(waypoint, v_end, limit);
  }

  // --- passing infrastructure ------------------------------------------------

  void trigger_pifs(std::size_t k) {
    for (const auto* el : w.graph.elements_at(nodes[k])) {
      for (const auto& t : trigger_front(w.graph, *el, route[k - 1])) {
        if (const auto* e = std::get_if<ExpectState>(&t.info)) {
          if (e->signal) apply_expect(*e->signal, e->state, true);
        } else if (std::holds_alternative<AreaEnd>(t.info)) {
          regions.erase(std::remove_if(regions.begin(), regions.end(),
                                       [&](const Region& r) { return r.kind == Region::Slow && r.start <= s + kEps; }),
                        regions.end());
          msg("area-end train=" + spec.id.value + " node=" + nodes[k].value, {rules::zs10_area_end});
        }
      }
    }
  }

  void pod_occupy(const ElementId& pod, double clear_at) {
    if (w.pod_count[pod]++ == 0) w.emit_ch(pod, "OCCUPIED");
    rear_clears.emplace_back(clear_at, pod);
    std::stable_sort(rear_clears.begin(), rear_clears.end(),
                     [](const auto& a, const auto& b) { return a.first < b.first; });
  }

  void release_block(std::size_t b) {
    auto& block = w.blocks[b];
    if (block.occupant == spec.id) {
      block.occupant.reset();
      w.station_update(block.station);
    }
  }

  void pod_free(const ElementId& pod) {
    if (--w.pod_count[pod] == 0) w.emit_ch(pod, "FREE");
    for (auto it = occupations.begin(); it != occupations.end();) {
      if (it->remaining.erase(pod) && it->remaining.empty()) {
        std::size_t b = it->block;
        it = occupations.erase(it);
        release_block(b);
      } else {
        ++it;
      }
    }
  }

  void process_rear_clears() {
    while (!rear_clears.empty() && rear_clears.front().first <= s + kEps) {
      ElementId pod = rear_clears.front().second;
      rear_clears.erase(rear_clears.begin());
      pod_free(pod);
    }
  }

  std::set<ElementId> route_danger_points(const Block& block, std::size_t from_node) const {
    std::set<ElementId> out;
    for (const auto& d : block.danger_points) {
      const PhysicalElement* el = w.graph.find_element(d);
      if (!el) continue;
      for (std::size_t k = std::max<std::size_t>(from_node, 1); k < nodes.size(); ++k)
        if (nodes[k] == el->node && el->facing == route[k - 1]) out.insert(d);
    }
    return out;
  }

  void occupy_block(std::size_t b, std::size_t from_node) {
    auto& block = w.blocks[b];
    block.occupant = spec.id;
    occupations.push_back({b, route_danger_points(*block.decl, from_node)});
  }

  void cross(std::size_t k) {
    for (const auto& rs : mains) {
      if (rs.node != k) continue;
      SignalState actual = w.state_of(rs.id);
      bool ordered = has_order(rs.id);
      if (!proceeds(actual) && !ordered)
        msg("violation spad train=" + spec.id.value + " signal=" + rs.id.value, {rules::train_braking_violation});
      orders.erase(std::remove_if(orders.begin(), orders.end(), [&](const Order& o) { return o.signal == rs.id; }),
                   orders.end());
      if (actual == SignalState::Slow &&
          std::none_of(regions.begin(), regions.end(), [&](const Region& r) { return r.ref == rs.id; }))
        regions.push_back({Region::Slow, rs.s, slow_end(rs), kmh_to_ms(w.sc.config.slow_speed_kmh), rs.id});
      crossed.insert(rs.id);
      for (const auto* le : w.graph.logical_of(rs.id)) {
        for (std::size_t b = 0; b < w.blocks.size(); ++b) {
          if (w.blocks[b].decl->entry_signal != le->id) continue;
          occupy_block(b, k);
          w.station_update(w.blocks[b].station);
        }
      }
    }
    for (const auto* el : w.graph.elements_at(nodes[k]))
      if (el->kind == ElementKind::PointOfDanger && el->facing == route[k - 1])
        pod_occupy(el->id, node_s[k] + profile.length);
    next_node = k + 1;
    at_node = false;
    sight_update();
  }

  // --- process ---------------------------------------------------------------

  WaitCondition finish() {
    msg("arrive train=" + spec.id.value + " node=" + nodes.back().value, {rules::train_arrival});
    while (!rear_clears.empty()) {
      ElementId pod = rear_clears.front().second;
      rear_clears.erase(rear_clears.begin());
      pod_free(pod);
    }
    auto remaining = std::move(occupations);
    occupations.clear();
    for (const auto& o : remaining) release_block(o.block);
    status = TrainStatus::Arrived;
    v = 0.0;
    return Terminated{};
  }

  WaitCondition arrive() {
    s = target_s;
    v = target_v <= kEps ? 0.0 : target_v;
    if (next_node < nodes.size() && std::abs(node_s[next_node] - s) < kEps) {
      std::size_t k = next_node;
      s = node_s[k];
      emit_mv(nodes[k], v, v > 0.0);
      trigger_pifs(k);
      if (v > 0.0)
        cross(k);
      else
        at_node = true;
    } else if (v == 0.0) {
      emit_mv(mv_node(), 0.0, false);
    }
    process_rear_clears();
    drop_regions();
    if (v == 0.0 && emergency_at && *emergency_at <= s + kEps) emergency_at.reset();
    if (at_node && next_node == nodes.size() - 1) return finish();
    if (v > 0.0) return plan_next();
    return stand_or_go();
  }

  std::optional<std::string> ato_gate() {
    const RouteSignal* governing = nullptr;
    for (const auto& rs : mains)
      if (!crossed.count(rs.id)) {
        governing = &rs;
        break;
      }
    std::string signal_part;
    bool signal_clear = true;
    if (governing && sighted.count(governing->id)) {
      SignalState st = expected.at(governing->id);
      signal_part = " signal=" + governing->id.value + " state=" + std::string(to_string(st));
      signal_clear = proceeds(st) || has_order(governing->id);
    }
    std::string decision;
    if (obstacle_s)
      decision = "hold-for-obstacle";
    else if (!signal_clear)
      decision = "wait-for-signal";
    else
      decision = "depart";
    std::string key = decision + signal_part;
    if (key != ato_decision) {
      ato_decision = key;
      msg("ato train=" + spec.id.value + " decision=" + decision + signal_part, {rules::ato_obstacle});
    }
    if (decision == "depart") return std::nullopt;
    return decision;
  }

  WaitCondition stand_or_go() {
    status = TrainStatus::Standing;
    v = 0.0;
    refresh_obstacle();
    if (emergency_at && *emergency_at <= s + kEps) emergency_at.reset();
    if (halt_ordered) {
      halt_at = s;
      return stand();
    }
    if (stop_target() <= s + kEps) {
      if (spec.ato) ato_gate();
      return stand();
    }
    if (spec.ato && ato_gate()) return stand();

    emit_mv(mv_node(), 0.0, false);
    msg("depart train=" + spec.id.value + " node=" + mv_node().value, {rules::train_departure});
    if (at_node) cross(next_node);
    return plan_next();
  }

  WaitCondition on_wake() {
    pending = false;
    const Rational& now = w.kernel.now();
    if (now >= plan_end) return arrive();
    Rational elapsed = now - plan_start;
    if (elapsed == Rational(0)) return plan_next();
    double t = elapsed.to_double();
    if (t >= plan.duration()) return arrive();
    MotionState st = position_at(plan, t);
    s = st.offset;
    v = st.velocity;
    emit_mv(mv_node(), v, false);
    if (v <= kEps) return stand_or_go();
    return plan_next();
  }

  WaitCondition step() {
    switch (status) {
      case TrainStatus::Scheduled:
        if (!waiting_departure) {
          waiting_departure = true;
          return wait_for(spec.departure - w.kernel.now());
        }
        status = TrainStatus::Standing;
        for (const auto& [signal, point] : sighting_point)
          if (point <= s + kEps) apply_expect(signal, w.state_of(signal), false);
        sight_update();
        return stand_or_go();
      case TrainStatus::Standing:
        pending = false;
        return stand_or_go();
      case TrainStatus::Moving:
        return on_wake();
      case TrainStatus::Arrived:
        break;
    }
    return Terminated{};
  }

  MotionState current_state() const {
    if (status != TrainStatus::Moving) return {s, v};
    Rational elapsed = w.kernel.now() - plan_start;
    if (elapsed > plan.grid_duration()) return {target_s, target_v};
    return position_at(plan, elapsed);
  }
};

// --- dispatcher -------------------------------------------------------------

struct Simulation::Impl::Dispatcher {
  Impl& w;
  ElementId signal;
  std::optional<std::size_t> block;
  std::string subject;
  int phase = 0;
  bool first = true;

  bool ahead_of(const Train& t) const {
    return t.status != TrainStatus::Arrived && t.route_signal(signal) && !t.crossed.count(signal);
  }
  bool remaining() const {
    return std::any_of(w.trains.begin(), w.trains.end(), [&](const auto& t) { return ahead_of(*t); });
  }
  bool outstanding() const {
    return std::any_of(w.trains.begin(), w.trains.end(),
                       [&](const auto& t) { return ahead_of(*t) && t->has_order(signal); });
  }
  bool block_free() const { return !block || !w.blocks[*block].occupant; }
  Train* candidate() const {
    Train* best = nullptr;
    double best_distance = 0.0;
    for (const auto& t : w.trains) {
      if (!ahead_of(*t) || t->has_order(signal)) continue;
      double d = t->route_signal(signal)->s - t->current_state().offset;
      if (!best || d < best_distance - kEps) {
        best = t.get();
        best_distance = d;
      }
    }
    return best;
  }
  bool issuable() const { return !outstanding() && block_free() && candidate(); }

  WaitCondition guard() {
    return wait_until([this] { return !remaining() || issuable(); });
  }

  WaitCondition step() {
    switch (phase) {
      case 0:
        phase = 1;
        return guard();
      case 1:
        if (!remaining()) return Terminated{};
        phase = 2;
        return wait_for(Rational::ceil_to_grid(w.sc.config.dispatcher_delay_s));
      default:
        phase = 1;
        if (issuable()) {
          Train* t = candidate();
          bool sight = first && w.sc.config.drive_on_sight_after_fault;
          first = false;
          t->add_order(signal, sight);
          if (sight)
            w.emit_msg(subject,
                       "order depart-past-halt train=" + t->spec.id.value + " signal=" + signal.value + " sight=yes",
                       {rules::dispatcher_depart_past_halt, rules::dispatcher_drive_on_sight});
          else
            w.emit_msg(subject,
                       "order depart-past-halt train=" + t->spec.id.value + " signal=" + signal.value + " sight=no",
                       {rules::dispatcher_depart_past_halt});
          t->notify();
        }
        return guard();
    }
  }
};

// --- world -------------------------------------------------------------------

Simulation::Impl::Impl(Scenario scenario, KernelOptions options)
    : sc(std::move(scenario)), graph(sc.graph), kernel(options) {
  auto report = validate_scenario(sc);
  if (!report.empty())
    throw ScenarioError(report.front().subject, report.front().code + ": " + report.front().message);

  for (const auto& st : sc.stations)
    for (const auto& b : st.blocks) blocks.push_back({st.id, &b, std::nullopt});

  for (const auto& el : graph.elements)
    kernel.emit({el.id.value, Creation{std::string(to_string(el.kind)), el.node.value}, {}});
  for (const auto& le : graph.logical) kernel.emit({le.id.value, Creation{"LogicalElement", ""}, {}});
  for (const auto& st : sc.stations) kernel.emit({st.id.value, Creation{"Station", ""}, {}});

  for (const auto& t : sc.trains) {
    trains.push_back(std::make_unique<Train>(*this, t));
    kernel.emit({t.id.value, Creation{"Train", trains.back()->nodes.front().value}, {}});
  }
  for (auto& t : trains)
    for (std::size_t b = 0; b < blocks.size(); ++b)
      if (std::find(blocks[b].decl->edges.begin(), blocks[b].decl->edges.end(), t->route.front()) !=
          blocks[b].decl->edges.end())
        t->occupy_block(b, 1);

  for (const auto& st : sc.stations) {
    StationId id = st.id;
    kernel.spawn([this, id] {
      station_update(id);
      return WaitCondition{Terminated{}};
    });
  }
  for (auto& t : trains) {
    Train* raw = t.get();
    raw->pid = kernel.spawn([raw] { return raw->step(); });
  }
}

Simulation::Impl::Train* Simulation::Impl::find_train(const TrainId& id) {
  for (auto& t : trains)
    if (t->spec.id == id) return t.get();
  return nullptr;
}

const Simulation::Impl::Train* Simulation::Impl::find_train(const TrainId& id) const {
  for (const auto& t : trains)
    if (t->spec.id == id) return t.get();
  return nullptr;
}

void Simulation::Impl::station_update(const StationId& station) {
  std::vector<std::pair<ElementId, SignalState>> changed;
  for (const auto& le : graph.logical) {
    if (le.station != station) continue;
    bool has_block = false;
    bool occupied = false;
    SignalState proceed = SignalState::Go;
    for (const auto& b : blocks) {
      if (b.decl->entry_signal != le.id) continue;
      if (!has_block) proceed = b.decl->proceed_aspect.value_or(SignalState::Go);
      has_block = true;
      if (b.occupant) occupied = true;
    }
    std::optional<SignalState> base;
    bool main_faulted = false;
    for (const auto& m : le.members) {
      const PhysicalElement* el = graph.find_element(m);
      if (!el || el->kind != ElementKind::MainSignal) continue;
      if (faulted.count(m)) main_faulted = true;
      if (!base) {
        if (has_block)
          base = occupied ? SignalState::Halt : proceed;
        else if (const PhysicalElement* declared = sc.graph.find_element(m))
          base = declared->state;
      }
    }
    if (!base) base = SignalState::Halt;
    SignalState main_state = main_faulted ? SignalState::Invalid : *base;
    for (const auto& m : le.members) {
      const PhysicalElement* el = graph.find_element(m);
      if (!el || !el->state) continue;
      SignalState target = faulted.count(m)                        ? SignalState::Invalid
                           : el->kind == ElementKind::MainSignal ? main_state
                                                                  : presignal_aspect(main_state);
      set_state(m, target, changed);
    }
  }
  for (const auto& [id, state] : changed) relay(id, state);
}

void Simulation::Impl::relay(const ElementId& main, SignalState state) {
  for (auto& t : trains) {
    if (t->status == TrainStatus::Arrived || t->status == TrainStatus::Scheduled) continue;
    if (!t->sighted.count(main) || t->crossed.count(main)) continue;
    t->apply_expect(main, state, false);
    t->notify();
  }
}

void Simulation::Impl::spawn_dispatcher(const ElementId& signal) {
  std::optional<std::size_t> block;
  std::string subject = signal.value;
  for (const auto* le : graph.logical_of(signal)) {
    if (!le->station.empty()) subject = le->station.value;
    for (std::size_t b = 0; b < blocks.size(); ++b)
      if (blocks[b].decl->entry_signal == le->id && !block) block = b;
  }
  dispatchers.push_back(std::make_unique<Dispatcher>(Dispatcher{*this, signal, block, subject}));
  Dispatcher* raw = dispatchers.back().get();
  kernel.spawn([raw] { return raw->step(); });
}

// --- public interface ---------------------------------------------------------

Simulation::Simulation(Scenario scenario, KernelOptions options)
    : impl_(std::make_unique<Impl>(std::move(scenario), options)) {}

Simulation::~Simulation() = default;

const Scenario& Simulation::scenario() const { return impl_->sc; }
Kernel& Simulation::kernel() { return impl_->kernel; }
const Kernel& Simulation::kernel() const { return impl_->kernel; }
const Rational& Simulation::now() const { return impl_->kernel.now(); }
const std::vector<SimEvent>& Simulation::events() const { return impl_->kernel.events(); }
const InfrastructureGraph& Simulation::graph() const { return impl_->graph; }
bool Simulation::faulted(const ElementId& element) const { return impl_->faulted.count(element) > 0; }
std::vector<Obstacle> Simulation::obstacles() const { return impl_->obstacles; }

std::vector<SimEvent> Simulation::step_until(const Rational& limit) { return impl_->kernel.step_until(limit); }

std::vector<SimEvent> Simulation::run_to_completion() { return impl_->kernel.run_to_completion(); }

void Simulation::inject_fault(const ElementId& signal) {
  auto& w = *impl_;
  PhysicalElement* el = w.graph.find_element(signal);
  if (!el) throw InteractionError("unknown element " + signal.value);
  if (!has_signal_state(el->kind)) throw InteractionError(signal.value + " has no signal state");
  if (w.faulted.count(signal)) return;
  w.faulted.insert(signal);

  bool controlled = false;
  for (const auto* le : w.graph.logical_of(signal))
    if (!le->station.empty()) {
      w.station_update(le->station);
      controlled = true;
    }
  if (!controlled || el->state != SignalState::Invalid) {
    std::vector<std::pair<ElementId, SignalState>> changed;
    w.set_state(signal, SignalState::Invalid, changed);
    for (const auto& [id, state] : changed) w.relay(id, state);
  }
  w.emit_msg(signal.value, "fault signal=" + signal.value + " state=INVALID", {rules::fault_inject});
  if (el->kind == ElementKind::MainSignal) w.spawn_dispatcher(signal);
}

void Simulation::give_order(const TrainId& train, const ElementId& signal, bool drive_on_sight) {
  auto& w = *impl_;
  Impl::Train* t = w.find_train(train);
  if (!t) throw InteractionError("unknown train " + train.value);
  if (t->status == TrainStatus::Arrived) throw InteractionError(train.value + " has arrived");
  if (!t->route_signal(signal) || t->crossed.count(signal))
    throw InteractionError(signal.value + " is not a main signal ahead of " + train.value);
  t->add_order(signal, drive_on_sight);
  std::string text = "order depart-past-halt train=" + train.value + " signal=" + signal.value +
                     (drive_on_sight ? " sight=yes" : " sight=no");
  if (drive_on_sight)
    w.emit_msg(train.value, text, {rules::dispatcher_depart_past_halt, rules::dispatcher_drive_on_sight});
  else
    w.emit_msg(train.value, text, {rules::dispatcher_depart_past_halt});
  t->notify();
}

void Simulation::resume_normal(const TrainId& train) {
  auto& w = *impl_;
  Impl::Train* t = w.find_train(train);
  if (!t) throw InteractionError("unknown train " + train.value);
  if (t->status == TrainStatus::Arrived) throw InteractionError(train.value + " has arrived");
  t->halt_ordered = false;
  t->regions.erase(std::remove_if(t->regions.begin(), t->regions.end(),
                                  [](const auto& r) { return r.kind == Impl::Train::Region::Sight; }),
                   t->regions.end());
  w.emit_msg(train.value, "order resume train=" + train.value, {rules::train_halt_order});
  t->notify();
}

void Simulation::halt_order(const TrainId& train) {
  auto& w = *impl_;
  Impl::Train* t = w.find_train(train);
  if (!t) throw InteractionError("unknown train " + train.value);
  if (t->status == TrainStatus::Arrived) throw InteractionError(train.value + " has arrived");
  MotionState st = t->current_state();
  t->halt_ordered = true;
  t->halt_at = st.offset + braking_distance(st.velocity, t->profile.brake);
  w.emit_msg(train.value, "order halt train=" + train.value, {rules::train_halt_order});
  t->notify();
}

void Simulation::set_obstacle(const EdgeId& edge, double offset, bool present) {
  auto& w = *impl_;
  const Edge* e = w.graph.find_edge(edge);
  if (!e) throw InteractionError("unknown edge " + edge.value);
  if (!(offset >= 0.0 && offset <= e->length)) throw InteractionError("offset outside edge " + edge.value);
  auto it = std::find_if(w.obstacles.begin(), w.obstacles.end(),
                         [&](const Obstacle& o) { return o.edge == edge && std::abs(o.offset - offset) < 1e-9; });
  if (present == (it != w.obstacles.end())) return;
  if (present)
    w.obstacles.push_back({edge, offset});
  else
    w.obstacles.erase(it);
  w.emit_msg(edge.value, "obstacle edge=" + edge.value + " offset=" + fmt3(offset) + " present=" + (present ? "yes" : "no"),
             {rules::ato_obstacle});
  for (auto& t : w.trains)
    if (t->spec.ato && (t->status == TrainStatus::Moving || t->status == TrainStatus::Standing)) t->notify();
}

std::optional<TrainView> Simulation::train(const TrainId& id) const {
  const Impl::Train* t = impl_->find_train(id);
  if (!t) return std::nullopt;
  TrainView view;
  view.id = t->spec.id;
  view.status = t->status;
  MotionState st = t->current_state();
  view.position = st.offset;
  view.velocity = st.velocity;
  std::size_t i = 0;
  while (i + 1 < t->route.size() && st.offset >= t->node_s[i + 1]) ++i;
  view.edge = t->route[i];
  view.edge_offset = st.offset - t->node_s[i];
  view.ato = t->spec.ato;
  view.halt_ordered = t->halt_ordered;
  view.detected_obstacle = t->obstacle_s;
  for (const auto& o : t->orders) view.orders.push_back(o.signal);
  return view;
}

std::vector<TrainView> Simulation::trains() const {
  std::vector<TrainView> out;
  for (const auto& t : impl_->trains) out.push_back(*train(t->spec.id));
  return out;
}

std::optional<TrainId> Simulation::block_occupant(const StationId& station, std::size_t block) const {
  std::size_t index = 0;
  for (const auto& b : impl_->blocks) {
    if (b.station != station) continue;
    if (index++ == block) return b.occupant;
  }
  throw InteractionError("unknown block " + std::to_string(block) + " of " + station.value);
}

}  // namespace railtrace
