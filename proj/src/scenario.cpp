#include "medium/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <nlohmann/json.hpp>
#include <set>
#include <sstream>

#include "medium/error.hpp"

namespace medium::scenario {

using nlohmann::json;

EntityKinematics MotionScript::at(std::uint64_t t) const {
  const double secs = static_cast<double>(t) / 1000.0;
  if (kind == Kind::ConstantVelocity) return {start + velocity * secs, velocity, t};

  if (points.size() < 2 || speed <= 0.0) return {points.empty() ? Vec2{} : points.front(), {}, t};
  std::vector<double> lengths;
  const std::size_t segments = loop ? points.size() : points.size() - 1;
  double total = 0.0;
  for (std::size_t i = 0; i < segments; ++i) {
    lengths.push_back(distance(points[i], points[(i + 1) % points.size()]));
    total += lengths.back();
  }
  double travelled = speed * secs;
  if (loop) {
    travelled = std::fmod(travelled, total);
  } else if (travelled >= total) {
    return {points.back(), {}, t};
  }
  for (std::size_t i = 0; i < segments; ++i) {
    if (travelled <= lengths[i] || i + 1 == segments) {
      const Vec2 a = points[i];
      const Vec2 b = points[(i + 1) % points.size()];
      const Vec2 dir = lengths[i] > 0.0 ? (b - a) * (1.0 / lengths[i]) : Vec2{};
      return {a + dir * travelled, dir * speed, t};
    }
    travelled -= lengths[i];
  }
  return {points.back(), {}, t};
}

double MotionScript::max_speed() const { return kind == Kind::ConstantVelocity ? norm(velocity) : speed; }

namespace {

[[noreturn]] void invalid(const std::string& path, const std::string& what) {
  throw Error(Errc::ValidationError, path + ": " + what);
}

/// Typed, path-aware view over a JSON object that tracks which keys were used.
class Fields {
 public:
  Fields(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) invalid(path_, "expected an object");
  }

  /// Rejects any key that was never looked at.
  void finish() const {
    for (const auto& [key, value] : j_.items()) {
      if (!used_.contains(key)) invalid(sub(key), "unknown key");
    }
  }

  /// Optional key: nullptr when absent.
  const json* find(const std::string& key) {
    used_.insert(key);
    auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }

  std::string sub(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

  const json& raw(const std::string& key) {
    used_.insert(key);
    if (!j_.contains(key)) invalid(sub(key), "missing required key");
    return j_.at(key);
  }

  template <typename T>
  T get(const std::string& key) {
    const json& v = raw(key);
    return convert<T>(v, sub(key));
  }

  template <typename T>
  T get(const std::string& key, T fallback) {
    const json* v = find(key);
    return v == nullptr ? fallback : convert<T>(*v, sub(key));
  }

  template <typename T>
  static T convert(const json& v, const std::string& path) {
    if constexpr (std::is_same_v<T, bool>) {
      if (!v.is_boolean()) invalid(path, "expected a boolean");
      return v.get<bool>();
    } else if constexpr (std::is_same_v<T, std::string>) {
      if (!v.is_string()) invalid(path, "expected a string");
      return v.get<std::string>();
    } else if constexpr (std::is_same_v<T, double>) {
      if (!v.is_number()) invalid(path, "expected a number");
      const double d = v.get<double>();
      if (!std::isfinite(d)) invalid(path, "expected a finite number");
      return d;
    } else if constexpr (std::is_integral_v<T>) {
      if (!v.is_number_integer() || (v.is_number_integer() && !v.is_number_unsigned() && v.get<long long>() < 0)) {
        invalid(path, "expected a non-negative integer");
      }
      const auto u = v.get<std::uint64_t>();
      if (u > static_cast<std::uint64_t>(std::numeric_limits<T>::max())) invalid(path, "integer out of range");
      return static_cast<T>(u);
    } else if constexpr (std::is_same_v<T, Vec2>) {
      if (!v.is_array() || v.size() != 2 || !v[0].is_number() || !v[1].is_number()) {
        invalid(path, "expected [x, y]");
      }
      return Vec2{convert<double>(v[0], path + "[0]"), convert<double>(v[1], path + "[1]")};
    }
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> used_;
};

const json& array_at(Fields& f, const std::string& key) {
  const json& v = f.raw(key);
  if (!v.is_array()) invalid(f.sub(key), "expected an array");
  return v;
}

const json* optional_array(Fields& f, const std::string& key) {
  const json* v = f.find(key);
  if (v != nullptr && !v->is_array()) invalid(f.sub(key), "expected an array");
  return v;
}

std::string index(const std::string& base, std::size_t i) { return base + "[" + std::to_string(i) + "]"; }

MotionScript parse_motion(const json& j, const std::string& path) {
  Fields f(j, path);
  MotionScript m;
  const auto type = f.get<std::string>("type");
  if (type == "constant_velocity") {
    m.kind = MotionScript::Kind::ConstantVelocity;
    m.start = f.get<Vec2>("start", Vec2{});
    m.velocity = f.get<Vec2>("velocity", Vec2{});
  } else if (type == "stationary") {
    m.kind = MotionScript::Kind::ConstantVelocity;
    m.start = f.get<Vec2>("start", Vec2{});
  } else if (type == "waypoints") {
    m.kind = MotionScript::Kind::Waypoints;
    m.speed = f.get<double>("speed");
    m.loop = f.get<bool>("loop", false);
    const json& pts = array_at(f, "points");
    for (std::size_t i = 0; i < pts.size(); ++i)
      m.points.push_back(Fields::convert<Vec2>(pts[i], index(f.sub("points"), i)));
    if (m.points.size() < 2) invalid(f.sub("points"), "need at least two waypoints");
    if (!(m.speed > 0.0)) invalid(f.sub("speed"), "must be > 0");
  } else {
    invalid(f.sub("type"), "unknown motion type '" + type + "'");
  }
  f.finish();
  return m;
}

EntityConfig parse_entity(const json& j, const std::string& path) {
  Fields f(j, path);
  EntityConfig e;
  e.id = f.get<std::uint32_t>("id");
  e.class_id = f.get<std::string>("class", "default");
  e.motion = parse_motion(f.raw("motion"), f.sub("motion"));
  if (const json* schedule = f.find("fire")) {
    Fields fire(*schedule, f.sub("fire"));
    const auto start = fire.get<std::uint64_t>("start_ms");
    const auto interval = fire.get<std::uint64_t>("interval_ms");
    const auto count = fire.get<std::uint64_t>("count");
    fire.finish();
    if (interval == 0 && count > 1) invalid(fire.sub("interval_ms"), "must be > 0");
    for (std::uint64_t i = 0; i < count; ++i) e.fire_times.push_back(start + i * interval);
  }
  if (const json* at = optional_array(f, "fire_at")) {
    for (std::size_t i = 0; i < at->size(); ++i) {
      e.fire_times.push_back(Fields::convert<std::uint64_t>((*at)[i], index(f.sub("fire_at"), i)));
    }
  }
  f.finish();
  std::sort(e.fire_times.begin(), e.fire_times.end());
  return e;
}

LinkSpec parse_link(const json& j, const std::string& path) {
  Fields f(j, path);
  LinkSpec l;
  l.link_id = f.get<std::uint32_t>("id");
  const json& ends = array_at(f, "endpoints");
  if (ends.size() != 2) invalid(f.sub("endpoints"), "expected two client ids");
  l.endpoint_a = Fields::convert<std::uint32_t>(ends[0], f.sub("endpoints") + "[0]");
  l.endpoint_b = Fields::convert<std::uint32_t>(ends[1], f.sub("endpoints") + "[1]");
  l.base_delay_ms = f.get<double>("base_delay_ms");
  l.jitter_ms = f.get<double>("jitter_ms", 0.0);
  l.loss_prob = f.get<double>("loss_prob", 0.0);
  const auto kind = f.get<std::string>("kind", "relay");
  if (kind == "relay") {
    l.kind = LinkKind::Relay;
  } else if (kind == "direct") {
    l.kind = LinkKind::Direct;
  } else {
    invalid(f.sub("kind"), "expected 'relay' or 'direct'");
  }
  l.available = f.get<bool>("available", true);
  f.finish();
  return l;
}

Region parse_region(const json& j, const std::string& path) {
  Fields f(j, path);
  const auto type = f.get<std::string>("type");
  Region region;
  if (type == "rect") {
    region = RectRegion{f.get<Vec2>("min"), f.get<Vec2>("max")};
  } else if (type == "circle") {
    region = CircleRegion{f.get<Vec2>("center"), f.get<double>("radius")};
  } else if (type == "anchored_circle") {
    region = AnchoredCircleRegion{f.get<std::uint32_t>("anchor"), f.get<double>("radius")};
  } else {
    invalid(f.sub("type"), "unknown region type '" + type + "'");
  }
  f.finish();
  return region;
}

void parse_policies(const json& j, const std::string& path, Policies& p) {
  Fields f(j, path);
  p.dead_reckoning.threshold_m = f.get<double>("threshold_m", p.dead_reckoning.threshold_m);
  p.dead_reckoning.convergence_ms = f.get<std::uint64_t>("convergence_ms", p.dead_reckoning.convergence_ms);
  p.dead_reckoning.heartbeat_ms = f.get<std::uint64_t>("heartbeat_ms", p.dead_reckoning.heartbeat_ms);
  if (const json* lags = f.find("lag_ms")) {
    if (!lags->is_object()) invalid(f.sub("lag_ms"), "expected an object of class -> ms");
    for (const auto& [cls, v] : lags->items()) {
      p.lag_ms[cls] = Fields::convert<std::uint64_t>(v, f.sub("lag_ms") + "." + cls);
    }
  }
  p.default_lag_ms = f.get<std::uint64_t>("default_lag_ms", p.default_lag_ms);
  p.strong.enabled = f.get<bool>("strong_mode", p.strong.enabled);
  p.strong.threshold_scale = f.get<double>("critical_threshold_scale", p.strong.threshold_scale);
  p.strong.lag_scale = f.get<double>("critical_lag_scale", p.strong.lag_scale);
  p.strong.exit_hysteresis_ms = f.get<std::uint64_t>("mode_hysteresis_ms", p.strong.exit_hysteresis_ms);
  f.finish();
}

void parse_toggles(const json& j, const std::string& path, Toggles& t) {
  Fields f(j, path);
  t.overlay = f.get<bool>("overlay", t.overlay);
  const auto scope = f.get<std::string>("rollback_scope", "all");
  if (scope == "all") {
    t.rollback_scope = RollbackScope::All;
  } else if (scope == "events") {
    t.rollback_scope = RollbackScope::EventsOnly;
  } else {
    invalid(f.sub("rollback_scope"), "expected 'all' or 'events'");
  }
  t.sender_side_lag = f.get<bool>("sender_side_lag", t.sender_side_lag);
  t.receiver_lag = f.get<bool>("receiver_lag", t.receiver_lag);
  t.periodic_ping = f.get<bool>("periodic_ping", t.periodic_ping);
  t.proximity_radius_m = f.get<double>("proximity_radius_m", t.proximity_radius_m);
  f.finish();
}

std::pair<std::size_t, std::size_t> line_col(std::string_view text, std::size_t byte) {
  std::size_t line = 1, col = 1;
  for (std::size_t i = 0; i < byte && i < text.size(); ++i) {
    if (text[i] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  }
  return {line, col};
}

}  // namespace

ScenarioConfig parse_scenario(std::string_view json_text) {
  json root;
  try {
    root = json::parse(json_text);
  } catch (const json::parse_error& e) {
    const auto [line, col] = line_col(json_text, e.byte == 0 ? 0 : e.byte - 1);
    throw Error(Errc::ParseError, "line " + std::to_string(line) + ", column " + std::to_string(col) + ": " + e.what());
  }

  ScenarioConfig cfg;
  {
    Fields f(root, "");
    cfg.name = f.get<std::string>("name", cfg.name);
    cfg.duration_ms = f.get<std::uint64_t>("duration_ms");
    cfg.tick_ms = f.get<std::uint64_t>("tick_ms", cfg.tick_ms);
    cfg.seed = f.get<std::uint64_t>("seed", cfg.seed);
    const auto jitter = f.get<std::string>("jitter_distribution", "uniform");
    if (jitter == "uniform") {
      cfg.jitter_model = netsim::JitterModel::Uniform;
    } else if (jitter == "triangular") {
      cfg.jitter_model = netsim::JitterModel::Triangular;
    } else {
      invalid("jitter_distribution", "expected 'uniform' or 'triangular'");
    }
    cfg.route_hysteresis_ms = f.get<std::uint64_t>("route_hysteresis_ms", cfg.route_hysteresis_ms);
    cfg.estimator_alpha = f.get<double>("estimator_alpha", cfg.estimator_alpha);
    cfg.history_window_ms = f.get<std::uint64_t>("history_window_ms", cfg.history_window_ms);

    const json& clients = array_at(f, "clients");
    for (std::size_t i = 0; i < clients.size(); ++i) {
      const std::string path = index("clients", i);
      Fields c(clients[i], path);
      ClientConfig client;
      client.id = c.get<std::uint32_t>("id");
      client.direct_address_known = c.get<bool>("direct_address_known", true);
      client.has_gps_clock = c.get<bool>("has_gps_clock", true);
      if (const json* ents = optional_array(c, "entities")) {
        for (std::size_t k = 0; k < ents->size(); ++k) {
          client.entities.push_back(parse_entity((*ents)[k], index(c.sub("entities"), k)));
        }
      }
      c.finish();
      cfg.clients.push_back(std::move(client));
    }
    if (const json* links = optional_array(f, "links")) {
      for (std::size_t i = 0; i < links->size(); ++i) cfg.links.push_back(parse_link((*links)[i], index("links", i)));
    }
    if (const json* events = optional_array(f, "link_events")) {
      for (std::size_t i = 0; i < events->size(); ++i) {
        Fields e((*events)[i], index("link_events", i));
        LinkEvent ev;
        ev.at = e.get<std::uint64_t>("at_ms");
        ev.link_id = e.get<std::uint32_t>("link");
        if (const json* v = e.find("available")) ev.available = Fields::convert<bool>(*v, e.sub("available"));
        if (const json* v = e.find("base_delay_ms"))
          ev.base_delay_ms = Fields::convert<double>(*v, e.sub("base_delay_ms"));
        e.finish();
        if (!ev.available && !ev.base_delay_ms)
          invalid(index("link_events", i), "needs 'available' or 'base_delay_ms'");
        cfg.link_events.push_back(ev);
      }
    }
    if (const json* regions = optional_array(f, "regions")) {
      for (std::size_t i = 0; i < regions->size(); ++i) {
        cfg.regions.push_back(parse_region((*regions)[i], index("regions", i)));
      }
    }
    if (const json* policies = f.find("policies")) parse_policies(*policies, "policies", cfg.policies);
    if (const json* toggles = f.find("toggles")) parse_toggles(*toggles, "toggles", cfg.toggles);
    f.finish();
  }
  cfg.validate();
  return cfg;
}

ScenarioConfig load_scenario(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::ParseError, "cannot read " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_scenario(buffer.str());
}

void ScenarioConfig::validate() const {
  if (duration_ms == 0) invalid("duration_ms", "must be > 0");
  if (tick_ms == 0) invalid("tick_ms", "must be > 0");
  if (clients.empty()) invalid("clients", "at least one client is required");
  if (!(estimator_alpha > 0.0 && estimator_alpha <= 1.0)) invalid("estimator_alpha", "must be in (0,1]");

  std::set<std::uint32_t> client_ids, entity_ids, link_ids;
  for (std::size_t i = 0; i < clients.size(); ++i) {
    if (!client_ids.insert(clients[i].id).second) invalid(index("clients", i) + ".id", "duplicate client id");
    for (std::size_t k = 0; k < clients[i].entities.size(); ++k) {
      if (!entity_ids.insert(clients[i].entities[k].id).second) {
        invalid(index(index("clients", i) + ".entities", k) + ".id", "duplicate entity id");
      }
    }
  }
  for (std::size_t i = 0; i < links.size(); ++i) {
    const std::string path = index("links", i);
    if (!link_ids.insert(links[i].link_id).second) invalid(path + ".id", "duplicate link id");
    if (!client_ids.contains(links[i].endpoint_a) || !client_ids.contains(links[i].endpoint_b)) {
      invalid(path + ".endpoints", "references an undefined client");
    }
    try {
      links[i].validate();
    } catch (const Error& e) {
      invalid(path, e.what());
    }
  }
  for (std::size_t i = 0; i < link_events.size(); ++i) {
    if (!link_ids.contains(link_events[i].link_id))
      invalid(index("link_events", i) + ".link", "undefined link id (no such entry in links[])");
  }
  for (std::size_t i = 0; i < regions.size(); ++i) {
    try {
      medium::validate(regions[i]);
    } catch (const Error& e) {
      invalid(index("regions", i), e.what());
    }
    if (const auto* a = std::get_if<AnchoredCircleRegion>(&regions[i]);
        a && !entity_ids.contains(a->anchor_entity_id)) {
      invalid(index("regions", i) + ".anchor", "undefined entity id");
    }
  }
  if (!(policies.dead_reckoning.threshold_m > 0.0)) invalid("policies.threshold_m", "must be > 0");
  if (policies.dead_reckoning.heartbeat_ms == 0) invalid("policies.heartbeat_ms", "must be > 0");
  try {
    policies.strong.validate();
  } catch (const Error& e) {
    invalid("policies", e.what());
  }
  // every pair of clients needs at least one link
  for (auto a : client_ids) {
    for (auto b : client_ids) {
      if (a >= b) continue;
      const bool linked = std::any_of(links.begin(), links.end(), [&](const LinkSpec& l) { return l.connects(a, b); });
      if (!linked) invalid("links", "no link between clients " + std::to_string(a) + " and " + std::to_string(b));
    }
  }
}

const ClientConfig& ScenarioConfig::client(std::uint32_t id) const {
  auto it = std::find_if(clients.begin(), clients.end(), [&](const ClientConfig& c) { return c.id == id; });
  if (it == clients.end()) throw Error(Errc::ValidationError, "clients: no client " + std::to_string(id));
  return *it;
}

const EntityConfig* ScenarioConfig::entity(std::uint32_t id) const {
  for (const auto& c : clients) {
    for (const auto& e : c.entities) {
      if (e.id == id) return &e;
    }
  }
  return nullptr;
}

std::optional<std::uint32_t> ScenarioConfig::owner_of(std::uint32_t entity) const {
  for (const auto& c : clients) {
    for (const auto& e : c.entities) {
      if (e.id == entity) return c.id;
    }
  }
  return std::nullopt;
}

PlayerManagerConfig ScenarioConfig::player_config(std::uint32_t client_id) const {
  PlayerManagerConfig pm;
  pm.client_id = client_id;
  pm.dead_reckoning = policies.dead_reckoning;
  pm.lag.base_lag_ms = policies.lag_ms;
  pm.lag.default_lag_ms = policies.default_lag_ms;
  pm.lag.critical_scale = policies.strong.lag_scale;
  pm.strong = policies.strong;
  pm.regions = regions;
  pm.links = links;
  for (const auto& c : clients) {
    for (const auto& e : c.entities) pm.entities.push_back({e.id, c.id, e.class_id});
  }
  pm.tick_ms = tick_ms;
  pm.estimator_alpha = estimator_alpha;
  pm.history_window_ms = history_window_ms;
  pm.route_hysteresis_ms = route_hysteresis_ms;
  pm.overlay_enabled = toggles.overlay;
  pm.proximity_radius_m = toggles.proximity_radius_m;
  pm.rollback_scope = toggles.rollback_scope;
  pm.sender_side_lag = toggles.sender_side_lag;
  pm.receiver_lag = toggles.receiver_lag;
  pm.periodic_ping = toggles.periodic_ping;
  return pm;
}

}  // namespace medium::scenario
