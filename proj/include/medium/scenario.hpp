#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "medium/critical_area.hpp"
#include "medium/dead_reckoning.hpp"
#include "medium/netsim.hpp"
#include "medium/overlay.hpp"
#include "medium/player_manager.hpp"

namespace medium::scenario {

/// Closed-form bot motion: position and velocity as functions of virtual time.
struct MotionScript {
  enum class Kind { ConstantVelocity, Waypoints };

  Kind kind = Kind::ConstantVelocity;
  Vec2 start;
  Vec2 velocity;
  std::vector<Vec2> points;
  double speed = 0.0;
  bool loop = false;

  EntityKinematics at(std::uint64_t t) const;
  double max_speed() const;
};

struct EntityConfig {
  std::uint32_t id = 0;
  std::string class_id = "default";
  MotionScript motion;
  /// Virtual times of scripted Fire events (fired on the first tick at or after).
  std::vector<std::uint64_t> fire_times;
};

struct ClientConfig {
  std::uint32_t id = 0;
  bool direct_address_known = true;
  bool has_gps_clock = true;
  std::vector<EntityConfig> entities;
};

/// Scheduled change of a link: availability and/or base delay.
struct LinkEvent {
  std::uint64_t at = 0;
  std::uint32_t link_id = 0;
  std::optional<bool> available;
  std::optional<double> base_delay_ms;
};

struct Policies {
  DeadReckoningPolicy dead_reckoning;
  std::map<std::string, std::uint64_t> lag_ms;
  std::uint64_t default_lag_ms = 0;
  StrongModeParams strong;
};

struct Toggles {
  bool overlay = false;
  RollbackScope rollback_scope = RollbackScope::All;
  bool sender_side_lag = true;
  bool receiver_lag = true;
  bool periodic_ping = true;
  double proximity_radius_m = 0.0;
};

struct ScenarioConfig {
  std::string name = "scenario";
  std::uint64_t duration_ms = 0;
  std::uint64_t tick_ms = 50;
  std::uint64_t seed = 1;
  netsim::JitterModel jitter_model = netsim::JitterModel::Uniform;
  std::vector<ClientConfig> clients;
  std::vector<LinkSpec> links;
  std::vector<LinkEvent> link_events;
  std::vector<Region> regions;
  Policies policies;
  Toggles toggles;
  std::uint64_t route_hysteresis_ms = 500;
  double estimator_alpha = LatencyEstimator::kDefaultAlpha;
  std::uint64_t history_window_ms = DeliveryLog::kDefaultHistoryWindowMs;

  /// Cross-reference and range checks. Throws Error(ValidationError) whose
  /// message starts with the offending field path.
  void validate() const;

  /// Player Manager configuration for one client of this scenario.
  PlayerManagerConfig player_config(std::uint32_t client_id) const;
  const ClientConfig& client(std::uint32_t id) const;
  const EntityConfig* entity(std::uint32_t id) const;
  std::optional<std::uint32_t> owner_of(std::uint32_t entity) const;
};

/// Strict JSON parse: unknown keys are rejected. Throws Error(ParseError)
/// with line and column for malformed JSON, Error(ValidationError) otherwise.
ScenarioConfig parse_scenario(std::string_view json_text);

/// Throws Error(ParseError) also when the file cannot be read.
ScenarioConfig load_scenario(const std::filesystem::path& path);

}  // namespace medium::scenario
