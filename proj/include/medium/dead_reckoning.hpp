#pragma once

#include <cstdint>
#include <optional>

#include "medium/vec2.hpp"

namespace medium {

struct EntityKinematics {
  Vec2 pos;
  Vec2 vel;
  std::uint64_t at = 0;

  friend bool operator==(const EntityKinematics&, const EntityKinematics&) = default;
};

struct DeadReckoningPolicy {
  double threshold_m = 0.5;
  std::uint64_t convergence_ms = 200;
  std::uint64_t heartbeat_ms = 1000;

  /// Throws Error(ConfigInvalid) on a non-positive threshold or zero heartbeat.
  void validate() const;
};

/// First-order extrapolation of `last` to time t.
/// Throws Error(TimeBeforeSample) if t precedes the sample.
Vec2 predict(const EntityKinematics& last, std::uint64_t t);

/// Transmission gate for a locally owned entity. Sends when there is no prior
/// send, when the heartbeat interval has elapsed, or when the extrapolated
/// position has drifted at least threshold_m from the actual one.
bool should_send(const EntityKinematics& actual, const std::optional<EntityKinematics>& last_sent,
                 const DeadReckoningPolicy& policy, std::uint64_t t);

/// Same gate with an explicit threshold (critical mode tightens it).
bool should_send(const EntityKinematics& actual, const std::optional<EntityKinematics>& last_sent, double threshold_m,
                 std::uint64_t heartbeat_ms, std::uint64_t t);

/// A correction in progress: the trajectory shown before the correction
/// arrived (`origin`), and the corrected state it blends into.
struct CorrectionEpoch {
  std::uint64_t started_at = 0;
  EntityKinematics origin;
  EntityKinematics corrected;
};

/// Blends `previous` (the previously displayed trajectory evaluated at t)
/// toward predict(corrected, t). The blend weight grows linearly from 0 at t0
/// to 1 at t0 + convergence_ms; a zero window snaps.
Vec2 converge(const Vec2& previous, const EntityKinematics& corrected, const DeadReckoningPolicy& policy,
              std::uint64_t t0, std::uint64_t t);

/// Displayed position of an epoch at time t (t >= started_at).
Vec2 converge(const CorrectionEpoch& epoch, const DeadReckoningPolicy& policy, std::uint64_t t);

}  // namespace medium
