#include "medium/dead_reckoning.hpp"

#include <string>

#include "medium/error.hpp"

namespace medium {

void DeadReckoningPolicy::validate() const {
  if (!(threshold_m > 0.0)) throw Error(Errc::ConfigInvalid, "dead-reckoning threshold must be > 0");
  if (heartbeat_ms == 0) throw Error(Errc::ConfigInvalid, "heartbeat must be > 0");
}

Vec2 predict(const EntityKinematics& last, std::uint64_t t) {
  if (t < last.at) {
    throw Error(Errc::TimeBeforeSample, "t=" + std::to_string(t) + " < sample at " + std::to_string(last.at));
  }
  const double dt = static_cast<double>(t - last.at) / 1000.0;
  return last.pos + last.vel * dt;
}

bool should_send(const EntityKinematics& actual, const std::optional<EntityKinematics>& last_sent, double threshold_m,
                 std::uint64_t heartbeat_ms, std::uint64_t t) {
  if (!last_sent) return true;
  if (t >= last_sent->at + heartbeat_ms) return true;
  return distance(actual.pos, predict(*last_sent, t)) >= threshold_m;
}

bool should_send(const EntityKinematics& actual, const std::optional<EntityKinematics>& last_sent,
                 const DeadReckoningPolicy& policy, std::uint64_t t) {
  return should_send(actual, last_sent, policy.threshold_m, policy.heartbeat_ms, t);
}

Vec2 converge(const Vec2& previous, const EntityKinematics& corrected, const DeadReckoningPolicy& policy,
              std::uint64_t t0, std::uint64_t t) {
  const Vec2 target = predict(corrected, t);
  if (policy.convergence_ms == 0 || t >= t0 + policy.convergence_ms) return target;
  const double w = t <= t0 ? 0.0 : static_cast<double>(t - t0) / static_cast<double>(policy.convergence_ms);
  return previous + (target - previous) * w;
}

Vec2 converge(const CorrectionEpoch& epoch, const DeadReckoningPolicy& policy, std::uint64_t t) {
  const std::uint64_t from = t < epoch.origin.at ? epoch.origin.at : t;
  return converge(predict(epoch.origin, from), epoch.corrected, policy, epoch.started_at, t);
}

}  // namespace medium
