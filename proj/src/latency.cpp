#include "medium/latency.hpp"

#include <cmath>
#include <string>

#include "medium/error.hpp"

namespace medium {

TimestampDelay delay_from_timestamp(std::uint64_t msg_timestamp, std::uint64_t receive_time) {
  if (receive_time < msg_timestamp) return {0, true};
  return {receive_time - msg_timestamp, false};
}

std::uint64_t rtt_probe(const pdu::PingMessage& ping, const pdu::PongMessage& pong, std::uint64_t receive_time) {
  if (ping.nonce != pong.nonce) {
    throw Error(Errc::NonceMismatch, "ping " + std::to_string(ping.nonce) + " vs pong " + std::to_string(pong.nonce));
  }
  const std::uint64_t rtt = receive_time > ping.timestamp ? receive_time - ping.timestamp : 0;
  return (rtt + 1) / 2;
}

LatencyEstimator::LatencyEstimator(double alpha) : alpha_(alpha) {
  if (!(alpha > 0.0 && alpha <= 1.0)) throw Error(Errc::ConfigInvalid, "estimator alpha must be in (0,1]");
}

double LatencyEstimator::observe(const DelaySample& sample) {
  auto& peer = peers_[sample.peer_id];
  const double d = std::isfinite(sample.delay_ms) && sample.delay_ms > 0.0 ? sample.delay_ms : 0.0;
  if (!peer.estimate) {
    peer.estimate = d;
  } else {
    peer.estimate = (1.0 - alpha_) * *peer.estimate + alpha_ * d;
  }
  ++peer.samples;
  return *peer.estimate;
}

std::optional<double> LatencyEstimator::estimate(std::uint32_t peer_id) const {
  auto it = peers_.find(peer_id);
  if (it == peers_.end()) return std::nullopt;
  return it->second.estimate;
}

std::uint64_t LatencyEstimator::sample_count(std::uint32_t peer_id) const {
  auto it = peers_.find(peer_id);
  return it == peers_.end() ? 0 : it->second.samples;
}

void LatencyEstimator::track(std::uint32_t peer_id) { peers_.try_emplace(peer_id); }

}  // namespace medium
