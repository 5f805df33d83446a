#pragma once

#include <cstdint>
#include <map>
#include <optional>

#include "medium/pdu.hpp"

namespace medium {

/// Monotone virtual clock in milliseconds with an optional per-client skew.
class VirtualClock {
 public:
  explicit VirtualClock(std::int64_t offset_ms = 0) : offset_(offset_ms) {}

  /// Moves the clock forward; earlier times are ignored so reads never go back.
  void advance_to(std::uint64_t t) {
    if (t > now_) now_ = t;
  }

  std::uint64_t now() const { return now_; }
  std::int64_t offset() const { return offset_; }

  /// Local reading including skew, saturated at zero.
  std::uint64_t local_now() const {
    const std::int64_t skewed = static_cast<std::int64_t>(now_) + offset_;
    return skewed < 0 ? 0 : static_cast<std::uint64_t>(skewed);
  }

 private:
  std::uint64_t now_ = 0;
  std::int64_t offset_ = 0;
};

struct DelaySample {
  std::uint32_t peer_id = 0;
  double delay_ms = 0.0;
  std::uint64_t at = 0;
};

struct TimestampDelay {
  std::uint64_t delay_ms = 0;
  /// Set when the receive time precedes the send stamp (skewed clocks).
  bool clock_anomaly = false;
};

/// One-way delay assuming synchronized clocks; negative values clamp to zero.
TimestampDelay delay_from_timestamp(std::uint64_t msg_timestamp, std::uint64_t receive_time);

/// Half the round-trip of a ping/pong exchange, rounded half-up.
/// Throws Error(NonceMismatch) if the pong does not answer the ping.
std::uint64_t rtt_probe(const pdu::PingMessage& ping, const pdu::PongMessage& pong, std::uint64_t receive_time);

/// Per-key exponentially weighted delay estimate. The first sample seeds the
/// estimate; later ones blend in with weight alpha.
class LatencyEstimator {
 public:
  static constexpr double kDefaultAlpha = 0.125;

  explicit LatencyEstimator(double alpha = kDefaultAlpha);

  double alpha() const { return alpha_; }

  /// Returns the updated estimate for sample.peer_id.
  double observe(const DelaySample& sample);

  /// Unknown (nullopt) until the first sample, which is distinct from zero.
  std::optional<double> estimate(std::uint32_t peer_id) const;
  std::uint64_t sample_count(std::uint32_t peer_id) const;

  /// Creates an empty entry so the peer is tracked before its first sample.
  void track(std::uint32_t peer_id);
  std::size_t tracked() const { return peers_.size(); }

 private:
  struct PeerState {
    std::optional<double> estimate;
    std::uint64_t samples = 0;
  };

  double alpha_;
  std::map<std::uint32_t, PeerState> peers_;
};

}  // namespace medium
