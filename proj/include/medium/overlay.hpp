#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string_view>
#include <vector>

namespace medium {

enum class LinkKind { Relay, Direct };

std::string_view to_string(LinkKind kind);

/// A simulated network path between two clients (usable in both directions).
struct LinkSpec {
  std::uint32_t link_id = 0;
  std::uint32_t endpoint_a = 0;
  std::uint32_t endpoint_b = 0;
  double base_delay_ms = 0.0;
  double jitter_ms = 0.0;
  double loss_prob = 0.0;
  LinkKind kind = LinkKind::Relay;
  bool available = true;

  bool connects(std::uint32_t x, std::uint32_t y) const {
    return (endpoint_a == x && endpoint_b == y) || (endpoint_a == y && endpoint_b == x);
  }
  std::uint32_t other_end(std::uint32_t self) const { return self == endpoint_a ? endpoint_b : endpoint_a; }

  /// Throws Error(ConfigInvalid) on negative/non-finite delays or a loss
  /// probability outside [0,1].
  void validate() const;
};

struct PeerCapabilities {
  std::uint32_t peer_id = 0;
  bool direct_address_known = true;
  bool has_gps_clock = false;
};

/// Route currently used toward one peer.
struct RouteDecision {
  std::optional<std::uint32_t> chosen;
  std::optional<std::uint64_t> last_switch_at;
  std::uint64_t hysteresis_ms = 500;
  std::uint64_t switches = 0;
  std::uint64_t failovers = 0;
};

/// Estimated one-way delay per link id; links without an entry fall back to
/// their configured base delay.
using LinkDelayEstimates = std::map<std::uint32_t, double>;

/// Picks the route to `peer` from `self`. With critical proximity and an
/// available Direct link, the lowest-delay available link wins; otherwise the
/// lowest-delay Relay (or, with no Relay left, any available link). A
/// quality-driven switch never happens within hysteresis_ms of the previous
/// one. Ties break on link_id.
/// Throws Error(NoAvailableLink) when no available link reaches the peer.
RouteDecision select_route(std::uint32_t self, std::uint32_t peer, const std::vector<LinkSpec>& links,
                           const LinkDelayEstimates& estimates, bool critical_proximity, RouteDecision decision,
                           std::uint64_t now);

/// Updates availability of `link_id` in `links`. If the chosen route went
/// down, fails over to the best remaining link immediately.
/// Throws Error(UnknownLink) for an unknown id and Error(NoAvailableLink)
/// when the chosen route is lost with nothing left (the decision is cleared
/// in `decision` before throwing).
RouteDecision on_link_change(std::uint32_t self, std::uint32_t peer, std::vector<LinkSpec>& links,
                             std::uint32_t link_id, bool available, const LinkDelayEstimates& estimates,
                             RouteDecision& decision, std::uint64_t now);

}  // namespace medium
