#include "medium/overlay.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "medium/error.hpp"

namespace medium {

std::string_view to_string(LinkKind kind) { return kind == LinkKind::Direct ? "direct" : "relay"; }

void LinkSpec::validate() const {
  auto bad = [](double v) { return !std::isfinite(v) || v < 0.0; };
  if (bad(base_delay_ms) || bad(jitter_ms)) {
    throw Error(Errc::ConfigInvalid, "link " + std::to_string(link_id) + " delays must be finite and >= 0");
  }
  if (!(loss_prob >= 0.0 && loss_prob <= 1.0)) {
    throw Error(Errc::ConfigInvalid, "link " + std::to_string(link_id) + " loss_prob outside [0,1]");
  }
  if (endpoint_a == endpoint_b) throw Error(Errc::ConfigInvalid, "link " + std::to_string(link_id) + " is a loop");
}

namespace {

double estimated_delay(const LinkSpec& link, const LinkDelayEstimates& estimates) {
  auto it = estimates.find(link.link_id);
  return it == estimates.end() ? link.base_delay_ms : it->second;
}

/// Lowest estimated delay, ties on link id; optionally restricted to a kind.
std::optional<std::uint32_t> best_link(std::uint32_t self, std::uint32_t peer, const std::vector<LinkSpec>& links,
                                       const LinkDelayEstimates& estimates, std::optional<LinkKind> kind) {
  const LinkSpec* best = nullptr;
  for (const auto& link : links) {
    if (!link.available || !link.connects(self, peer)) continue;
    if (kind && link.kind != *kind) continue;
    if (best == nullptr) {
      best = &link;
      continue;
    }
    const double d = estimated_delay(link, estimates);
    const double bd = estimated_delay(*best, estimates);
    if (d < bd || (d == bd && link.link_id < best->link_id)) best = &link;
  }
  if (best == nullptr) return std::nullopt;
  return best->link_id;
}

bool is_available(const std::vector<LinkSpec>& links, std::uint32_t id) {
  return std::any_of(links.begin(), links.end(), [&](const LinkSpec& l) { return l.link_id == id && l.available; });
}

std::optional<std::uint32_t> preferred(std::uint32_t self, std::uint32_t peer, const std::vector<LinkSpec>& links,
                                       const LinkDelayEstimates& estimates, bool critical_proximity) {
  if (critical_proximity && best_link(self, peer, links, estimates, LinkKind::Direct)) {
    return best_link(self, peer, links, estimates, std::nullopt);
  }
  if (auto relay = best_link(self, peer, links, estimates, LinkKind::Relay)) return relay;
  return best_link(self, peer, links, estimates, std::nullopt);
}

}  // namespace

RouteDecision select_route(std::uint32_t self, std::uint32_t peer, const std::vector<LinkSpec>& links,
                           const LinkDelayEstimates& estimates, bool critical_proximity, RouteDecision decision,
                           std::uint64_t now) {
  auto want = preferred(self, peer, links, estimates, critical_proximity);
  if (!want) {
    throw Error(Errc::NoAvailableLink, "client " + std::to_string(self) + " -> " + std::to_string(peer));
  }
  if (!decision.chosen) {
    decision.chosen = want;
    return decision;
  }
  if (*decision.chosen == *want) return decision;
  if (!is_available(links, *decision.chosen)) {
    decision.chosen = want;
    decision.last_switch_at = now;
    ++decision.switches;
    ++decision.failovers;
    return decision;
  }
  if (decision.last_switch_at && now < *decision.last_switch_at + decision.hysteresis_ms) return decision;
  decision.chosen = want;
  decision.last_switch_at = now;
  ++decision.switches;
  return decision;
}

RouteDecision on_link_change(std::uint32_t self, std::uint32_t peer, std::vector<LinkSpec>& links,
                             std::uint32_t link_id, bool available, const LinkDelayEstimates& estimates,
                             RouteDecision& decision, std::uint64_t now) {
  auto it = std::find_if(links.begin(), links.end(), [&](const LinkSpec& l) { return l.link_id == link_id; });
  if (it == links.end()) throw Error(Errc::UnknownLink, "link " + std::to_string(link_id));
  it->available = available;

  if (!decision.chosen) {
    // A previously unreachable peer becomes reachable again.
    if (available && it->connects(self, peer)) decision.chosen = preferred(self, peer, links, estimates, false);
    return decision;
  }
  if (available || *decision.chosen != link_id) return decision;

  auto next = best_link(self, peer, links, estimates, std::nullopt);
  if (!next) {
    decision.chosen.reset();
    throw Error(Errc::NoAvailableLink, "client " + std::to_string(self) + " -> " + std::to_string(peer));
  }
  decision.chosen = next;
  decision.last_switch_at = now;
  ++decision.switches;
  ++decision.failovers;
  return decision;
}

}  // namespace medium
