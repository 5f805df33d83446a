#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "medium/metrics.hpp"
#include "medium/scenario.hpp"

namespace medium::harness {

struct RouteChange {
  std::uint64_t at = 0;
  std::uint32_t client = 0;
  std::uint32_t peer = 0;
  std::optional<std::uint32_t> from;
  std::optional<std::uint32_t> to;
  /// Caused by a link going down rather than by route selection.
  bool failover = false;
};

struct DeliveryRecord {
  std::uint64_t at = 0;
  std::uint32_t sender = 0;
  std::uint32_t receiver = 0;
  std::uint32_t link_id = 0;
  std::uint64_t one_way_delay_ms = 0;
  bool shared_critical = false;
};

struct RunOptions {
  std::optional<std::uint64_t> seed;  // overrides the scenario's seed
  std::ostream* metrics = nullptr;
  std::ostream* events = nullptr;
  std::ostream* trace = nullptr;
  std::function<void(const metrics::DivergenceRow&)> on_row;
  std::function<void(const metrics::EventRow&)> on_event;
};

struct RunResult {
  metrics::Summary summary;
  std::vector<std::string> violations;
  std::vector<double> processing_us;
  std::vector<DeliveryRecord> deliveries;
  std::vector<RouteChange> route_changes;
  double wall_seconds = 0.0;

  bool ok() const { return violations.empty(); }
};

/// Runs a validated scenario to completion: one simulator, one Player Manager
/// and one scripted bot game per client, ticking every tick_ms up to and
/// including duration_ms. Deliveries due at a tick are handled before the
/// tick. Throws only for configuration errors; invariant violations are
/// collected in the result.
RunResult run(const scenario::ScenarioConfig& config, const RunOptions& options = {});

}  // namespace medium::harness
