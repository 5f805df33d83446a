// Runs every acceptance criterion and prints one PASS/FAIL line each.
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <map>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "medium/harness.hpp"
#include "medium/latency.hpp"
#include "medium/netsim.hpp"
#include "medium/rollback.hpp"
#include "medium/scenario.hpp"

using namespace medium;

namespace {

namespace fs = std::filesystem;

scenario::ScenarioConfig load(const std::string& name) {
  return scenario::load_scenario(fs::path(MEDIUM_SCENARIO_DIR) / name);
}

struct Verdict {
  bool pass = true;
  std::ostringstream detail;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail << " [failed: " << what << "]";
    }
  }
};

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

Verdict processing_overhead() {
  Verdict v;
  const auto r = harness::run(load("carrace.json"));
  const auto& s = r.summary;
  const double processed = s.number("messages_processed");
  const double p50 = s.number("processing_p50_us");
  const double p99 = s.number("processing_p99_us");
  v.detail << "messages=" << processed << " p50=" << fmt(p50) << "us p99=" << fmt(p99)
           << "us wall=" << fmt(r.wall_seconds) << "s";
  v.require(r.ok(), "invariant violations");
  v.require(processed >= 10000, "fewer than 10000 messages");
  v.require(p99 <= 5000.0, "p99 > 5 ms");
  v.require(p50 <= 1000.0, "p50 > 1 ms");
  v.require(r.wall_seconds < 10.0, "run took 10 s or more");
  return v;
}

Verdict local_lag_exactness() {
  Verdict v;
  auto cfg = load("tankshots.json");
  const auto exact = harness::run(cfg);
  const double events = exact.summary.number("event_rows");
  const double diff = exact.summary.number("mean_abs_display_diff_ms");
  v.detail << "d=250 j=0: events=" << events << " mean|diff|=" << fmt(diff) << "ms";
  v.require(exact.ok(), "invariant violations (jitter 0)");
  v.require(events >= 100, "fewer than 100 fire events");
  v.require(diff == 0.0, "mean |diff| not exactly 0");

  for (auto& link : cfg.links) link.jitter_ms = 50;
  const auto jittered = harness::run(cfg);
  const double jdiff = jittered.summary.number("mean_abs_display_diff_ms");
  const double late = jittered.summary.number("late_fraction");
  v.detail << "; j=50: events=" << jittered.summary.number("event_rows") << " mean|diff|=" << fmt(jdiff)
           << "ms late_fraction=" << fmt(late);
  v.require(jittered.ok(), "invariant violations (jitter 50)");
  v.require(jittered.summary.number("event_rows") >= 100, "fewer than 100 fire events (jitter 50)");
  v.require(jdiff <= 50.0, "mean |diff| > 50 ms");
  v.require(late == 0.0, "late fraction not 0");
  return v;
}

/// Game-side view of the applied sequence: undo must remove the newest entry.
struct AppliedSequence {
  std::vector<OrderKey> keys;
  bool consistent = true;

  RollbackCallbacks callbacks() {
    return {[this](const pdu::Message& m) {
              if (keys.empty() || keys.back() != key_of(m)) consistent = false;
              if (!keys.empty()) keys.pop_back();
            },
            [this](const pdu::Message& m) { keys.push_back(key_of(m)); }};
  }
};

bool sorted_equivalent(const AppliedSequence& seq, std::vector<OrderKey> expected) {
  std::sort(expected.begin(), expected.end());
  return seq.consistent && seq.keys == expected;
}

Verdict rollback_order() {
  Verdict v;
  std::vector<pdu::Message> six;
  for (std::uint32_t i = 0; i < 6; ++i) {
    six.push_back(pdu::EventMessage{1 + i % 2, 10 + i % 2, i / 2, 100 + 10ull * i, pdu::EventKind::Fire, {}});
  }
  std::vector<std::size_t> order(6);
  std::iota(order.begin(), order.end(), 0);
  std::size_t perms = 0, perm_ok = 0;
  do {
    DeliveryLog log;
    AppliedSequence seq;
    std::vector<OrderKey> expected;
    for (std::size_t k = 0; k < 6; ++k) {
      log.deliver(seq.callbacks(), six[order[k]], 200 + k);
      expected.push_back(key_of(six[order[k]]));
    }
    ++perms;
    if (sorted_equivalent(seq, expected)) ++perm_ok;
  } while (std::next_permutation(order.begin(), order.end()));

  std::size_t streams = 0, stream_ok = 0, reordered = 0;
  for (std::uint64_t seed = 1; seed <= 1000; ++seed) {
    netsim::Simulator sim(seed);
    sim.add_link(LinkSpec{1, 1, 3, 100, 80, 0, LinkKind::Relay, true});
    sim.add_link(LinkSpec{2, 2, 3, 60, 40, 0, LinkKind::Relay, true});
    DeliveryLog log;
    AppliedSequence seq;
    std::vector<OrderKey> expected;
    std::vector<std::uint32_t> next_seq(3, 0);
    for (std::uint32_t i = 0; i < 50; ++i) {
      const std::uint32_t sender = 1 + static_cast<std::uint32_t>(sim.rng().next_u64() % 2);
      const std::uint64_t ts = 10ull * i;
      const pdu::EventMessage ev{sender, 100 + sender, next_seq[sender]++, ts, pdu::EventKind::Fire, {}};
      sim.send(sender, sender, pdu::encode(ev), ts);
      expected.push_back(key_of(ev));
    }
    std::vector<std::uint64_t> arrival_ts;
    while (!sim.empty()) {
      const auto e = sim.step();
      const auto d = pdu::decode(e.payload);
      if (!d.ok()) break;
      arrival_ts.push_back(key_of(d.message()).timestamp);
      log.deliver(seq.callbacks(), d.message(), e.deliver_at);
    }
    if (!std::is_sorted(arrival_ts.begin(), arrival_ts.end())) ++reordered;
    ++streams;
    if (arrival_ts.size() == 50 && sorted_equivalent(seq, expected)) ++stream_ok;
  }
  v.detail << "permutations " << perm_ok << "/" << perms << ", seeded streams " << stream_ok << "/" << streams << " ("
           << reordered << " reordered)";
  v.require(perms == 720 && perm_ok == perms, "permutation mismatch");
  v.require(streams == 1000 && stream_ok == streams, "stream mismatch");
  v.require(reordered > 0, "jitter produced no reordering");
  return v;
}

struct Settled {
  std::size_t rows = 0;
  double max = 0.0;
};

Settled settled_divergence(const scenario::ScenarioConfig& cfg, bool* ok) {
  Settled s;
  harness::RunOptions opts;
  opts.on_row = [&](const metrics::DivergenceRow& row) {
    if (!row.shown || row.converging) return;
    ++s.rows;
    s.max = std::max(s.max, *row.divergence());
  };
  *ok = harness::run(cfg, opts).ok();
  return s;
}

Verdict dead_reckoning_bound() {
  Verdict v;
  const auto path = load("drpath.json");
  const double bound = path.policies.dead_reckoning.threshold_m + 10.0 * 250.0 / 1000.0 + 0.5;
  bool ok_path = false, ok_line = false;
  const auto p = settled_divergence(path, &ok_path);
  const auto l = settled_divergence(load("straight.json"), &ok_line);
  v.detail << "waypoints: max=" << fmt(p.max) << "m over " << p.rows << " rows (bound " << fmt(bound)
           << "); constant velocity: max=" << fmt(l.max) << "m over " << l.rows << " rows";
  v.require(ok_path && ok_line, "invariant violations");
  v.require(p.rows > 0 && l.rows > 0, "no settled rows");
  v.require(p.max <= bound, "waypoint divergence over bound");
  v.require(l.max <= 1e-9, "constant-velocity divergence not 0");
  return v;
}

Verdict determinism() {
  Verdict v;
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(MEDIUM_SCENARIO_DIR)) {
    if (e.path().extension() == ".json") files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  std::size_t identical = 0;
  for (const auto& f : files) {
    std::string out[2][3];
    for (auto& o : out) {
      std::ostringstream m, e, t;
      harness::RunOptions opts;
      opts.metrics = &m;
      opts.events = &e;
      opts.trace = &t;
      harness::run(scenario::load_scenario(f), opts);
      o[0] = m.str();
      o[1] = e.str();
      o[2] = t.str();
    }
    const bool same = out[0][0] == out[1][0] && out[0][1] == out[1][1] && out[0][2] == out[1][2];
    v.require(same, f.filename().string() + " differs");
    v.require(!out[0][0].empty() && !out[0][2].empty(), f.filename().string() + " produced no output");
    if (same) ++identical;
  }
  v.detail << identical << "/" << files.size() << " scenarios byte-identical (metrics, events, trace)";
  v.require(!files.empty(), "no scenarios found");
  return v;
}

Verdict critical_tightening() {
  Verdict v;
  auto cfg = load("carrace.json");
  cfg.policies.strong.enabled = true;
  const auto strong = harness::run(cfg);
  cfg.policies.strong.enabled = false;
  const auto normal = harness::run(cfg);
  const double ds = strong.summary.number("region_mean_divergence_m");
  const double dn = normal.summary.number("region_mean_divergence_m");
  const double ss = strong.summary.number("region_state_sends");
  const double sn = normal.summary.number("region_state_sends");
  v.detail << "region mean divergence strong=" << fmt(ds) << "m normal=" << fmt(dn) << "m; region sends strong=" << ss
           << " normal=" << sn << "; region rows=" << strong.summary.number("region_rows");
  v.require(strong.ok() && normal.ok(), "invariant violations");
  v.require(strong.summary.number("region_rows") > 0, "no region occupancy");
  v.require(ds < dn, "divergence not strictly lower");
  v.require(ss > sn, "send count not strictly higher");
  return v;
}

Verdict overlay_benefit() {
  Verdict v;
  auto cfg = load("overlay.json");
  cfg.toggles.overlay = true;
  const auto on = harness::run(cfg);
  cfg.toggles.overlay = false;
  const auto off = harness::run(cfg);
  const double don = on.summary.number("shared_critical_mean_delay_ms");
  const double doff = off.summary.number("shared_critical_mean_delay_ms");
  v.detail << "shared-critical mean delay on=" << fmt(don) << "ms off=" << fmt(doff) << "ms (messages "
           << on.summary.number("shared_critical_messages") << "/" << off.summary.number("shared_critical_messages")
           << ")";
  v.require(on.ok() && off.ok(), "invariant violations");
  v.require(on.summary.number("shared_critical_messages") > 0 && off.summary.number("shared_critical_messages") > 0,
            "empty shared-critical window");
  v.require(doff - don >= 150.0, "improvement under 150 ms");

  std::map<std::pair<std::uint32_t, std::uint32_t>, std::uint64_t> last;
  std::size_t switches = 0, failovers = 0, too_soon = 0;
  for (const auto& c : on.route_changes) {
    const auto key = std::make_pair(c.client, c.peer);
    if (c.failover) {
      ++failovers;
    } else {
      ++switches;
      if (auto it = last.find(key); it != last.end() && c.at - it->second < 500) ++too_soon;
    }
    last[key] = c.at;
  }
  v.detail << "; route changes " << switches << " + " << failovers << " failovers, " << too_soon
           << " inside hysteresis";
  v.require(switches > 0, "overlay never switched routes");
  v.require(too_soon == 0, "switch within 500 ms hysteresis");
  return v;
}

Verdict latency_reestimation() {
  Verdict v;
  constexpr double alpha = 0.125;
  auto within = [](double e) { return std::fabs(e - 300.0) <= 0.05 * 300.0; };

  // Closed form: e_n = 300 - 200 (1 - alpha)^n after n post-step samples.
  LatencyEstimator closed(alpha);
  closed.observe({1, 100.0, 0});
  std::size_t closed_n = 0;
  double max_residual = 0.0;
  for (std::size_t n = 1; n <= 25; ++n) {
    const double e = closed.observe({1, 300.0, n});
    max_residual = std::max(max_residual, std::fabs(e - (300.0 - 200.0 * std::pow(1.0 - alpha, double(n)))));
    if (closed_n == 0 && within(e)) closed_n = n;
  }

  // Simulated: a probe every 100 ms over a jitter-free link whose delay steps at t = 5000.
  netsim::Simulator sim(8);
  sim.add_link(LinkSpec{1, 1, 2, 100, 0, 0, LinkKind::Relay, true});
  sim.set_link_delay(1, 300, 5000);
  LatencyEstimator est(alpha);
  std::uint32_t seq = 0;
  for (std::uint64_t t = 0; t < 10000; t += 100) {
    sim.send(1, 1, pdu::encode(pdu::StateUpdate{1, 1, seq++, t, {}, {}, false}), t);
  }
  std::size_t after_step = 0, sim_n = 0;
  double final_estimate = 0.0;
  while (!sim.empty()) {
    const auto e = sim.step();
    const auto d = pdu::decode(e.payload);
    const auto ts = key_of(d.message()).timestamp;
    const double estimate =
        est.observe({1, static_cast<double>(delay_from_timestamp(ts, e.deliver_at).delay_ms), e.deliver_at});
    if (ts >= 5000) {
      ++after_step;
      if (sim_n == 0 && within(estimate)) sim_n = after_step;
    }
    final_estimate = estimate;
  }
  v.detail << "closed form within 5% after " << closed_n << " samples (max residual " << fmt(max_residual)
           << "); simulated link after " << sim_n << " samples, final estimate " << fmt(final_estimate) << "ms";
  v.require(closed_n > 0 && closed_n <= 25, "closed form not within 5% in 25 samples");
  v.require(max_residual < 1e-9, "EWMA deviates from closed form");
  v.require(sim_n > 0 && sim_n <= 25, "simulated estimate not within 5% in 25 samples");
  v.require(sim_n == closed_n, "simulated convergence differs from closed form");
  return v;
}

}  // namespace

int main() {
  struct Criterion {
    const char* name;
    Verdict (*check)();
  };
  const Criterion criteria[] = {
      {"processing overhead", processing_overhead},
      {"local-lag exactness", local_lag_exactness},
      {"rollback order equivalence", rollback_order},
      {"dead-reckoning error bound", dead_reckoning_bound},
      {"determinism", determinism},
      {"critical-region tightening", critical_tightening},
      {"overlay benefit", overlay_benefit},
      {"latency re-estimation", latency_reestimation},
  };
  int failed = 0;
  int index = 0;
  for (const auto& c : criteria) {
    ++index;
    Verdict v;
    try {
      v = c.check();
    } catch (const std::exception& e) {
      v.pass = false;
      v.detail << "exception: " << e.what();
    }
    std::printf("%s %d %s: %s\n", v.pass ? "PASS" : "FAIL", index, c.name, v.detail.str().c_str());
    std::fflush(stdout);
    if (!v.pass) ++failed;
  }
  return failed == 0 ? 0 : 1;
}
