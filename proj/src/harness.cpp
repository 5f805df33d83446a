#include "medium/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <map>
#include <memory>
#include <ostream>
#include <set>
#include <tuple>

#include "medium/error.hpp"
#include "medium/netsim.hpp"
#include "medium/pdu.hpp"
#include "medium/player_manager.hpp"

namespace medium::harness {

namespace {

using scenario::ScenarioConfig;

/// Transport shim that checks every outgoing frame before handing it to the
/// simulator: it must decode, and data sequence numbers must strictly
/// increase per (sender, entity, destination).
class CheckingTransport : public Transport {
 public:
  CheckingTransport(netsim::Simulator& sim, std::vector<std::string>& violations)
      : sim_(sim), violations_(violations) {}

  bool transmit(std::uint32_t link_id, std::uint32_t sender, std::vector<std::uint8_t> frame,
                std::uint64_t now) override {
    auto decoded = pdu::decode(frame);
    if (!decoded) {
      violations_.push_back("t=" + std::to_string(now) + ": client " + std::to_string(sender) +
                            " sent an undecodable frame");
    } else if (pdu::type_of(decoded.message()) == pdu::MessageType::StateUpdate ||
               pdu::type_of(decoded.message()) == pdu::MessageType::Event) {
      const OrderKey key = key_of(decoded.message());
      const std::uint32_t dest = sim_.link(link_id).other_end(sender);
      auto [it, fresh] = last_seq_.try_emplace({sender, key.entity_id, dest}, key.seq);
      if (!fresh) {
        if (key.seq <= it->second) {
          violations_.push_back("t=" + std::to_string(now) + ": seq " + std::to_string(key.seq) + " of entity " +
                                std::to_string(key.entity_id) + " not increasing toward client " +
                                std::to_string(dest));
        }
        it->second = key.seq;
      }
    }
    return sim_.transmit(link_id, sender, std::move(frame), now);
  }

 private:
  netsim::Simulator& sim_;
  std::vector<std::string>& violations_;
  std::map<std::tuple<std::uint32_t, std::uint32_t, std::uint32_t>, std::uint32_t> last_seq_;
};

std::array<std::uint8_t, 8> event_payload(std::uint64_t index) {
  std::array<std::uint8_t, 8> out{};
  for (int i = 7; i >= 0; --i) {
    out[static_cast<std::size_t>(i)] = static_cast<std::uint8_t>(index & 0xFF);
    index >>= 8;
  }
  return out;
}

std::uint64_t event_index(const pdu::EventMessage& ev) {
  std::uint64_t v = 0;
  for (auto b : ev.payload) v = (v << 8) | b;
  return v;
}

struct EmittedEvent {
  std::uint32_t owner = 0;
  std::uint32_t entity = 0;
  std::uint64_t at = 0;
};

class Runner {
 public:
  Runner(const ScenarioConfig& config, const RunOptions& options)
      : config_(config),
        options_(options),
        sim_(options.seed.value_or(config.seed), config.jitter_model),
        transport_(sim_, result_.violations) {
    for (const auto& r : config_.regions) regions_.set_region_coordinates(r);
    for (const auto& c : config_.clients) {
      for (const auto& e : c.entities) {
        entities_[e.id] = &e;
        owner_[e.id] = c.id;
      }
    }
  }

  RunResult run();

 private:
  EntityPositions truth_positions(std::uint64_t t) const {
    EntityPositions out;
    for (const auto& [id, e] : entities_) out[id] = e->motion.at(t).pos;
    return out;
  }

  bool in_region(std::uint32_t entity, const EntityPositions& truth) const {
    return regions_.any_contains(truth.at(entity), truth, entity);
  }

  /// Every client has at least one entity inside a critical region.
  bool shared_critical(std::uint64_t t) const {
    if (regions_.empty()) return false;
    const EntityPositions truth = truth_positions(t);
    for (const auto& c : config_.clients) {
      bool any = false;
      for (const auto& e : c.entities) any = any || in_region(e.id, truth);
      if (!any) return false;
    }
    return true;
  }

  void build_players();
  void observe_routes(std::uint64_t now, bool failover);
  void apply_link_event(const scenario::LinkEvent& ev);
  void check_routes(std::uint64_t now);
  void write_rows(std::uint64_t tick);
  void write_events();
  void summarize();

  const ScenarioConfig& config_;
  const RunOptions& options_;
  RunResult result_;
  netsim::Simulator sim_;
  CheckingTransport transport_;
  RegionSet regions_;
  std::map<std::uint32_t, const scenario::EntityConfig*> entities_;
  std::map<std::uint32_t, std::uint32_t> owner_;

  std::uint64_t now_ = 0;
  std::uint64_t last_time_ = 0;
  std::vector<std::unique_ptr<PlayerManager>> players_;
  std::map<std::uint32_t, PlayerManager*> by_client_;
  std::map<std::pair<std::uint32_t, std::uint32_t>, std::optional<std::uint32_t>> routes_;

  std::vector<EmittedEvent> emitted_;
  std::map<std::pair<std::uint64_t, std::uint32_t>, std::uint64_t> playout_;  // (event, client) -> first playout
  std::set<std::pair<std::uint32_t, std::uint32_t>> counted_sends_;

  // Divergence accumulators, in CSV row order.
  std::uint64_t rows_ = 0;
  std::uint64_t shown_rows_ = 0;
  double div_sum_ = 0.0;
  double div_max_ = 0.0;
  std::uint64_t settled_rows_ = 0;
  double settled_max_ = 0.0;
  std::uint64_t region_rows_ = 0;
  double region_sum_ = 0.0;
  std::uint64_t region_state_sends_ = 0;

  std::uint64_t event_rows_ = 0;
  std::uint64_t unplayed_ = 0;
  double diff_sum_ = 0.0;
  double diff_max_ = 0.0;
};

void Runner::build_players() {
  for (const auto& c : config_.clients) {
    const std::uint32_t client = c.id;
    GameCallbacks game;
    game.apply_remote_state = [](std::uint32_t, const EntityKinematics&) {};
    game.query_local_state = [this](std::uint32_t entity) { return entities_.at(entity)->motion.at(now_); };
    game.apply_event = [this, client](const pdu::EventMessage& ev) {
      playout_.try_emplace({event_index(ev), client}, now_);
    };
    players_.push_back(std::make_unique<PlayerManager>(config_.player_config(client), std::move(game), transport_));
    PlayerManager* pm = players_.back().get();
    by_client_[client] = pm;

    sim_.attach(client, [this, pm, client](const netsim::SimEvent& ev) {
      if (ev.deliver_at < last_time_) result_.violations.push_back("virtual clock moved backwards");
      last_time_ = now_ = ev.deliver_at;
      const ReceptionReport report = pm->on_network_message(ev.payload, ev.link_id, ev.deliver_at);
      result_.processing_us.push_back(report.processing_us);
      if (report.one_way_delay_ms) {
        result_.deliveries.push_back(
            {ev.deliver_at, ev.sender, client, ev.link_id, *report.one_way_delay_ms, shared_critical(ev.deliver_at)});
      }
    });
  }
}

void Runner::observe_routes(std::uint64_t now, bool failover) {
  for (const auto& pm : players_) {
    for (auto peer : pm->peers()) {
      const auto route = pm->route_to(peer);
      auto [it, fresh] = routes_.try_emplace({pm->client_id(), peer}, route);
      if (!fresh && it->second != route) {
        result_.route_changes.push_back({now, pm->client_id(), peer, it->second, route, failover});
        it->second = route;
      }
    }
  }
}

void Runner::apply_link_event(const scenario::LinkEvent& ev) {
  if (!ev.available) return;
  sim_.advance_to(ev.at);
  last_time_ = now_ = ev.at;
  sim_.set_link_available(ev.link_id, *ev.available);
  const LinkSpec& link = sim_.link(ev.link_id);
  for (auto client : {link.endpoint_a, link.endpoint_b}) {
    auto it = by_client_.find(client);
    if (it != by_client_.end()) it->second->on_link_change(ev.link_id, *ev.available, ev.at);
  }
  observe_routes(ev.at, !*ev.available);
}

void Runner::check_routes(std::uint64_t now) {
  for (const auto& pm : players_) {
    for (auto peer : pm->peers()) {
      const auto route = pm->route_to(peer);
      if (route && !sim_.link(*route).available) {
        result_.violations.push_back("t=" + std::to_string(now) + ": client " + std::to_string(pm->client_id()) +
                                     " routes to " + std::to_string(peer) + " over unavailable link " +
                                     std::to_string(*route));
      }
    }
  }
}

void Runner::write_rows(std::uint64_t tick) {
  const EntityPositions truth = truth_positions(tick);
  for (const auto& [id, entity] : entities_) {
    const std::uint32_t owner = owner_.at(id);
    PlayerManager* owner_pm = by_client_.at(owner);
    const bool inside = in_region(id, truth);
    for (const auto& pm : players_) {
      if (pm->client_id() == owner) continue;
      metrics::DivergenceRow row;
      row.tick_ms = tick;
      row.entity = id;
      row.owner = owner;
      row.viewer = pm->client_id();
      row.truth = truth.at(id);
      row.shown = pm->calc_future_position(id, tick);
      row.mode = std::string(to_string(owner_pm->mode_of(id)));
      row.route = owner_pm->route_to(pm->client_id());
      row.converging = pm->converging(id, tick);
      row.in_region = inside;

      ++rows_;
      if (auto d = row.divergence()) {
        ++shown_rows_;
        div_sum_ += *d;
        div_max_ = std::max(div_max_, *d);
        if (!row.converging) {
          ++settled_rows_;
          settled_max_ = std::max(settled_max_, *d);
        }
        if (inside) {
          ++region_rows_;
          region_sum_ += *d;
        }
      }
      if (options_.metrics) metrics::write_metrics_row(*options_.metrics, row);
      if (options_.on_row) options_.on_row(row);
    }
  }
}

void Runner::write_events() {
  for (std::uint64_t idx = 0; idx < emitted_.size(); ++idx) {
    const EmittedEvent& ev = emitted_[idx];
    auto local = playout_.find({idx, ev.owner});
    for (const auto& pm : players_) {
      const std::uint32_t viewer = pm->client_id();
      if (viewer == ev.owner) continue;
      auto remote = playout_.find({idx, viewer});
      if (local == playout_.end() || remote == playout_.end()) {
        ++unplayed_;
        continue;
      }
      const metrics::EventRow row{idx, ev.owner, viewer, local->second, remote->second};
      const double d = std::abs(static_cast<double>(row.diff_ms()));
      ++event_rows_;
      diff_sum_ += d;
      diff_max_ = std::max(diff_max_, d);
      if (options_.events) metrics::write_event_row(*options_.events, row);
      if (options_.on_event) options_.on_event(row);
    }
  }
}

void Runner::summarize() {
  auto& s = result_.summary;
  auto mean = [](double sum, std::uint64_t n) { return n == 0 ? 0.0 : sum / static_cast<double>(n); };

  PlayerStats total;
  RollbackStats rb;
  std::uint64_t switches = 0, failovers = 0;
  for (const auto& pm : players_) {
    const auto& st = pm->stats();
    total.data_received += st.data_received;
    total.decode_errors += st.decode_errors;
    total.late += st.late;
    total.state_sends += st.state_sends;
    total.event_sends += st.event_sends;
    total.queue_drops += st.queue_drops;
    total.pings_sent += st.pings_sent;
    const auto& r = pm->rollback_stats();
    rb.rollbacks += r.rollbacks;
    rb.undone += r.undone;
    rb.duplicates += r.duplicates;
    rb.beyond_window += r.beyond_window;
    for (auto peer : pm->peers()) {
      switches += pm->route_decision(peer)->switches;
      failovers += pm->route_decision(peer)->failovers;
    }
  }

  double delay_sum = 0.0, shared_sum = 0.0;
  std::uint64_t shared_n = 0;
  for (const auto& d : result_.deliveries) {
    delay_sum += static_cast<double>(d.one_way_delay_ms);
    if (d.shared_critical) {
      shared_sum += static_cast<double>(d.one_way_delay_ms);
      ++shared_n;
    }
  }

  s.set("scenario", config_.name);
  s.set("seed", options_.seed.value_or(config_.seed));
  s.set("duration_ms", config_.duration_ms);
  s.set("tick_ms", config_.tick_ms);
  s.set("rows", rows_);
  s.set("shown_rows", shown_rows_);
  s.set("mean_divergence_m", mean(div_sum_, shown_rows_));
  s.set("max_divergence_m", div_max_);
  s.set("settled_rows", settled_rows_);
  s.set("settled_max_divergence_m", settled_max_);
  s.set("region_rows", region_rows_);
  s.set("region_mean_divergence_m", mean(region_sum_, region_rows_));
  s.set("region_state_sends", region_state_sends_);
  s.set("events", static_cast<std::uint64_t>(emitted_.size()));
  s.set("event_rows", event_rows_);
  s.set("events_unplayed", unplayed_);
  s.set("mean_abs_display_diff_ms", mean(diff_sum_, event_rows_));
  s.set("max_abs_display_diff_ms", diff_max_);
  s.set("data_received", total.data_received);
  s.set("late", total.late);
  s.set("late_fraction",
        total.data_received == 0 ? 0.0 : static_cast<double>(total.late) / static_cast<double>(total.data_received));
  s.set("rollbacks", rb.rollbacks);
  s.set("undone", rb.undone);
  s.set("duplicates", rb.duplicates);
  s.set("beyond_window", rb.beyond_window);
  s.set("state_sends", total.state_sends);
  s.set("event_sends", total.event_sends);
  s.set("pings_sent", total.pings_sent);
  s.set("sim_sent", sim_.stats().sent);
  s.set("sim_delivered", sim_.stats().delivered);
  s.set("sim_dropped", sim_.stats().dropped());
  s.set("in_flight", static_cast<std::uint64_t>(sim_.in_flight()));
  s.set("queue_drops", total.queue_drops);
  s.set("decode_errors", total.decode_errors);
  s.set("mean_delivered_delay_ms", mean(delay_sum, result_.deliveries.size()));
  s.set("shared_critical_messages", shared_n);
  s.set("shared_critical_mean_delay_ms", mean(shared_sum, shared_n));
  s.set("route_switches", switches);
  s.set("route_failovers", failovers);
  s.set("messages_processed", static_cast<std::uint64_t>(result_.processing_us.size()));
  s.set("processing_p50_us", metrics::percentile(result_.processing_us, 50.0));
  s.set("processing_p99_us", metrics::percentile(result_.processing_us, 99.0));
  s.set("violations", static_cast<std::uint64_t>(result_.violations.size()));
}

RunResult Runner::run() {
  const auto started = std::chrono::steady_clock::now();
  for (const auto& link : config_.links) sim_.add_link(link);
  for (const auto& ev : config_.link_events) {
    if (ev.base_delay_ms) sim_.set_link_delay(ev.link_id, *ev.base_delay_ms, ev.at);
  }
  std::vector<scenario::LinkEvent> link_events;
  for (const auto& ev : config_.link_events) {
    if (ev.available) link_events.push_back(ev);
  }
  std::stable_sort(link_events.begin(), link_events.end(), [](const auto& a, const auto& b) { return a.at < b.at; });
  sim_.set_trace(options_.trace);

  build_players();
  for (const auto& pm : players_) {
    std::vector<PeerCapabilities> peers;
    for (const auto& c : config_.clients) {
      if (c.id != pm->client_id()) peers.push_back({c.id, c.direct_address_known, c.has_gps_clock});
    }
    pm->start_session(peers, 0);
  }
  observe_routes(0, false);

  if (options_.metrics) *options_.metrics << metrics::kMetricsHeader << '\n';

  std::map<std::uint32_t, std::size_t> next_fire;
  std::size_t next_link_event = 0;
  for (std::uint64_t tick = 0; tick <= config_.duration_ms; tick += config_.tick_ms) {
    while (true) {
      const auto delivery = sim_.next_delivery_time();
      const bool link_due = next_link_event < link_events.size() && link_events[next_link_event].at <= tick;
      if (link_due && (!delivery || link_events[next_link_event].at <= *delivery)) {
        apply_link_event(link_events[next_link_event++]);
      } else if (delivery && *delivery <= tick) {
        sim_.step();
      } else {
        break;
      }
    }
    if (tick < last_time_) result_.violations.push_back("virtual clock moved backwards");
    sim_.advance_to(tick);
    last_time_ = now_ = tick;

    for (const auto& c : config_.clients) {
      PlayerManager* pm = by_client_.at(c.id);
      for (const auto& e : c.entities) {
        std::size_t& i = next_fire[e.id];
        while (i < e.fire_times.size() && e.fire_times[i] <= tick) {
          pm->emit_event(e.id, pdu::EventKind::Fire, event_payload(emitted_.size()), tick);
          emitted_.push_back({c.id, e.id, tick});
          ++i;
        }
      }
    }

    const EntityPositions truth = truth_positions(tick);
    for (const auto& pm : players_) {
      const TickReport report = pm->tick(tick);
      for (const auto& f : report.frames) {
        if (f.type != pdu::MessageType::StateUpdate) continue;
        if (counted_sends_.insert({f.entity, f.seq}).second && in_region(f.entity, truth)) ++region_state_sends_;
      }
    }
    observe_routes(tick, false);
    check_routes(tick);
    write_rows(tick);
  }

  const auto& st = sim_.stats();
  if (st.sent != st.delivered + st.dropped() + sim_.in_flight()) {
    result_.violations.push_back("conservation: sent " + std::to_string(st.sent) + " != delivered " +
                                 std::to_string(st.delivered) + " + dropped " + std::to_string(st.dropped()) +
                                 " + in flight " + std::to_string(sim_.in_flight()));
  }

  if (options_.events) *options_.events << metrics::kEventsHeader << '\n';
  write_events();
  summarize();
  result_.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  return std::move(result_);
}

}  // namespace

RunResult run(const scenario::ScenarioConfig& config, const RunOptions& options) {
  config.validate();
  Runner runner(config, options);
  return runner.run();
}

}  // namespace medium::harness
