#include "medium/player_manager.hpp"

#include <algorithm>
#include <chrono>
#include <string>

#include "medium/error.hpp"

namespace medium {

std::string_view to_string(Stage stage) {
  switch (stage) {
    case Stage::Communication:
      return "Communication";
    case Stage::LocalLag:
      return "LocalLag";
    case Stage::CriticalArea:
      return "CriticalArea";
    case Stage::Rollback:
      return "Rollback";
    case Stage::Synchronization:
      return "Synchronization";
    case Stage::Game:
      return "Game";
  }
  return "?";
}

void PlayerManagerConfig::validate() const {
  if (tick_ms == 0) throw Error(Errc::ConfigInvalid, "tick_ms must be > 0");
  dead_reckoning.validate();
  strong.validate();
  if (!(lag.critical_scale > 0.0 && lag.critical_scale <= 1.0)) {
    throw Error(Errc::ConfigInvalid, "lag critical_scale must be in (0,1]");
  }
  if (!(estimator_alpha > 0.0 && estimator_alpha <= 1.0)) {
    throw Error(Errc::ConfigInvalid, "estimator alpha must be in (0,1]");
  }
  std::set<std::uint32_t> ids;
  for (const auto& e : entities) {
    if (!ids.insert(e.id).second) throw Error(Errc::ConfigInvalid, "duplicate entity " + std::to_string(e.id));
  }
  std::set<std::uint32_t> link_ids;
  for (const auto& l : links) {
    l.validate();
    if (!link_ids.insert(l.link_id).second) {
      throw Error(Errc::ConfigInvalid, "duplicate link " + std::to_string(l.link_id));
    }
  }
  for (const auto& r : regions) {
    try {
      medium::validate(r);
    } catch (const Error& e) {
      throw Error(Errc::ConfigInvalid, e.what());
    }
  }
}

PlayerManager::PlayerManager(PlayerManagerConfig config, GameCallbacks game, Transport& transport)
    : config_(std::move(config)),
      game_(std::move(game)),
      transport_(transport),
      latency_((config_.validate(), config_.estimator_alpha)),
      link_latency_(config_.estimator_alpha),
      log_(config_.history_window_ms) {
  if (!game_.apply_remote_state || !game_.query_local_state) {
    throw Error(Errc::ConfigInvalid, "apply_remote_state and query_local_state callbacks are required");
  }
  config_.lag.critical_scale = config_.strong.lag_scale;
  for (const auto& r : config_.regions) regions_.set_region_coordinates(r);
  links_ = config_.links;
  for (const auto& e : config_.entities) {
    entities_[e.id] = e;
    if (e.owner == config_.client_id) {
      local_entities_.push_back(e.id);
      local_modes_.emplace(e.id, ModeTracker(config_.strong.exit_hysteresis_ms));
      last_sent_[e.id] = std::nullopt;
      next_seq_[e.id] = 0;
    }
  }
  std::sort(local_entities_.begin(), local_entities_.end());
}

const EntityInfo* PlayerManager::entity_info(std::uint32_t entity) const {
  auto it = entities_.find(entity);
  return it == entities_.end() ? nullptr : &it->second;
}

std::string PlayerManager::class_of(std::uint32_t entity) const {
  const EntityInfo* info = entity_info(entity);
  return info ? info->class_id : std::string();
}

bool PlayerManager::is_local(std::uint32_t entity) const {
  const EntityInfo* info = entity_info(entity);
  return info != nullptr && info->owner == config_.client_id;
}

void PlayerManager::start_session(const std::vector<PeerCapabilities>& peers, std::uint64_t now) {
  routes_.clear();
  pending_pings_.clear();
  for (auto& [id, seq] : next_seq_) seq = 0;
  for (auto& [id, sent] : last_sent_) sent.reset();

  for (const auto& caps : peers) {
    if (caps.peer_id == config_.client_id) throw Error(Errc::ConfigInvalid, "client listed as its own peer");
    if (!caps.direct_address_known) {
      for (auto& link : links_) {
        if (link.kind == LinkKind::Direct && link.connects(config_.client_id, caps.peer_id)) {
          link.available = false;
          blocked_links_.insert(link.link_id);
        }
      }
    }
    latency_.track(caps.peer_id);
    RouteDecision decision;
    decision.hysteresis_ms = config_.route_hysteresis_ms;
    try {
      routes_[caps.peer_id] = select_route(config_.client_id, caps.peer_id, links_, {}, false, decision, now);
    } catch (const Error&) {
      throw Error(Errc::ConfigInvalid, "no available link to peer " + std::to_string(caps.peer_id));
    }
  }
  for (const auto& [peer, decision] : routes_) {
    for (const auto& link : links_) {
      if (link.available && link.connects(config_.client_id, peer)) send_ping(peer, link.link_id, now);
    }
  }
}

void PlayerManager::enter(const OrderKey& key, Stage stage, std::vector<Stage>* stages) {
  if (stages) stages->push_back(stage);
  if (observer_) observer_(key, stage);
}

ReceptionReport PlayerManager::on_network_message(std::span<const std::uint8_t> bytes, std::uint32_t link_id,
                                                  std::uint64_t now) {
  const auto started = std::chrono::steady_clock::now();
  ReceptionReport report;
  sink_ = &report.invocations;
  ++stats_.received;

  auto decoded = pdu::decode(bytes);
  if (!decoded) {
    ++stats_.decode_errors;
    report.decode_error = decoded.error();
    report.stages.push_back(Stage::Communication);
  } else {
    const pdu::Message& msg = decoded.message();
    report.type = pdu::type_of(msg);
    const OrderKey key = key_of(msg);
    enter(key, Stage::Communication, &report.stages);

    if (const auto* ping = std::get_if<pdu::PingMessage>(&msg)) {
      handle_ping(*ping, link_id, now);
    } else if (const auto* pong = std::get_if<pdu::PongMessage>(&msg)) {
      handle_pong(*pong, link_id, now);
    } else {
      ++stats_.data_received;
      const std::uint32_t sender = pdu::sender_of(msg);
      const auto delay = delay_from_timestamp(pdu::timestamp_of(msg), now);
      if (delay.clock_anomaly) ++stats_.clock_anomalies;
      report.one_way_delay_ms = delay.delay_ms;
      latency_.observe({sender, static_cast<double>(delay.delay_ms), now});
      last_heard_[sender] = now;

      // The consistency mode has to be known before the playout deadline can
      // be computed, so membership is evaluated first; stages are reported in
      // nominal order.
      std::uint32_t entity = key.entity_id;
      ConsistencyMode mode = ConsistencyMode::Normal;
      auto tracker = remote_modes_.try_emplace(entity, ModeTracker(config_.strong.exit_hysteresis_ms)).first;
      if (const auto* state = std::get_if<pdu::StateUpdate>(&msg)) {
        positions_[entity] = state->pos;
        remote_[entity].critical = state->critical;
        const bool inside = state->critical || regions_.any_contains(state->pos, positions_, entity);
        mode = tracker->second.update(inside, now);
      } else {
        mode = tracker->second.mode();
      }
      if (!config_.strong.enabled) mode = ConsistencyMode::Normal;

      enter(key, Stage::LocalLag, &report.stages);
      Timeliness timeliness = Timeliness::Late;
      if (config_.receiver_lag) {
        timeliness = remote_playout_.enqueue(msg, class_of(entity), mode, config_.lag, now).timeliness;
        report.timeliness = timeliness;
        if (timeliness == Timeliness::Late) {
          ++stats_.late;
        } else {
          ++stats_.on_time;
        }
      }
      enter(key, Stage::CriticalArea, &report.stages);
      if (timeliness == Timeliness::Late) deliver_now(msg, now, &report.stages);
    }
  }

  sink_ = nullptr;
  report.processing_us = std::chrono::duration<double, std::micro>(std::chrono::steady_clock::now() - started).count();
  return report;
}

void PlayerManager::deliver_now(const pdu::Message& msg, std::uint64_t now, std::vector<Stage>* stages) {
  const OrderKey key = key_of(msg);
  enter(key, Stage::Rollback, stages);
  const auto* state = std::get_if<pdu::StateUpdate>(&msg);

  if (state != nullptr && config_.rollback_scope == RollbackScope::EventsOnly) {
    enter(key, Stage::Synchronization, stages);
    enter(key, Stage::Game, stages);
    auto it = remote_.find(state->entity_id);
    if (it != remote_.end() && it->second.epoch && state->timestamp < it->second.epoch->corrected.at) {
      ++stats_.stale_states;
      return;
    }
    apply_state(*state, now);
    return;
  }

  Delivery outcome = log_.on_deliver(msg, now);
  if (std::holds_alternative<DropDuplicate>(outcome) || std::holds_alternative<DropBeyondWindow>(outcome)) {
    log_.deliver({}, msg, now);  // counts the drop
    return;
  }
  enter(key, Stage::Synchronization, stages);
  enter(key, Stage::Game, stages);

  RollbackCallbacks callbacks;
  callbacks.undo = [this](const pdu::Message& m) {
    if (const auto* ev = std::get_if<pdu::EventMessage>(&m)) undo_event(*ev);
  };
  callbacks.apply = [this, now](const pdu::Message& m) {
    if (const auto* ev = std::get_if<pdu::EventMessage>(&m)) {
      apply_event(*ev);
    } else if (const auto* st = std::get_if<pdu::StateUpdate>(&m)) {
      apply_state(*st, now);
    }
  };
  if (const auto* apply = std::get_if<Apply>(&outcome)) {
    log_.apply(callbacks, *apply);
  } else {
    log_.apply_directive(callbacks, std::get<RollbackDirective>(outcome));
  }
}

void PlayerManager::apply_state(const pdu::StateUpdate& msg, std::uint64_t now) {
  const EntityKinematics corrected{msg.pos, msg.vel, std::min(msg.timestamp, now)};
  auto it = remote_.try_emplace(msg.entity_id).first;
  RemoteTrack& track = it->second;
  const bool first = !track.epoch.has_value();
  if (first) {
    track.epoch = CorrectionEpoch{now, corrected, corrected};
  } else {
    const std::uint64_t t0 = std::max(now, track.epoch->started_at);
    const Vec2 from = converge(*track.epoch, config_.dead_reckoning, t0);
    track.epoch = CorrectionEpoch{t0, EntityKinematics{from, track.epoch->corrected.vel, t0}, corrected};
  }
  track.critical = msg.critical;
  const Vec2 shown = first ? predict(corrected, now) : converge(*track.epoch, config_.dead_reckoning, now);
  if (sink_) {
    sink_->push_back(
        {Invocation::Kind::ApplyRemoteState, msg.entity_id, msg.seq, msg.timestamp, shown, ConsistencyMode::Normal});
  }
  game_.apply_remote_state(msg.entity_id, EntityKinematics{shown, msg.vel, now});
}

void PlayerManager::apply_event(const pdu::EventMessage& msg) {
  if (sink_) sink_->push_back({Invocation::Kind::ApplyEvent, msg.entity_id, msg.seq, msg.timestamp, {}, {}});
  if (game_.apply_event) game_.apply_event(msg);
}

void PlayerManager::undo_event(const pdu::EventMessage& msg) {
  if (sink_) sink_->push_back({Invocation::Kind::UndoEvent, msg.entity_id, msg.seq, msg.timestamp, {}, {}});
  if (game_.undo_event) game_.undo_event(msg);
}

void PlayerManager::notify_mode(std::uint32_t entity, ConsistencyMode mode) {
  if (sink_) sink_->push_back({Invocation::Kind::NotifyMode, entity, 0, 0, {}, mode});
  if (game_.notify_mode) game_.notify_mode(entity, mode);
}

void PlayerManager::handle_ping(const pdu::PingMessage& ping, std::uint32_t link_id, std::uint64_t now) {
  last_heard_[ping.sender_id] = now;
  const pdu::PongMessage pong{config_.client_id, ping.nonce, now, ping.timestamp};
  if (transport_.transmit(link_id, config_.client_id, pdu::encode(pong), now)) ++stats_.frames_transmitted;
}

void PlayerManager::handle_pong(const pdu::PongMessage& pong, std::uint32_t link_id, std::uint64_t now) {
  auto it = pending_pings_.find(pong.nonce);
  if (it == pending_pings_.end()) return;
  const PendingPing pending = it->second;
  pending_pings_.erase(it);
  ++stats_.pongs_received;
  last_heard_[pong.sender_id] = now;

  const double delay = static_cast<double>(rtt_probe(pending.ping, pong, now));
  link_latency_.observe({pending.link_id, delay, now});
  auto route = routes_.find(pending.peer);
  const bool on_route = route != routes_.end() && route->second.chosen == pending.link_id;
  if (on_route || latency_.sample_count(pending.peer) == 0) latency_.observe({pending.peer, delay, now});
  (void)link_id;
}

void PlayerManager::send_ping(std::uint32_t peer, std::uint32_t link_id, std::uint64_t now) {
  const std::uint64_t nonce = (static_cast<std::uint64_t>(config_.client_id) << 32) | ping_counter_++;
  const pdu::PingMessage ping{config_.client_id, nonce, now};
  pending_pings_[nonce] = PendingPing{ping, peer, link_id};
  last_ping_[peer] = now;
  ++stats_.pings_sent;
  if (transport_.transmit(link_id, config_.client_id, pdu::encode(ping), now)) ++stats_.frames_transmitted;
}

LinkDelayEstimates PlayerManager::link_estimates() const {
  LinkDelayEstimates out;
  for (const auto& link : links_) {
    if (auto e = link_latency_.estimate(link.link_id)) out[link.link_id] = *e;
  }
  return out;
}

bool PlayerManager::critical_proximity(std::uint32_t peer) const {
  bool local_strong = false;
  for (auto id : local_entities_) local_strong = local_strong || mode_of(id) == ConsistencyMode::Strong;
  bool peer_critical = false;
  for (const auto& [id, track] : remote_) {
    const EntityInfo* info = entity_info(id);
    if (info && info->owner == peer && track.critical) peer_critical = true;
  }
  if (local_strong && peer_critical) return true;

  if (config_.proximity_radius_m > 0.0) {
    for (auto mine : local_entities_) {
      auto mp = positions_.find(mine);
      if (mp == positions_.end()) continue;
      for (const auto& [id, pos] : positions_) {
        const EntityInfo* info = entity_info(id);
        if (info && info->owner == peer && distance(mp->second, pos) < config_.proximity_radius_m) return true;
      }
    }
  }
  return false;
}

void PlayerManager::refresh_routes(std::uint64_t now) {
  const auto estimates = link_estimates();
  for (auto& [peer, decision] : routes_) {
    const bool critical = config_.overlay_enabled && critical_proximity(peer);
    try {
      decision = select_route(config_.client_id, peer, links_, estimates, critical, decision, now);
    } catch (const Error& e) {
      if (e.code() != Errc::NoAvailableLink) throw;
      decision.chosen.reset();
    }
  }
}

void PlayerManager::broadcast(const pdu::Message& msg, std::uint64_t now, std::vector<OutgoingFrame>* frames) {
  const auto frame = pdu::encode(msg);
  const auto key = key_of(msg);
  for (const auto& [peer, decision] : routes_) {
    OutgoingFrame info{peer, decision.chosen, pdu::type_of(msg), key.entity_id, key.seq, false};
    if (!decision.chosen) {
      ++stats_.frames_queued;
      ++stats_.no_route;
      queue_.push_back(QueuedFrame{peer, frame, now, info});
    } else {
      info.transmitted = transport_.transmit(*decision.chosen, config_.client_id, frame, now);
      if (info.transmitted) ++stats_.frames_transmitted;
    }
    if (frames) frames->push_back(info);
  }
}

void PlayerManager::flush_queue(std::uint64_t now, std::vector<OutgoingFrame>* frames) {
  std::vector<QueuedFrame> keep;
  for (auto& q : queue_) {
    auto route = routes_.find(q.peer);
    if (route != routes_.end() && route->second.chosen) {
      q.info.link_id = route->second.chosen;
      q.info.transmitted = transport_.transmit(*route->second.chosen, config_.client_id, std::move(q.frame), now);
      if (q.info.transmitted) ++stats_.frames_transmitted;
      if (frames) frames->push_back(q.info);
    } else if (now - q.queued_at > config_.outbound_queue_ms) {
      ++stats_.queue_drops;
    } else {
      keep.push_back(std::move(q));
    }
  }
  queue_ = std::move(keep);
}

TickReport PlayerManager::tick(std::uint64_t now) {
  TickReport report;
  sink_ = &report.invocations;

  for (auto& entry : local_playout_.release_due(now)) {
    ++report.released;
    if (const auto* ev = std::get_if<pdu::EventMessage>(&entry.msg)) apply_event(*ev);
  }
  for (auto& entry : remote_playout_.release_due(now)) {
    ++report.released;
    deliver_now(entry.msg, now, nullptr);
  }

  // Critical-area membership and mode for every local entity.
  std::map<std::uint32_t, EntityKinematics> actual;
  for (auto id : local_entities_) {
    EntityKinematics k = game_.query_local_state(id);
    k.at = now;
    actual[id] = k;
    positions_[id] = k.pos;
  }
  for (auto id : local_entities_) {
    ModeTracker& tracker = local_modes_.at(id);
    const ConsistencyMode before = tracker.mode();
    ConsistencyMode mode = before;
    if (config_.strong.enabled) mode = mode_for(tracker, actual[id].pos, regions_, positions_, now, id);
    if (mode != before) notify_mode(id, mode);
  }

  refresh_routes(now);
  flush_queue(now, &report.frames);

  for (auto id : local_entities_) {
    const EntityKinematics& k = actual[id];
    const bool strong = mode_of(id) == ConsistencyMode::Strong;
    const double threshold = config_.dead_reckoning.threshold_m * (strong ? config_.strong.threshold_scale : 1.0);
    auto& last = last_sent_[id];
    if (!should_send(k, last, threshold, config_.dead_reckoning.heartbeat_ms, now)) continue;
    const pdu::StateUpdate msg{config_.client_id, id, next_seq_[id]++, now, k.pos, k.vel, strong};
    last = EntityKinematics{k.pos, k.vel, now};
    ++stats_.state_sends;
    broadcast(msg, now, &report.frames);
  }

  if (config_.periodic_ping) {
    for (const auto& [peer, decision] : routes_) {
      if (!decision.chosen) continue;
      auto heard = last_heard_.find(peer);
      auto pinged = last_ping_.find(peer);
      const bool quiet = heard == last_heard_.end() || now >= heard->second + config_.ping_interval_ms;
      const bool due = pinged == last_ping_.end() || now >= pinged->second + config_.ping_interval_ms;
      if (quiet && due) send_ping(peer, *decision.chosen, now);
    }
  }

  log_.prune(now);
  sink_ = nullptr;
  return report;
}

std::uint32_t PlayerManager::emit_event(std::uint32_t entity, pdu::EventKind kind,
                                        const std::array<std::uint8_t, 8>& payload, std::uint64_t now) {
  if (!is_local(entity)) throw Error(Errc::ConfigInvalid, "entity " + std::to_string(entity) + " is not local");
  const pdu::EventMessage msg{config_.client_id, entity, next_seq_[entity]++, now, kind, payload};
  ++stats_.event_sends;
  broadcast(msg, now, nullptr);
  if (config_.sender_side_lag) {
    const ConsistencyMode mode = config_.strong.enabled ? mode_of(entity) : ConsistencyMode::Normal;
    local_playout_.push(PlayoutEntry{msg, now + config_.lag.effective_lag(class_of(entity), mode), now});
  } else {
    apply_event(msg);
  }
  return msg.seq;
}

std::optional<Vec2> PlayerManager::calc_future_position(std::uint32_t entity, std::uint64_t t) const {
  if (is_local(entity)) return game_.query_local_state(entity).pos;
  auto it = remote_.find(entity);
  if (it == remote_.end() || !it->second.epoch) return std::nullopt;
  const auto& epoch = *it->second.epoch;
  return converge(epoch, config_.dead_reckoning, std::max(t, epoch.started_at));
}

bool PlayerManager::converging(std::uint32_t entity, std::uint64_t t) const {
  auto it = remote_.find(entity);
  if (it == remote_.end() || !it->second.epoch) return false;
  return t < it->second.epoch->started_at + config_.dead_reckoning.convergence_ms;
}

void PlayerManager::set_local_lag_value(const std::string& class_id, std::int64_t lag_ms) {
  config_.lag.set_local_lag_value(class_id, lag_ms);
}

std::uint32_t PlayerManager::set_region_coordinates(const Region& region) {
  return regions_.set_region_coordinates(region);
}

void PlayerManager::on_link_change(std::uint32_t link_id, bool available, std::uint64_t now) {
  auto link = std::find_if(links_.begin(), links_.end(), [&](const LinkSpec& l) { return l.link_id == link_id; });
  if (link == links_.end()) throw Error(Errc::UnknownLink, "link " + std::to_string(link_id));
  if (blocked_links_.contains(link_id)) available = false;
  const auto estimates = link_estimates();
  bool handled = false;
  for (auto& [peer, decision] : routes_) {
    if (!link->connects(config_.client_id, peer)) continue;
    handled = true;
    try {
      ::medium::on_link_change(config_.client_id, peer, links_, link_id, available, estimates, decision, now);
    } catch (const Error& e) {
      if (e.code() != Errc::NoAvailableLink) throw;
      ++stats_.no_route;
    }
  }
  if (!handled) link->available = available;
}

ConsistencyMode PlayerManager::mode_of(std::uint32_t entity) const {
  if (auto it = local_modes_.find(entity); it != local_modes_.end()) return it->second.mode();
  if (auto it = remote_modes_.find(entity); it != remote_modes_.end()) return it->second.mode();
  return ConsistencyMode::Normal;
}

std::optional<std::uint32_t> PlayerManager::route_to(std::uint32_t peer) const {
  auto it = routes_.find(peer);
  return it == routes_.end() ? std::nullopt : it->second.chosen;
}

const RouteDecision* PlayerManager::route_decision(std::uint32_t peer) const {
  auto it = routes_.find(peer);
  return it == routes_.end() ? nullptr : &it->second;
}

std::vector<std::uint32_t> PlayerManager::peers() const {
  std::vector<std::uint32_t> out;
  for (const auto& [peer, decision] : routes_) out.push_back(peer);
  return out;
}

std::uint64_t PlayerManager::route_switches() const {
  std::uint64_t n = 0;
  for (const auto& [peer, decision] : routes_) n += decision.switches;
  return n;
}

}  // namespace medium
