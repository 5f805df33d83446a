#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "medium/critical_area.hpp"
#include "medium/dead_reckoning.hpp"
#include "medium/latency.hpp"
#include "medium/local_lag.hpp"
#include "medium/overlay.hpp"
#include "medium/pdu.hpp"
#include "medium/rollback.hpp"
#include "medium/transport.hpp"

namespace medium {

/// Services the game offers to the Medium. Only apply_remote_state and
/// query_local_state are mandatory; the rest may be left empty.
struct GameCallbacks {
  std::function<void(std::uint32_t entity, const EntityKinematics&)> apply_remote_state;
  std::function<void(const pdu::EventMessage&)> apply_event;
  std::function<void(const pdu::EventMessage&)> undo_event;
  std::function<EntityKinematics(std::uint32_t entity)> query_local_state;
  std::function<void(std::uint32_t entity, ConsistencyMode)> notify_mode;
};

enum class RollbackScope { All, EventsOnly };

/// Reception pipeline stages in their nominal order.
enum class Stage { Communication, LocalLag, CriticalArea, Rollback, Synchronization, Game };

std::string_view to_string(Stage stage);

struct EntityInfo {
  std::uint32_t id = 0;
  std::uint32_t owner = 0;
  std::string class_id;
};

struct PlayerManagerConfig {
  std::uint32_t client_id = 0;
  DeadReckoningPolicy dead_reckoning;
  LagPolicy lag;
  StrongModeParams strong;
  std::vector<Region> regions;
  std::vector<LinkSpec> links;
  /// Every entity of the session; those owned by client_id are local.
  std::vector<EntityInfo> entities;
  std::uint64_t tick_ms = 50;
  double estimator_alpha = LatencyEstimator::kDefaultAlpha;
  std::uint64_t history_window_ms = DeliveryLog::kDefaultHistoryWindowMs;
  std::uint64_t route_hysteresis_ms = 500;
  bool overlay_enabled = false;
  /// Virtual distance under which two clients count as near (0 disables).
  double proximity_radius_m = 0.0;
  RollbackScope rollback_scope = RollbackScope::All;
  bool sender_side_lag = true;
  bool receiver_lag = true;
  bool periodic_ping = true;
  std::uint64_t ping_interval_ms = 1000;
  std::uint64_t outbound_queue_ms = 1000;

  /// Throws Error(ConfigInvalid).
  void validate() const;
};

struct Invocation {
  enum class Kind { ApplyRemoteState, ApplyEvent, UndoEvent, NotifyMode };
  Kind kind;
  std::uint32_t entity = 0;
  std::uint32_t seq = 0;
  std::uint64_t timestamp = 0;
  Vec2 pos;
  ConsistencyMode mode = ConsistencyMode::Normal;
};

struct ReceptionReport {
  std::optional<pdu::MessageType> type;
  std::optional<pdu::DecodeError> decode_error;
  std::optional<Timeliness> timeliness;
  std::optional<std::uint64_t> one_way_delay_ms;
  std::vector<Invocation> invocations;
  std::vector<Stage> stages;
  /// Wall-clock time spent in the pipeline for this message.
  double processing_us = 0.0;
};

struct OutgoingFrame {
  std::uint32_t peer = 0;
  std::optional<std::uint32_t> link_id;
  pdu::MessageType type = pdu::MessageType::StateUpdate;
  std::uint32_t entity = 0;
  std::uint32_t seq = 0;
  bool transmitted = false;
};

struct TickReport {
  std::vector<Invocation> invocations;
  std::vector<OutgoingFrame> frames;
  std::size_t released = 0;
};

struct PlayerStats {
  std::uint64_t received = 0;
  std::uint64_t data_received = 0;
  std::uint64_t decode_errors = 0;
  std::uint64_t late = 0;
  std::uint64_t on_time = 0;
  std::uint64_t stale_states = 0;
  std::uint64_t clock_anomalies = 0;
  std::uint64_t state_sends = 0;
  std::uint64_t event_sends = 0;
  std::uint64_t pings_sent = 0;
  std::uint64_t pongs_received = 0;
  std::uint64_t frames_transmitted = 0;
  std::uint64_t frames_queued = 0;
  std::uint64_t queue_drops = 0;
  std::uint64_t no_route = 0;
};

/// Per-client composite of the critical area, communication, synchronization,
/// local lag, rollback and overlay managers.
class PlayerManager {
 public:
  PlayerManager(PlayerManagerConfig config, GameCallbacks game, Transport& transport);

  /// Tracks each peer, chooses default routes and sends an initial ping on
  /// every usable link. Direct links to peers without a known address are
  /// disabled. Throws Error(ConfigInvalid) if a peer is unreachable.
  void start_session(const std::vector<PeerCapabilities>& peers, std::uint64_t now);

  /// Reception pipeline for one frame arriving on `link_id`.
  ReceptionReport on_network_message(std::span<const std::uint8_t> bytes, std::uint32_t link_id, std::uint64_t now);

  /// Releases due playouts, runs the dead-reckoning send gate for every local
  /// entity and services routes, queued frames and pings.
  TickReport tick(std::uint64_t now);

  /// Broadcasts a game event from a local entity and schedules its local
  /// playout. Returns the event's sequence number.
  std::uint32_t emit_event(std::uint32_t entity, pdu::EventKind kind, const std::array<std::uint8_t, 8>& payload,
                           std::uint64_t now);

  /// Displayed position of any known entity at time t (remote: extrapolated
  /// and blended; local: the game's own state).
  std::optional<Vec2> calc_future_position(std::uint32_t entity, std::uint64_t t) const;

  /// True while a remote entity is still blending toward its last correction.
  bool converging(std::uint32_t entity, std::uint64_t t) const;

  void set_local_lag_value(const std::string& class_id, std::int64_t lag_ms);
  std::uint32_t set_region_coordinates(const Region& region);

  /// Link availability change observed by this client.
  void on_link_change(std::uint32_t link_id, bool available, std::uint64_t now);

  ConsistencyMode mode_of(std::uint32_t entity) const;
  std::optional<std::uint32_t> route_to(std::uint32_t peer) const;
  const RouteDecision* route_decision(std::uint32_t peer) const;
  std::vector<std::uint32_t> peers() const;
  std::uint64_t route_switches() const;

  const LatencyEstimator& latency() const { return latency_; }
  const LatencyEstimator& link_latency() const { return link_latency_; }
  const PlayerStats& stats() const { return stats_; }
  const RollbackStats& rollback_stats() const { return log_.stats(); }
  const PlayerManagerConfig& config() const { return config_; }
  const std::vector<LinkSpec>& links() const { return links_; }
  std::uint32_t client_id() const { return config_.client_id; }

  /// Observer for pipeline instrumentation: called on entry to every stage
  /// with the key of the message being processed.
  void set_stage_observer(std::function<void(const OrderKey&, Stage)> observer) { observer_ = std::move(observer); }

 private:
  struct RemoteTrack {
    std::optional<CorrectionEpoch> epoch;
    bool critical = false;
  };
  struct QueuedFrame {
    std::uint32_t peer;
    std::vector<std::uint8_t> frame;
    std::uint64_t queued_at;
    OutgoingFrame info;
  };
  struct PendingPing {
    pdu::PingMessage ping;
    std::uint32_t peer;
    std::uint32_t link_id;
  };

  const EntityInfo* entity_info(std::uint32_t entity) const;
  std::string class_of(std::uint32_t entity) const;
  bool is_local(std::uint32_t entity) const;

  void enter(const OrderKey& key, Stage stage, std::vector<Stage>* stages);
  void deliver_now(const pdu::Message& msg, std::uint64_t now, std::vector<Stage>* stages);
  void apply_state(const pdu::StateUpdate& msg, std::uint64_t now);
  void apply_event(const pdu::EventMessage& msg);
  void undo_event(const pdu::EventMessage& msg);
  void notify_mode(std::uint32_t entity, ConsistencyMode mode);

  void handle_ping(const pdu::PingMessage& ping, std::uint32_t link_id, std::uint64_t now);
  void handle_pong(const pdu::PongMessage& pong, std::uint32_t link_id, std::uint64_t now);
  void send_ping(std::uint32_t peer, std::uint32_t link_id, std::uint64_t now);

  bool critical_proximity(std::uint32_t peer) const;
  LinkDelayEstimates link_estimates() const;
  void refresh_routes(std::uint64_t now);
  void broadcast(const pdu::Message& msg, std::uint64_t now, std::vector<OutgoingFrame>* frames);
  void flush_queue(std::uint64_t now, std::vector<OutgoingFrame>* frames);

  PlayerManagerConfig config_;
  GameCallbacks game_;
  Transport& transport_;

  RegionSet regions_;
  std::vector<LinkSpec> links_;
  std::set<std::uint32_t> blocked_links_;
  std::map<std::uint32_t, EntityInfo> entities_;
  std::vector<std::uint32_t> local_entities_;

  LatencyEstimator latency_;
  LatencyEstimator link_latency_;
  PlayoutBuffer remote_playout_;
  PlayoutBuffer local_playout_;
  DeliveryLog log_;

  std::map<std::uint32_t, RouteDecision> routes_;
  std::map<std::uint32_t, std::uint64_t> last_heard_;
  std::map<std::uint32_t, std::uint64_t> last_ping_;
  std::map<std::uint64_t, PendingPing> pending_pings_;
  std::uint32_t ping_counter_ = 0;

  std::map<std::uint32_t, ModeTracker> local_modes_;
  std::map<std::uint32_t, ModeTracker> remote_modes_;
  std::map<std::uint32_t, std::optional<EntityKinematics>> last_sent_;
  std::map<std::uint32_t, std::uint32_t> next_seq_;
  std::map<std::uint32_t, RemoteTrack> remote_;
  EntityPositions positions_;

  std::vector<QueuedFrame> queue_;
  std::vector<Invocation>* sink_ = nullptr;
  std::function<void(const OrderKey&, Stage)> observer_;
  PlayerStats stats_;
};

}  // namespace medium
