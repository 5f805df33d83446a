#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <ostream>
#include <queue>
#include <vector>

#include "medium/overlay.hpp"
#include "medium/transport.hpp"

namespace medium::netsim {

/// xorshift64* (Vigna 2014): shifts 12, 25, 27 and output multiplier
/// 0x2545F4914F6CDD1D. The 64-bit seed is scrambled with one splitmix64 step
/// (increment 0x9E3779B97F4A7C15, multipliers 0xBF58476D1CE4E5B9 and
/// 0x94D049BB133111EB); a zero state is replaced by the splitmix increment.
class SimRng {
 public:
  explicit SimRng(std::uint64_t seed);

  std::uint64_t next_u64();
  /// Uniform in [0, 1) from the top 53 bits.
  double next_double();

  std::uint64_t seed() const { return seed_; }

 private:
  std::uint64_t seed_;
  std::uint64_t state_;
};

enum class JitterModel {
  Uniform,     // U(-j, +j): one draw
  Triangular,  // mean of two uniforms, same support: two draws
};

struct SimEvent {
  std::uint64_t deliver_at = 0;
  std::uint32_t dest = 0;
  std::uint32_t sender = 0;
  std::uint32_t link_id = 0;
  std::vector<std::uint8_t> payload;
  std::uint64_t insertion = 0;
};

enum class SendOutcome { Scheduled, Dropped };

struct SimStats {
  std::uint64_t sent = 0;
  std::uint64_t delivered = 0;
  std::uint64_t dropped_loss = 0;
  std::uint64_t dropped_unavailable = 0;

  std::uint64_t dropped() const { return dropped_loss + dropped_unavailable; }
};

/// Single-threaded discrete-event network. Owns the global virtual clock.
class Simulator : public Transport {
 public:
  explicit Simulator(std::uint64_t seed, JitterModel jitter = JitterModel::Uniform);

  void add_link(const LinkSpec& link);
  /// Throws Error(UnknownLink).
  const LinkSpec& link(std::uint32_t link_id) const;
  const std::map<std::uint32_t, LinkSpec>& links() const { return links_; }

  void set_link_available(std::uint32_t link_id, bool available);

  /// Sends issued at or after `at` use the new base delay; in-flight events
  /// keep their schedule. Throws Error(UnknownLink).
  void set_link_delay(std::uint32_t link_id, double new_base_delay_ms, std::uint64_t at);

  /// Base delay in effect for a send at time t.
  double base_delay_at(std::uint32_t link_id, std::uint64_t t) const;

  /// One loss draw, then (with jitter) the delay draw. Delivery is at least
  /// 1 ms after `now`; per-link FIFO is not enforced. Sends on an
  /// unavailable link are dropped and counted. Throws Error(UnknownLink).
  SendOutcome send(std::uint32_t link_id, std::uint32_t sender, std::vector<std::uint8_t> payload, std::uint64_t now);

  bool transmit(std::uint32_t link_id, std::uint32_t sender, std::vector<std::uint8_t> frame,
                std::uint64_t now) override;

  /// Pops the earliest event (ties in insertion order), advances the clock
  /// and hands it to the destination's handler. Throws Error(EmptyQueue).
  SimEvent step();

  void attach(std::uint32_t client_id, std::function<void(const SimEvent&)> handler);

  void advance_to(std::uint64_t t);
  std::uint64_t now() const { return now_; }
  bool empty() const { return queue_.empty(); }
  std::size_t in_flight() const { return queue_.size(); }
  std::optional<std::uint64_t> next_delivery_time() const;

  const SimStats& stats() const { return stats_; }
  SimRng& rng() { return rng_; }

  /// Tab-separated event trace: time, SEND|DELIVER|DROP, link, sender, dest,
  /// message type, seq. Pass nullptr to disable.
  void set_trace(std::ostream* trace) { trace_ = trace; }

 private:
  struct Later {
    bool operator()(const SimEvent& a, const SimEvent& b) const {
      return a.deliver_at != b.deliver_at ? a.deliver_at > b.deliver_at : a.insertion > b.insertion;
    }
  };

  LinkSpec& mutable_link(std::uint32_t link_id);
  void trace(std::uint64_t t, const char* kind, std::uint32_t link_id, std::uint32_t sender, std::uint32_t dest,
             const std::vector<std::uint8_t>& payload) const;

  SimRng rng_;
  JitterModel jitter_model_;
  std::map<std::uint32_t, LinkSpec> links_;
  std::map<std::uint32_t, std::map<std::uint64_t, double>> delay_changes_;
  std::priority_queue<SimEvent, std::vector<SimEvent>, Later> queue_;
  std::map<std::uint32_t, std::function<void(const SimEvent&)>> handlers_;
  std::uint64_t now_ = 0;
  std::uint64_t next_insertion_ = 0;
  SimStats stats_;
  std::ostream* trace_ = nullptr;
};

}  // namespace medium::netsim
