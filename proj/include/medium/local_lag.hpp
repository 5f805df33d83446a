#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "medium/critical_area.hpp"
#include "medium/pdu.hpp"

namespace medium {

/// Artificial playout delay per object class.
struct LagPolicy {
  std::map<std::string, std::uint64_t> base_lag_ms;
  std::uint64_t default_lag_ms = 0;
  double critical_scale = 0.5;

  /// Throws Error(NegativeLag) if lag_ms < 0. Already-buffered entries keep
  /// the due time they were given.
  void set_local_lag_value(const std::string& class_id, std::int64_t lag_ms);

  std::uint64_t base_lag(const std::string& class_id) const;
  std::uint64_t effective_lag(const std::string& class_id, ConsistencyMode mode) const;
};

enum class Timeliness { OnTime, Late };

/// A message held back until its playout deadline.
struct PlayoutEntry {
  pdu::Message msg;
  std::uint64_t due = 0;
  std::uint64_t arrived_at = 0;
};

struct EnqueueResult {
  PlayoutEntry entry;
  Timeliness timeliness = Timeliness::OnTime;
};

/// Playout buffer ordered by due time, then by the delivery log's key. Late
/// messages are reported but never stored: they go straight to rollback.
class PlayoutBuffer {
 public:
  EnqueueResult enqueue(const pdu::Message& msg, const std::string& class_id, ConsistencyMode mode,
                        const LagPolicy& policy, std::uint64_t now);

  /// Inserts an entry with a precomputed deadline (sender-side lag).
  void push(PlayoutEntry entry);

  /// Removes and returns every entry with due <= now, in buffer order.
  std::vector<PlayoutEntry> release_due(std::uint64_t now);

  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }

 private:
  struct Order {
    bool operator()(const PlayoutEntry& a, const PlayoutEntry& b) const;
  };
  std::multiset<PlayoutEntry, Order> entries_;
};

}  // namespace medium
