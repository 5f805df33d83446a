#pragma once

#include <compare>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <tuple>
#include <variant>
#include <vector>

#include "medium/pdu.hpp"

namespace medium {

/// Total order on applied messages: timestamp first, then sender, sequence
/// number and entity so that ties resolve deterministically.
struct OrderKey {
  std::uint64_t timestamp = 0;
  std::uint32_t sender_id = 0;
  std::uint32_t seq = 0;
  std::uint32_t entity_id = 0;

  friend auto operator<=>(const OrderKey&, const OrderKey&) = default;
};

/// Only StateUpdate and EventMessage are ordered; ping traffic is not.
OrderKey key_of(const pdu::Message& msg);

struct Apply {
  pdu::Message msg;
};

/// Undo newest-first, then replay oldest-first (late message included).
struct RollbackDirective {
  std::vector<pdu::Message> undo;
  std::vector<pdu::Message> replay;
};

struct DropDuplicate {};
struct DropBeyondWindow {};

using Delivery = std::variant<Apply, RollbackDirective, DropDuplicate, DropBeyondWindow>;

struct RollbackCallbacks {
  std::function<void(const pdu::Message&)> undo;
  std::function<void(const pdu::Message&)> apply;
};

struct RollbackStats {
  std::uint64_t applied = 0;
  std::uint64_t rollbacks = 0;
  std::uint64_t undone = 0;
  std::uint64_t duplicates = 0;
  std::uint64_t beyond_window = 0;
};

/// Messages applied so far, kept in timestamp order over a bounded history.
class DeliveryLog {
 public:
  static constexpr std::uint64_t kDefaultHistoryWindowMs = 2000;

  explicit DeliveryLog(std::uint64_t history_window_ms = kDefaultHistoryWindowMs) : window_(history_window_ms) {}

  /// Classifies an arriving message without changing the log.
  Delivery on_deliver(const pdu::Message& msg, std::uint64_t now) const;

  /// Runs the callbacks (undo newest-first, then replay oldest-first) and then
  /// records the late message. Any callback exception surfaces as
  /// Error(CallbackFailure) and leaves the log untouched.
  void apply_directive(const RollbackCallbacks& callbacks, const RollbackDirective& directive);

  /// Equivalent to a directive with an empty undo list.
  void apply(const RollbackCallbacks& callbacks, const Apply& outcome);

  /// on_deliver followed by the matching apply step; drops are counted.
  Delivery deliver(const RollbackCallbacks& callbacks, const pdu::Message& msg, std::uint64_t now);

  /// Forgets entries older than now - history window.
  void prune(std::uint64_t now);

  std::vector<pdu::Message> applied() const;
  std::size_t size() const { return applied_.size(); }
  std::uint64_t history_window_ms() const { return window_; }
  const RollbackStats& stats() const { return stats_; }

 private:
  using StreamSeq = std::tuple<std::uint32_t, std::uint32_t, std::uint32_t>;

  void record(const pdu::Message& msg);

  std::uint64_t window_;
  std::map<OrderKey, pdu::Message> applied_;
  std::set<StreamSeq> seen_;
  std::optional<OrderKey> last_;
  RollbackStats stats_;
};

}  // namespace medium
