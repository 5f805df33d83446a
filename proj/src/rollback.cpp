#include "medium/rollback.hpp"

#include <exception>
#include <string>

#include "medium/error.hpp"

namespace medium {

OrderKey key_of(const pdu::Message& msg) {
  return std::visit(
      [](const auto& m) -> OrderKey {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, pdu::StateUpdate> || std::is_same_v<T, pdu::EventMessage>) {
          return {m.timestamp, m.sender_id, m.seq, m.entity_id};
        } else {
          return {m.timestamp, m.sender_id, static_cast<std::uint32_t>(m.nonce), 0};
        }
      },
      msg);
}

Delivery DeliveryLog::on_deliver(const pdu::Message& msg, std::uint64_t now) const {
  const OrderKey key = key_of(msg);
  if (seen_.contains({key.sender_id, key.entity_id, key.seq}) || (last_ && key == *last_)) return DropDuplicate{};
  if (!last_ || key > *last_) return Apply{msg};
  if (key.timestamp + window_ < now) return DropBeyondWindow{};

  RollbackDirective directive;
  directive.replay.push_back(msg);
  for (auto it = applied_.upper_bound(key); it != applied_.end(); ++it) directive.replay.push_back(it->second);
  for (auto it = directive.replay.rbegin(); it != directive.replay.rend() - 1; ++it) directive.undo.push_back(*it);
  return directive;
}

void DeliveryLog::apply_directive(const RollbackCallbacks& callbacks, const RollbackDirective& directive) {
  try {
    for (const auto& m : directive.undo) {
      if (callbacks.undo) callbacks.undo(m);
    }
    for (const auto& m : directive.replay) {
      if (callbacks.apply) callbacks.apply(m);
    }
  } catch (const std::exception& e) {
    throw Error(Errc::CallbackFailure, e.what());
  } catch (...) {
    throw Error(Errc::CallbackFailure, "non-standard exception from game callback");
  }
  if (directive.replay.empty()) return;
  if (!directive.undo.empty()) {
    ++stats_.rollbacks;
    stats_.undone += directive.undo.size();
  }
  // The undone messages are already in the log; only the late one is new.
  record(directive.replay.front());
}

void DeliveryLog::apply(const RollbackCallbacks& callbacks, const Apply& outcome) {
  apply_directive(callbacks, RollbackDirective{{}, {outcome.msg}});
}

Delivery DeliveryLog::deliver(const RollbackCallbacks& callbacks, const pdu::Message& msg, std::uint64_t now) {
  Delivery outcome = on_deliver(msg, now);
  if (const auto* a = std::get_if<Apply>(&outcome)) {
    apply(callbacks, *a);
  } else if (const auto* d = std::get_if<RollbackDirective>(&outcome)) {
    apply_directive(callbacks, *d);
  } else if (std::holds_alternative<DropDuplicate>(outcome)) {
    ++stats_.duplicates;
  } else {
    ++stats_.beyond_window;
  }
  return outcome;
}

void DeliveryLog::record(const pdu::Message& msg) {
  const OrderKey key = key_of(msg);
  applied_.emplace(key, msg);
  seen_.insert({key.sender_id, key.entity_id, key.seq});
  if (!last_ || key > *last_) last_ = key;
  ++stats_.applied;
}

void DeliveryLog::prune(std::uint64_t now) {
  if (now < window_) return;
  const std::uint64_t horizon = now - window_;
  auto it = applied_.begin();
  while (it != applied_.end() && it->first.timestamp < horizon) {
    seen_.erase({it->first.sender_id, it->first.entity_id, it->first.seq});
    it = applied_.erase(it);
  }
}

std::vector<pdu::Message> DeliveryLog::applied() const {
  std::vector<pdu::Message> out;
  out.reserve(applied_.size());
  for (const auto& [key, msg] : applied_) out.push_back(msg);
  return out;
}

}  // namespace medium
