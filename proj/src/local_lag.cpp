#include "medium/local_lag.hpp"

#include <cmath>
#include <tuple>

#include "medium/error.hpp"
#include "medium/rollback.hpp"

namespace medium {

void LagPolicy::set_local_lag_value(const std::string& class_id, std::int64_t lag_ms) {
  if (lag_ms < 0) throw Error(Errc::NegativeLag, class_id + " lag " + std::to_string(lag_ms));
  base_lag_ms[class_id] = static_cast<std::uint64_t>(lag_ms);
}

std::uint64_t LagPolicy::base_lag(const std::string& class_id) const {
  auto it = base_lag_ms.find(class_id);
  return it == base_lag_ms.end() ? default_lag_ms : it->second;
}

std::uint64_t LagPolicy::effective_lag(const std::string& class_id, ConsistencyMode mode) const {
  const std::uint64_t base = base_lag(class_id);
  if (mode == ConsistencyMode::Normal) return base;
  return static_cast<std::uint64_t>(std::llround(static_cast<double>(base) * critical_scale));
}

bool PlayoutBuffer::Order::operator()(const PlayoutEntry& a, const PlayoutEntry& b) const {
  // Same tie-break as the delivery log, so on-time releases never trigger a rollback.
  return std::make_tuple(a.due, key_of(a.msg)) < std::make_tuple(b.due, key_of(b.msg));
}

EnqueueResult PlayoutBuffer::enqueue(const pdu::Message& msg, const std::string& class_id, ConsistencyMode mode,
                                     const LagPolicy& policy, std::uint64_t now) {
  PlayoutEntry entry{msg, pdu::timestamp_of(msg) + policy.effective_lag(class_id, mode), now};
  if (now > entry.due) return {std::move(entry), Timeliness::Late};
  entries_.insert(entry);
  return {std::move(entry), Timeliness::OnTime};
}

void PlayoutBuffer::push(PlayoutEntry entry) { entries_.insert(std::move(entry)); }

std::vector<PlayoutEntry> PlayoutBuffer::release_due(std::uint64_t now) {
  std::vector<PlayoutEntry> out;
  auto it = entries_.begin();
  while (it != entries_.end() && it->due <= now) {
    out.push_back(*it);
    it = entries_.erase(it);
  }
  return out;
}

}  // namespace medium
