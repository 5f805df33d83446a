#include "medium/netsim.hpp"

#include <cmath>
#include <string>

#include "medium/error.hpp"
#include "medium/pdu.hpp"

namespace medium::netsim {
namespace {

constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;

std::uint64_t splitmix64(std::uint64_t x) {
  std::uint64_t z = x + kGolden;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

const char* type_name(pdu::MessageType t) {
  switch (t) {
    case pdu::MessageType::StateUpdate:
      return "StateUpdate";
    case pdu::MessageType::Event:
      return "Event";
    case pdu::MessageType::Ping:
      return "Ping";
    case pdu::MessageType::Pong:
      return "Pong";
  }
  return "?";
}

}  // namespace

SimRng::SimRng(std::uint64_t seed) : seed_(seed), state_(splitmix64(seed)) {
  if (state_ == 0) state_ = kGolden;
}

std::uint64_t SimRng::next_u64() {
  std::uint64_t x = state_;
  x ^= x >> 12;
  x ^= x << 25;
  x ^= x >> 27;
  state_ = x;
  return x * 0x2545F4914F6CDD1DULL;
}

double SimRng::next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

Simulator::Simulator(std::uint64_t seed, JitterModel jitter) : rng_(seed), jitter_model_(jitter) {}

void Simulator::add_link(const LinkSpec& link) {
  link.validate();
  if (!links_.emplace(link.link_id, link).second) {
    throw Error(Errc::ConfigInvalid, "duplicate link " + std::to_string(link.link_id));
  }
}

const LinkSpec& Simulator::link(std::uint32_t link_id) const {
  auto it = links_.find(link_id);
  if (it == links_.end()) throw Error(Errc::UnknownLink, "link " + std::to_string(link_id));
  return it->second;
}

LinkSpec& Simulator::mutable_link(std::uint32_t link_id) {
  auto it = links_.find(link_id);
  if (it == links_.end()) throw Error(Errc::UnknownLink, "link " + std::to_string(link_id));
  return it->second;
}

void Simulator::set_link_available(std::uint32_t link_id, bool available) {
  mutable_link(link_id).available = available;
}

void Simulator::set_link_delay(std::uint32_t link_id, double new_base_delay_ms, std::uint64_t at) {
  mutable_link(link_id);
  if (!std::isfinite(new_base_delay_ms) || new_base_delay_ms < 0.0) {
    throw Error(Errc::ConfigInvalid, "link " + std::to_string(link_id) + " delay must be finite and >= 0");
  }
  delay_changes_[link_id][at] = new_base_delay_ms;
}

double Simulator::base_delay_at(std::uint32_t link_id, std::uint64_t t) const {
  const LinkSpec& spec = link(link_id);
  auto changes = delay_changes_.find(link_id);
  if (changes == delay_changes_.end()) return spec.base_delay_ms;
  auto it = changes->second.upper_bound(t);
  if (it == changes->second.begin()) return spec.base_delay_ms;
  return std::prev(it)->second;
}

SendOutcome Simulator::send(std::uint32_t link_id, std::uint32_t sender, std::vector<std::uint8_t> payload,
                            std::uint64_t now) {
  const LinkSpec& spec = link(link_id);
  advance_to(now);
  ++stats_.sent;
  const std::uint32_t dest = spec.other_end(sender);
  trace(now, "SEND", link_id, sender, dest, payload);

  if (!spec.available) {
    ++stats_.dropped_unavailable;
    trace(now, "DROP", link_id, sender, dest, payload);
    return SendOutcome::Dropped;
  }
  if (rng_.next_double() < spec.loss_prob) {
    ++stats_.dropped_loss;
    trace(now, "DROP", link_id, sender, dest, payload);
    return SendOutcome::Dropped;
  }

  double delay = base_delay_at(link_id, now);
  if (spec.jitter_ms > 0.0) {
    double u = rng_.next_double();
    if (jitter_model_ == JitterModel::Triangular) u = 0.5 * (u + rng_.next_double());
    delay += (2.0 * u - 1.0) * spec.jitter_ms;
  }
  const long long rounded = std::llround(delay);
  const std::uint64_t hops = rounded < 1 ? 1 : static_cast<std::uint64_t>(rounded);

  queue_.push(SimEvent{now + hops, dest, sender, link_id, std::move(payload), next_insertion_++});
  return SendOutcome::Scheduled;
}

bool Simulator::transmit(std::uint32_t link_id, std::uint32_t sender, std::vector<std::uint8_t> frame,
                         std::uint64_t now) {
  return send(link_id, sender, std::move(frame), now) == SendOutcome::Scheduled;
}

SimEvent Simulator::step() {
  if (queue_.empty()) throw Error(Errc::EmptyQueue, "no scheduled events");
  SimEvent ev = queue_.top();
  queue_.pop();
  advance_to(ev.deliver_at);
  ++stats_.delivered;
  trace(ev.deliver_at, "DELIVER", ev.link_id, ev.sender, ev.dest, ev.payload);
  auto handler = handlers_.find(ev.dest);
  if (handler != handlers_.end() && handler->second) handler->second(ev);
  return ev;
}

void Simulator::attach(std::uint32_t client_id, std::function<void(const SimEvent&)> handler) {
  handlers_[client_id] = std::move(handler);
}

void Simulator::advance_to(std::uint64_t t) {
  if (t > now_) now_ = t;
}

std::optional<std::uint64_t> Simulator::next_delivery_time() const {
  if (queue_.empty()) return std::nullopt;
  return queue_.top().deliver_at;
}

void Simulator::trace(std::uint64_t t, const char* kind, std::uint32_t link_id, std::uint32_t sender,
                      std::uint32_t dest, const std::vector<std::uint8_t>& payload) const {
  if (trace_ == nullptr) return;
  auto header = pdu::peek_header(payload);
  *trace_ << t << '\t' << kind << '\t' << link_id << '\t' << sender << '\t' << dest << '\t'
          << (header ? type_name(header->type) : "?") << '\t' << (header ? header->seq : 0) << '\n';
}

}  // namespace medium::netsim
