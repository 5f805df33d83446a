#include "medium/pdu.hpp"

#include <bit>
#include <cmath>

#include "medium/error.hpp"

namespace medium::pdu {
namespace {

class Writer {
 public:
  explicit Writer(std::size_t size) { out_.reserve(size); }

  void u8(std::uint8_t v) { out_.push_back(v); }
  void u32(std::uint32_t v) {
    for (int shift = 24; shift >= 0; shift -= 8) out_.push_back(static_cast<std::uint8_t>(v >> shift));
  }
  void u64(std::uint64_t v) {
    for (int shift = 56; shift >= 0; shift -= 8) out_.push_back(static_cast<std::uint8_t>(v >> shift));
  }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }

  std::vector<std::uint8_t> take() { return std::move(out_); }

 private:
  std::vector<std::uint8_t> out_;
};

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  std::uint8_t u8() { return bytes_[pos_++]; }
  std::uint32_t u32() {
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v = (v << 8) | bytes_[pos_++];
    return v;
  }
  std::uint64_t u64() {
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v = (v << 8) | bytes_[pos_++];
    return v;
  }
  double f64() { return std::bit_cast<double>(u64()); }

 private:
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

void header(Writer& w, MessageType type, std::uint32_t sender, std::uint32_t entity, std::uint32_t seq,
            std::uint64_t timestamp) {
  w.u8(kMagic0);
  w.u8(kMagic1);
  w.u8(kVersion);
  w.u8(static_cast<std::uint8_t>(type));
  w.u32(sender);
  w.u32(entity);
  w.u32(seq);
  w.u64(timestamp);
}

void require_finite(const Vec2& v, const char* field) {
  if (!is_finite(v)) throw Error(Errc::NonFiniteField, field);
}

std::optional<MessageType> parse_type(std::uint8_t raw) {
  if (raw >= 0x01 && raw <= 0x04) return static_cast<MessageType>(raw);
  return std::nullopt;
}

struct Encoder {
  std::vector<std::uint8_t> operator()(const StateUpdate& m) const {
    require_finite(m.pos, "pos");
    require_finite(m.vel, "vel");
    Writer w(kStateUpdateSize);
    header(w, MessageType::StateUpdate, m.sender_id, m.entity_id, m.seq, m.timestamp);
    w.f64(m.pos.x);
    w.f64(m.pos.y);
    w.f64(m.vel.x);
    w.f64(m.vel.y);
    w.u8(m.critical ? 0x01 : 0x00);
    return w.take();
  }
  std::vector<std::uint8_t> operator()(const EventMessage& m) const {
    Writer w(kEventSize);
    header(w, MessageType::Event, m.sender_id, m.entity_id, m.seq, m.timestamp);
    w.u8(static_cast<std::uint8_t>(m.kind));
    for (auto b : m.payload) w.u8(b);
    return w.take();
  }
  std::vector<std::uint8_t> operator()(const PingMessage& m) const {
    Writer w(kPingSize);
    header(w, MessageType::Ping, m.sender_id, 0, static_cast<std::uint32_t>(m.nonce), m.timestamp);
    w.u32(static_cast<std::uint32_t>(m.nonce >> 32));
    return w.take();
  }
  std::vector<std::uint8_t> operator()(const PongMessage& m) const {
    Writer w(kPongSize);
    header(w, MessageType::Pong, m.sender_id, 0, static_cast<std::uint32_t>(m.nonce), m.timestamp);
    w.u32(static_cast<std::uint32_t>(m.nonce >> 32));
    w.u64(m.echo_timestamp);
    return w.take();
  }
};

}  // namespace

std::size_t frame_size(MessageType type) {
  switch (type) {
    case MessageType::StateUpdate:
      return kStateUpdateSize;
    case MessageType::Event:
      return kEventSize;
    case MessageType::Ping:
      return kPingSize;
    case MessageType::Pong:
      return kPongSize;
  }
  return 0;
}

MessageType type_of(const Message& msg) { return static_cast<MessageType>(msg.index() + 1); }

std::string_view to_string(DecodeError err) {
  switch (err) {
    case DecodeError::BadMagic:
      return "BadMagic";
    case DecodeError::BadVersion:
      return "BadVersion";
    case DecodeError::UnknownType:
      return "UnknownType";
    case DecodeError::TruncatedFrame:
      return "TruncatedFrame";
    case DecodeError::NonFiniteField:
      return "NonFiniteField";
  }
  return "Unknown";
}

std::vector<std::uint8_t> encode(const Message& msg) { return std::visit(Encoder{}, msg); }

DecodeResult decode(std::span<const std::uint8_t> bytes) {
  // magic, version and type must all be present before the length is known
  if (bytes.size() < 4) return DecodeError::TruncatedFrame;
  if (bytes[0] != kMagic0 || bytes[1] != kMagic1) return DecodeError::BadMagic;
  if (bytes[2] != kVersion) return DecodeError::BadVersion;
  auto type = parse_type(bytes[3]);
  if (!type) return DecodeError::UnknownType;
  const std::size_t size = frame_size(*type);
  if (bytes.size() < size) return DecodeError::TruncatedFrame;

  Reader r(bytes.first(size));
  r.u32();  // magic, version, type
  const std::uint32_t sender = r.u32();
  const std::uint32_t entity = r.u32();
  const std::uint32_t seq = r.u32();
  const std::uint64_t timestamp = r.u64();

  switch (*type) {
    case MessageType::StateUpdate: {
      StateUpdate m{sender, entity, seq, timestamp, {}, {}, false};
      m.pos.x = r.f64();
      m.pos.y = r.f64();
      m.vel.x = r.f64();
      m.vel.y = r.f64();
      m.critical = (r.u8() & 0x01) != 0;
      if (!is_finite(m.pos) || !is_finite(m.vel)) return DecodeError::NonFiniteField;
      return Message{m};
    }
    case MessageType::Event: {
      EventMessage m{sender, entity, seq, timestamp, EventKind::Fire, {}};
      const std::uint8_t kind = r.u8();
      if (kind < 0x01 || kind > 0x03) return DecodeError::UnknownType;
      m.kind = static_cast<EventKind>(kind);
      for (auto& b : m.payload) b = r.u8();
      return Message{m};
    }
    case MessageType::Ping: {
      const std::uint64_t high = r.u32();
      return Message{PingMessage{sender, (high << 32) | seq, timestamp}};
    }
    case MessageType::Pong: {
      const std::uint64_t high = r.u32();
      const std::uint64_t echo = r.u64();
      return Message{PongMessage{sender, (high << 32) | seq, timestamp, echo}};
    }
  }
  return DecodeError::UnknownType;
}

std::optional<HeaderView> peek_header(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < kHeaderSize || bytes[0] != kMagic0 || bytes[1] != kMagic1) return std::nullopt;
  auto type = parse_type(bytes[3]);
  if (!type) return std::nullopt;
  Reader r(bytes.first(kHeaderSize));
  r.u32();
  HeaderView h{*type, 0, 0, 0, 0};
  h.sender_id = r.u32();
  h.entity_id = r.u32();
  h.seq = r.u32();
  h.timestamp = r.u64();
  return h;
}

std::uint32_t sender_of(const Message& msg) {
  return std::visit([](const auto& m) { return m.sender_id; }, msg);
}

std::uint64_t timestamp_of(const Message& msg) {
  return std::visit([](const auto& m) { return m.timestamp; }, msg);
}

}  // namespace medium::pdu
