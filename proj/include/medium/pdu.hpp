#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <variant>
#include <vector>

#include "medium/vec2.hpp"

namespace medium::pdu {

inline constexpr std::uint8_t kMagic0 = 0x4D;
inline constexpr std::uint8_t kMagic1 = 0x53;
inline constexpr std::uint8_t kVersion = 0x01;

enum class MessageType : std::uint8_t {
  StateUpdate = 0x01,
  Event = 0x02,
  Ping = 0x03,
  Pong = 0x04,
};

/// Fixed frame sizes: 24-byte common header plus the type-specific payload.
inline constexpr std::size_t kHeaderSize = 24;
inline constexpr std::size_t kStateUpdateSize = kHeaderSize + 4 * 8 + 1;
inline constexpr std::size_t kEventSize = kHeaderSize + 1 + 8;
inline constexpr std::size_t kPingSize = kHeaderSize + 4;
inline constexpr std::size_t kPongSize = kHeaderSize + 4 + 8;

std::size_t frame_size(MessageType type);

struct StateUpdate {
  std::uint32_t sender_id = 0;
  std::uint32_t entity_id = 0;
  std::uint32_t seq = 0;
  std::uint64_t timestamp = 0;
  Vec2 pos;
  Vec2 vel;
  bool critical = false;

  friend bool operator==(const StateUpdate&, const StateUpdate&) = default;
};

enum class EventKind : std::uint8_t { Fire = 0x01, Spawn = 0x02, Despawn = 0x03 };

struct EventMessage {
  std::uint32_t sender_id = 0;
  std::uint32_t entity_id = 0;
  std::uint32_t seq = 0;
  std::uint64_t timestamp = 0;
  EventKind kind = EventKind::Fire;
  std::array<std::uint8_t, 8> payload{};

  friend bool operator==(const EventMessage&, const EventMessage&) = default;
};

struct PingMessage {
  std::uint32_t sender_id = 0;
  std::uint64_t nonce = 0;
  std::uint64_t timestamp = 0;

  friend bool operator==(const PingMessage&, const PingMessage&) = default;
};

struct PongMessage {
  std::uint32_t sender_id = 0;
  std::uint64_t nonce = 0;
  std::uint64_t timestamp = 0;
  std::uint64_t echo_timestamp = 0;

  friend bool operator==(const PongMessage&, const PongMessage&) = default;
};

using Message = std::variant<StateUpdate, EventMessage, PingMessage, PongMessage>;

MessageType type_of(const Message& msg);

enum class DecodeError {
  BadMagic,
  BadVersion,
  UnknownType,
  TruncatedFrame,
  NonFiniteField,
};

std::string_view to_string(DecodeError err);

/// Outcome of decode(): either a message or the reason the frame was rejected.
class DecodeResult {
 public:
  DecodeResult(Message msg) : value_(std::move(msg)) {}  // NOLINT(google-explicit-constructor)
  DecodeResult(DecodeError err) : value_(err) {}         // NOLINT(google-explicit-constructor)

  bool ok() const { return std::holds_alternative<Message>(value_); }
  explicit operator bool() const { return ok(); }
  const Message& message() const { return std::get<Message>(value_); }
  DecodeError error() const { return std::get<DecodeError>(value_); }

 private:
  std::variant<Message, DecodeError> value_;
};

/// Serializes a message to its fixed big-endian layout.
/// Throws Error(NonFiniteField) if any floating field is NaN or infinite.
std::vector<std::uint8_t> encode(const Message& msg);

/// Parses one frame from the front of `bytes`. Bytes past the frame length
/// for the declared type are never read.
DecodeResult decode(std::span<const std::uint8_t> bytes);

/// Common header fields, readable without a full decode (used by trace logs).
struct HeaderView {
  MessageType type;
  std::uint32_t sender_id;
  std::uint32_t entity_id;
  std::uint32_t seq;
  std::uint64_t timestamp;
};

std::optional<HeaderView> peek_header(std::span<const std::uint8_t> bytes);

// Stream identity and ordering helpers shared by the pipeline modules.
std::uint32_t sender_of(const Message& msg);
std::uint64_t timestamp_of(const Message& msg);

}  // namespace medium::pdu
