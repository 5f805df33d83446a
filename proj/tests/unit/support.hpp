#pragma once

#include <cstdint>
#include <optional>
#include <string_view>
#include <vector>

#include "medium/error.hpp"

namespace testing {

template <typename F>
std::optional<medium::Errc> error_of(F&& f) {
  try {
    f();
  } catch (const medium::Error& e) {
    return e.code();
  }
  return std::nullopt;
}

inline std::vector<std::uint8_t> from_hex(std::string_view hex) {
  auto nibble = [](char c) -> std::uint8_t { return static_cast<std::uint8_t>(c <= '9' ? c - '0' : c - 'a' + 10); };
  std::vector<std::uint8_t> out;
  for (std::size_t i = 0; i + 1 < hex.size(); i += 2) {
    out.push_back(static_cast<std::uint8_t>(nibble(hex[i]) << 4 | nibble(hex[i + 1])));
  }
  return out;
}

}  // namespace testing
