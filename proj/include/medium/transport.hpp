#pragma once

#include <cstdint>
#include <vector>

namespace medium {

/// Outbound path from a Player Manager to the network layer.
class Transport {
 public:
  virtual ~Transport() = default;

  /// Hands an encoded frame to `link_id`; returns false if it was dropped.
  virtual bool transmit(std::uint32_t link_id, std::uint32_t sender, std::vector<std::uint8_t> frame,
                        std::uint64_t now) = 0;
};

}  // namespace medium
