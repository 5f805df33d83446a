#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string_view>
#include <variant>
#include <vector>

#include "medium/vec2.hpp"

namespace medium {

enum class ConsistencyMode { Normal, Strong };

std::string_view to_string(ConsistencyMode mode);

struct RectRegion {
  Vec2 min;
  Vec2 max;
};

struct CircleRegion {
  Vec2 center;
  double radius = 0.0;
};

/// Circle that follows an entity's latest known position.
struct AnchoredCircleRegion {
  std::uint32_t anchor_entity_id = 0;
  double radius = 0.0;
};

using Region = std::variant<RectRegion, CircleRegion, AnchoredCircleRegion>;

/// Latest known position of every entity (needed by anchored regions).
using EntityPositions = std::map<std::uint32_t, Vec2>;

/// Throws Error(InvalidGeometry) for inverted rectangles, non-positive radii
/// or non-finite coordinates.
void validate(const Region& region);

/// Inclusive containment. Throws Error(UnknownAnchor) when an anchored
/// region's entity has no known position.
bool contains(const Region& region, const Vec2& point, const EntityPositions& positions);

/// Registered critical regions; ids are assigned densely in insertion order.
class RegionSet {
 public:
  /// Validates and registers; returns the new region's id.
  std::uint32_t set_region_coordinates(const Region& region);

  const std::vector<Region>& regions() const { return regions_; }
  const Region& at(std::uint32_t id) const { return regions_.at(id); }
  std::size_t size() const { return regions_.size(); }
  bool empty() const { return regions_.empty(); }

  /// True if the point lies in any region. Anchored regions whose anchor is
  /// unknown, or anchored on `self`, are skipped.
  bool any_contains(const Vec2& point, const EntityPositions& positions,
                    std::optional<std::uint32_t> self = std::nullopt) const;

 private:
  std::vector<Region> regions_;
};

/// Tightening applied while an entity is in strong-consistency mode.
struct StrongModeParams {
  bool enabled = true;
  double threshold_scale = 0.25;
  double lag_scale = 0.5;
  std::uint64_t exit_hysteresis_ms = 250;

  void validate() const;
};

/// Normal/Strong state machine for one entity. Entry is immediate; after the
/// entity leaves every region it stays Strong for exit_hysteresis_ms.
class ModeTracker {
 public:
  explicit ModeTracker(std::uint64_t exit_hysteresis_ms = 250) : hysteresis_(exit_hysteresis_ms) {}

  ConsistencyMode update(bool inside, std::uint64_t now);
  ConsistencyMode mode() const { return mode_; }

 private:
  std::uint64_t hysteresis_;
  ConsistencyMode mode_ = ConsistencyMode::Normal;
  std::optional<std::uint64_t> exited_at_;
};

/// Membership query plus hysteresis update for one entity.
ConsistencyMode mode_for(ModeTracker& tracker, const Vec2& entity_pos, const RegionSet& regions,
                         const EntityPositions& positions, std::uint64_t now,
                         std::optional<std::uint32_t> self = std::nullopt);

}  // namespace medium
