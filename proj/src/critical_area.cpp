#include "medium/critical_area.hpp"

#include <cmath>
#include <string>

#include "medium/error.hpp"

namespace medium {

std::string_view to_string(ConsistencyMode mode) { return mode == ConsistencyMode::Strong ? "Strong" : "Normal"; }

namespace {

bool finite_positive(double r) { return std::isfinite(r) && r > 0.0; }

}  // namespace

void validate(const Region& region) {
  std::visit(
      [](const auto& r) {
        using T = std::decay_t<decltype(r)>;
        if constexpr (std::is_same_v<T, RectRegion>) {
          if (!is_finite(r.min) || !is_finite(r.max) || r.min.x > r.max.x || r.min.y > r.max.y) {
            throw Error(Errc::InvalidGeometry, "rectangle min must not exceed max");
          }
        } else if constexpr (std::is_same_v<T, CircleRegion>) {
          if (!is_finite(r.center) || !finite_positive(r.radius)) {
            throw Error(Errc::InvalidGeometry, "circle radius must be > 0");
          }
        } else {
          if (!finite_positive(r.radius)) throw Error(Errc::InvalidGeometry, "anchored circle radius must be > 0");
        }
      },
      region);
}

bool contains(const Region& region, const Vec2& point, const EntityPositions& positions) {
  return std::visit(
      [&](const auto& r) -> bool {
        using T = std::decay_t<decltype(r)>;
        if constexpr (std::is_same_v<T, RectRegion>) {
          return point.x >= r.min.x && point.x <= r.max.x && point.y >= r.min.y && point.y <= r.max.y;
        } else if constexpr (std::is_same_v<T, CircleRegion>) {
          return distance(point, r.center) <= r.radius;
        } else {
          auto it = positions.find(r.anchor_entity_id);
          if (it == positions.end()) {
            throw Error(Errc::UnknownAnchor, "entity " + std::to_string(r.anchor_entity_id));
          }
          return distance(point, it->second) <= r.radius;
        }
      },
      region);
}

std::uint32_t RegionSet::set_region_coordinates(const Region& region) {
  validate(region);
  regions_.push_back(region);
  return static_cast<std::uint32_t>(regions_.size() - 1);
}

bool RegionSet::any_contains(const Vec2& point, const EntityPositions& positions,
                             std::optional<std::uint32_t> self) const {
  for (const auto& region : regions_) {
    if (const auto* anchored = std::get_if<AnchoredCircleRegion>(&region)) {
      if (self && anchored->anchor_entity_id == *self) continue;
      if (!positions.contains(anchored->anchor_entity_id)) continue;
    }
    if (contains(region, point, positions)) return true;
  }
  return false;
}

void StrongModeParams::validate() const {
  auto in_unit = [](double s) { return s > 0.0 && s <= 1.0; };
  if (!in_unit(threshold_scale) || !in_unit(lag_scale)) {
    throw Error(Errc::ConfigInvalid, "strong-mode scales must be in (0,1]");
  }
}

ConsistencyMode ModeTracker::update(bool inside, std::uint64_t now) {
  if (inside) {
    mode_ = ConsistencyMode::Strong;
    exited_at_.reset();
    return mode_;
  }
  if (mode_ == ConsistencyMode::Strong) {
    if (!exited_at_) exited_at_ = now;
    if (now > *exited_at_ + hysteresis_) {
      mode_ = ConsistencyMode::Normal;
      exited_at_.reset();
    }
  }
  return mode_;
}

ConsistencyMode mode_for(ModeTracker& tracker, const Vec2& entity_pos, const RegionSet& regions,
                         const EntityPositions& positions, std::uint64_t now, std::optional<std::uint32_t> self) {
  return tracker.update(regions.any_contains(entity_pos, positions, self), now);
}

}  // namespace medium
