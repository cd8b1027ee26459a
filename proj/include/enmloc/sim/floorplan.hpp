#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "enmloc/feature_grid.hpp"
#include "enmloc/se2.hpp"

namespace enmloc::sim {

struct Segment {
  Vec2 a;
  Vec2 b;
};

double point_segment_distance(const Vec2& p, const Segment& s);
/// Distance along the ray o + t d (t >= 0) to the segment, or +inf.
double ray_segment_distance(const Vec2& o, const Vec2& d, const Segment& s);

/// Line-segment world with a precomputed free-space mask used for signing
/// distances. Free space is everything reachable from the interior point
/// without crossing a wall; the rest (including outside the mask) is inside
/// obstacles.
class FloorPlan {
 public:
  static constexpr double kMaskResolution = 0.01;
  static constexpr double kMaskPad = 2.0;

  FloorPlan(std::vector<Segment> segments, Bounds bounds, Vec2 interior);

  const std::vector<Segment>& segments() const { return segments_; }
  const Bounds& bounds() const { return bounds_; }
  Vec2 interior_point() const { return interior_; }

  /// Distance to the nearest wall.
  double distance(const Vec2& p) const;
  /// Signed distance: positive in free space, negative inside obstacles.
  double true_sdf(const Vec2& p) const;
  /// Distance from p along unit d to the first wall; +inf without a hit.
  double true_psdf(const Vec2& p, const Vec2& d) const;
  /// True when p's mask cell is reachable free space.
  bool is_free(const Vec2& p) const;

 private:
  enum Cell : std::uint8_t { kUnknown = 0, kWall = 1, kFree = 2 };
  Cell cell_at(const Vec2& p) const;
  void build_mask();

  std::vector<Segment> segments_;
  Bounds bounds_;
  Vec2 interior_;
  Vec2 mask_origin_;
  std::size_t mask_nx_ = 0;
  std::size_t mask_ny_ = 0;
  std::vector<std::uint8_t> mask_;
};

/// Text format: `bounds minx miny maxx maxy interior px py` header, then one
/// `ax ay bx by` line per wall. Lines starting with '#' are comments.
FloorPlan read_floorplan(std::istream& is);
FloorPlan read_floorplan_file(const std::string& path);
void write_floorplan(std::ostream& os, const FloorPlan& plan);

}  // namespace enmloc::sim
