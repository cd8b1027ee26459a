#pragma once

#include <optional>
#include <vector>

#include "enmloc/se2.hpp"

namespace enmloc {

struct Ray {
  Vec2 direction;  // unit vector in the sensor frame
  double range = 0.0;
  bool valid = false;
};

/// A planar scan. Beam k has bearing angle_min + k * angle_inc; rays are
/// stored in that order.
struct LidarScan {
  double time = 0.0;
  Pose2 odom;
  std::optional<Pose2> gt;
  double angle_min = 0.0;
  double angle_inc = 0.0;
  double range_max = 0.0;
  std::vector<Ray> rays;

  double bearing(std::size_t k) const { return angle_min + static_cast<double>(k) * angle_inc; }
  std::size_t valid_count() const;

  /// Builds a scan from a raw range array. Non-positive, non-finite or
  /// beyond-max entries become invalid rays.
  static LidarScan from_ranges(double time, const Pose2& odom, std::optional<Pose2> gt,
                               double angle_min, double angle_inc, double range_max,
                               const std::vector<double>& ranges);
};

struct Endpoint {
  Vec2 point;      // world frame
  Vec2 world_dir;  // unit ray direction in the world frame
};

/// Maps every valid ray of `scan` into the world through `pose`.
/// Throws EmptyScan when the scan has no valid ray.
std::vector<Endpoint> scan_endpoints(const LidarScan& scan, const Pose2& pose);

/// Indices of up to `k` valid rays spread evenly over the valid set.
std::vector<std::size_t> subsample_valid_rays(const LidarScan& scan, std::size_t k);

}  // namespace enmloc
