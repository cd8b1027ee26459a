#include "enmloc/scan.hpp"

#include <cmath>

#include "enmloc/error.hpp"

namespace enmloc {

std::size_t LidarScan::valid_count() const {
  std::size_t n = 0;
  for (const Ray& r : rays) {
    n += r.valid ? 1 : 0;
  }
  return n;
}

LidarScan LidarScan::from_ranges(double time, const Pose2& odom, std::optional<Pose2> gt,
                                 double angle_min, double angle_inc, double range_max,
                                 const std::vector<double>& ranges) {
  LidarScan scan;
  scan.time = time;
  scan.odom = odom;
  scan.gt = gt;
  scan.angle_min = angle_min;
  scan.angle_inc = angle_inc;
  scan.range_max = range_max;
  scan.rays.reserve(ranges.size());
  for (std::size_t k = 0; k < ranges.size(); ++k) {
    const double a = scan.bearing(k);
    Ray ray;
    ray.direction = {std::cos(a), std::sin(a)};
    ray.range = ranges[k];
    ray.valid = std::isfinite(ranges[k]) && ranges[k] > 0.0 && ranges[k] <= range_max;
    scan.rays.push_back(ray);
  }
  return scan;
}

std::vector<Endpoint> scan_endpoints(const LidarScan& scan, const Pose2& pose) {
  std::vector<Endpoint> out;
  out.reserve(scan.rays.size());
  for (const Ray& ray : scan.rays) {
    if (!ray.valid) {
      continue;
    }
    out.push_back({pose.apply(ray.direction * ray.range), pose.rotate(ray.direction)});
  }
  if (out.empty()) {
    throw EmptyScan("scan has no valid rays");
  }
  return out;
}

std::vector<std::size_t> subsample_valid_rays(const LidarScan& scan, std::size_t k) {
  std::vector<std::size_t> valid;
  for (std::size_t i = 0; i < scan.rays.size(); ++i) {
    if (scan.rays[i].valid) {
      valid.push_back(i);
    }
  }
  if (k == 0 || valid.size() <= k) {
    return valid;
  }
  std::vector<std::size_t> out(k);
  for (std::size_t i = 0; i < k; ++i) {
    // Centered picks: i-th of k equal strata.
    out[i] = valid[(2 * i + 1) * valid.size() / (2 * k)];
  }
  return out;
}

}  // namespace enmloc
