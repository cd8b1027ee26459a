#pragma once

#include <numbers>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "enmloc/odometry_model.hpp"
#include "enmloc/random.hpp"
#include "enmloc/scan.hpp"
#include "enmloc/sim/floorplan.hpp"

namespace enmloc::sim {

/// Planar scanner model. Defaults resemble a 270 degree, 30 m unit.
struct SensorSpec {
  std::size_t n_beams = 1081;
  double fov = 1.5 * std::numbers::pi;
  double range_max = 30.0;
  double range_noise_std = 0.01;

  double angle_min() const { return -0.5 * fov; }
  double angle_inc() const { return n_beams > 1 ? fov / static_cast<double>(n_beams - 1) : 0.0; }
  void validate() const;
};

/// Casts every beam of `spec` from `pose`. The scan's gt and odom are set
/// to `pose`; callers replace odom as needed. Throws InvalidArgument when
/// the pose lies outside the plan bounds.
LidarScan raycast(const FloorPlan& plan, const Pose2& pose, const SensorSpec& spec, Rng& rng,
                  double time = 0.0);

struct TimedPose {
  double time = 0.0;
  Pose2 pose;
};

/// Turn-in-place then drive-straight path through the waypoints, sampled
/// every dt seconds. The initial heading faces the second waypoint. Throws
/// InvalidArgument if any sampled pose is closer than `clearance` to a wall
/// or outside free space.
std::vector<TimedPose> generate_trajectory(const FloorPlan& plan, std::span<const Vec2> waypoints,
                                           double speed, double yaw_rate_max, double dt,
                                           double clearance = 0.3);

/// Integrates noisy rot-trans-rot increments of consecutive ground-truth
/// poses. The odometry frame starts at the identity.
std::vector<Pose2> corrupt_odometry(std::span<const Pose2> poses, const MotionNoise& noise,
                                    Rng& rng);

/// One scan per trajectory sample, with ground truth and corrupted odometry.
std::vector<LidarScan> simulate_dataset(const FloorPlan& plan,
                                        std::span<const TimedPose> trajectory,
                                        const SensorSpec& spec, const MotionNoise& odom_noise,
                                        Rng& rng);

/// Scans from `count` random collision-free poses (clearance to walls),
/// for training a map. Times are 0, 1, 2, ...
std::vector<LidarScan> simulate_mapping_scans(const FloorPlan& plan, std::size_t count,
                                              const SensorSpec& spec, double clearance,
                                              Rng& rng);

/// A built-in world and a route through it for localization sequences.
struct World {
  std::string name;
  FloorPlan plan;
  std::vector<Vec2> route;
};

std::vector<std::string> world_names();
/// Throws InvalidArgument for an unknown name.
World make_world(std::string_view name);

}  // namespace enmloc::sim
