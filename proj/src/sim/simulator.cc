#include "enmloc/sim/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "enmloc/error.hpp"

namespace enmloc::sim {

void SensorSpec::validate() const {
  if (n_beams < 1) {
    throw InvalidArgument("sensor needs at least one beam");
  }
  if (!(range_max > 0.0) || !(fov >= 0.0) || !(range_noise_std >= 0.0)) {
    throw InvalidArgument("sensor range_max must be positive, fov and noise non-negative");
  }
}

LidarScan raycast(const FloorPlan& plan, const Pose2& pose, const SensorSpec& spec, Rng& rng,
                  double time) {
  spec.validate();
  if (!plan.bounds().contains(pose.translation())) {
    throw InvalidArgument("raycast: sensor pose outside the floor plan");
  }
  std::normal_distribution<double> noise(0.0, spec.range_noise_std);
  std::vector<double> ranges(spec.n_beams);
  for (std::size_t k = 0; k < spec.n_beams; ++k) {
    const double a = spec.angle_min() + static_cast<double>(k) * spec.angle_inc();
    const Vec2 dir = pose.rotate({std::cos(a), std::sin(a)});
    double r = plan.true_psdf(pose.translation(), dir);
    if (std::isfinite(r) && spec.range_noise_std > 0.0) {
      r += noise(rng);
    }
    ranges[k] = (std::isfinite(r) && r > 0.0 && r <= spec.range_max) ? r : -1.0;
  }
  return LidarScan::from_ranges(time, pose, pose, spec.angle_min(), spec.angle_inc(),
                                spec.range_max, ranges);
}

std::vector<TimedPose> generate_trajectory(const FloorPlan& plan, std::span<const Vec2> waypoints,
                                           double speed, double yaw_rate_max, double dt,
                                           double clearance) {
  if (waypoints.empty()) {
    throw InvalidArgument("generate_trajectory: no waypoints");
  }
  if (!(speed > 0.0) || !(yaw_rate_max > 0.0) || !(dt > 0.0)) {
    throw InvalidArgument("generate_trajectory: speed, yaw rate and dt must be positive");
  }
  // Piecewise motion: each phase either turns in place or drives straight.
  struct Phase {
    Pose2 start;
    double duration;
    double yaw_rate;  // turn phases
    double speed;     // drive phases
  };
  std::vector<Phase> phases;
  double heading = waypoints.size() > 1 ? std::atan2(waypoints[1].y - waypoints[0].y,
                                                     waypoints[1].x - waypoints[0].x)
                                        : 0.0;
  Pose2 current(waypoints[0], heading);
  for (std::size_t i = 1; i < waypoints.size(); ++i) {
    const Vec2 delta = waypoints[i] - waypoints[i - 1];
    const double length = delta.norm();
    if (length == 0.0) {
      continue;
    }
    const double target = std::atan2(delta.y, delta.x);
    const double turn = angle_wrap(target - current.theta());
    if (turn != 0.0) {
      const double duration = std::abs(turn) / yaw_rate_max;
      phases.push_back({current, duration, turn / duration, 0.0});
      current = Pose2(current.translation(), target);
    }
    phases.push_back({current, length / speed, 0.0, speed});
    current = Pose2(waypoints[i], target);
  }

  double total = 0.0;
  for (const Phase& p : phases) {
    total += p.duration;
  }
  const auto steps = static_cast<std::size_t>(std::floor(total / dt + 1e-9));
  std::vector<TimedPose> out;
  out.reserve(steps + 1);
  std::size_t phase = 0;
  double phase_start = 0.0;
  for (std::size_t k = 0; k <= steps; ++k) {
    const double t = static_cast<double>(k) * dt;
    while (phase < phases.size() && t > phase_start + phases[phase].duration + 1e-12) {
      phase_start += phases[phase].duration;
      ++phase;
    }
    Pose2 pose = current;
    if (phase < phases.size()) {
      const Phase& p = phases[phase];
      const double tau = std::min(t - phase_start, p.duration);
      pose = Pose2(p.start.translation() + Vec2{std::cos(p.start.theta()),
                                                std::sin(p.start.theta())} * (p.speed * tau),
                   p.start.theta() + p.yaw_rate * tau);
    }
    if (!plan.is_free(pose.translation()) || plan.true_sdf(pose.translation()) < clearance) {
      throw InvalidArgument("generate_trajectory: pose at t=" + std::to_string(t) +
                            " violates the wall clearance");
    }
    out.push_back({t, pose});
  }
  return out;
}

std::vector<Pose2> corrupt_odometry(std::span<const Pose2> poses, const MotionNoise& noise,
                                    Rng& rng) {
  if (poses.size() < 2) {
    throw InvalidArgument("corrupt_odometry: need at least two poses");
  }
  std::vector<Pose2> odom{Pose2::identity()};
  odom.reserve(poses.size());
  for (std::size_t i = 1; i < poses.size(); ++i) {
    const Pose2 inc = pose_between(poses[i - 1], poses[i]);
    odom.push_back(pose_compose(odom.back(), sample_increment(inc, noise, rng)));
  }
  return odom;
}

std::vector<LidarScan> simulate_dataset(const FloorPlan& plan,
                                        std::span<const TimedPose> trajectory,
                                        const SensorSpec& spec, const MotionNoise& odom_noise,
                                        Rng& rng) {
  std::vector<Pose2> gt;
  gt.reserve(trajectory.size());
  for (const TimedPose& tp : trajectory) {
    gt.push_back(tp.pose);
  }
  const std::vector<Pose2> odom =
      gt.size() >= 2 ? corrupt_odometry(gt, odom_noise, rng) : std::vector<Pose2>(gt.size());
  std::vector<LidarScan> scans;
  scans.reserve(trajectory.size());
  for (std::size_t i = 0; i < trajectory.size(); ++i) {
    LidarScan s = raycast(plan, gt[i], spec, rng, trajectory[i].time);
    s.odom = odom[i];
    scans.push_back(std::move(s));
  }
  return scans;
}

std::vector<LidarScan> simulate_mapping_scans(const FloorPlan& plan, std::size_t count,
                                              const SensorSpec& spec, double clearance,
                                              Rng& rng) {
  const Bounds& b = plan.bounds();
  std::uniform_real_distribution<double> ux(b.min.x, b.max.x);
  std::uniform_real_distribution<double> uy(b.min.y, b.max.y);
  std::uniform_real_distribution<double> uyaw(-std::numbers::pi, std::numbers::pi);
  std::vector<LidarScan> scans;
  scans.reserve(count);
  std::size_t attempts = 0;
  while (scans.size() < count) {
    if (++attempts > 1000 * (count + 1)) {
      throw InvalidArgument("simulate_mapping_scans: no collision-free poses found");
    }
    const Vec2 p{ux(rng), uy(rng)};
    if (!plan.is_free(p) || plan.true_sdf(p) < clearance) {
      continue;
    }
    const double yaw = uyaw(rng);
    scans.push_back(raycast(plan, Pose2(p, yaw), spec, rng, static_cast<double>(scans.size())));
  }
  return scans;
}

namespace {

void add_box(std::vector<Segment>& s, Vec2 lo, Vec2 hi) {
  s.push_back({{lo.x, lo.y}, {hi.x, lo.y}});
  s.push_back({{hi.x, lo.y}, {hi.x, hi.y}});
  s.push_back({{hi.x, hi.y}, {lo.x, hi.y}});
  s.push_back({{lo.x, hi.y}, {lo.x, lo.y}});
}

World square_world() {
  std::vector<Segment> s;
  add_box(s, {0, 0}, {4, 4});
  return {"square",
          FloorPlan(std::move(s), {{0, 0}, {4, 4}}, {2, 2}),
          {{1.0, 1.0}, {3.0, 1.0}, {3.0, 3.0}, {1.0, 3.0}, {1.0, 1.4}}};
}

World tworoom_world() {
  std::vector<Segment> s;
  add_box(s, {0, 0}, {8, 6});
  s.push_back({{4, 0}, {4, 2.5}});  // divider with a 1 m doorway
  s.push_back({{4, 3.5}, {4, 6}});
  add_box(s, {5.8, 1.2}, {6.3, 1.7});  // pillar
  s.push_back({{0, 4.5}, {1.2, 4.5}});  // shelf
  return {"tworoom",
          FloorPlan(std::move(s), {{0, 0}, {8, 6}}, {2, 2}),
          {{1.5, 1.5},
           {3.0, 1.2},
           {3.0, 3.0},
           {5.0, 3.0},
           {6.8, 4.6},
           {7.2, 2.6},
           {5.2, 4.8},
           {5.0, 3.0},
           {3.0, 3.0},
           {1.8, 2.8},
           {1.0, 3.5},
           {2.5, 5.2},
           {3.2, 4.0},
           {2.0, 1.0}}};
}

World corridor_offices_world() {
  std::vector<Segment> s;
  add_box(s, {0, 0}, {20, 8});
  // Corridor wall with one centered door per office.
  s.push_back({{0, 3}, {2, 3}});
  s.push_back({{3, 3}, {7, 3}});
  s.push_back({{8, 3}, {12, 3}});
  s.push_back({{13, 3}, {17, 3}});
  s.push_back({{18, 3}, {20, 3}});
  for (double x : {5.0, 10.0, 15.0}) {
    s.push_back({{x, 3}, {x, 8}});
  }
  // Furniture that tells otherwise identical offices apart.
  add_box(s, {3.6, 6.4}, {4.4, 7.4});
  add_box(s, {5.4, 6.4}, {6.2, 7.4});
  s.push_back({{12.5, 8}, {12.5, 6.6}});
  add_box(s, {17.3, 5.3}, {17.8, 5.8});
  // Column in the corridor.
  s.push_back({{9.8, 0}, {9.8, 0.4}});
  s.push_back({{9.8, 0.4}, {10.2, 0.4}});
  s.push_back({{10.2, 0.4}, {10.2, 0}});
  return {"corridor_offices",
          FloorPlan(std::move(s), {{0, 0}, {20, 8}}, {1, 1.5}),
          {{8.2, 5.5},
           {7.5, 4.2},
           {7.5, 1.5},
           {12.5, 1.5},
           {12.5, 4.5},
           {14.0, 5.2},
           {11.2, 5.6},
           {12.5, 4.2},
           {12.5, 1.5},
           {17.5, 1.5},
           {17.5, 4.2},
           {18.6, 4.6},
           {18.9, 6.4},
           {16.2, 6.8},
           {16.3, 4.6},
           {17.5, 4.2},
           {17.5, 1.5},
           {2.5, 1.5},
           {2.5, 4.5}}};
}

}  // namespace

std::vector<std::string> world_names() { return {"square", "tworoom", "corridor_offices"}; }

World make_world(std::string_view name) {
  if (name == "square") {
    return square_world();
  }
  if (name == "tworoom") {
    return tworoom_world();
  }
  if (name == "corridor_offices") {
    return corridor_offices_world();
  }
  throw InvalidArgument("unknown world '" + std::string(name) + "'");
}

}  // namespace enmloc::sim
