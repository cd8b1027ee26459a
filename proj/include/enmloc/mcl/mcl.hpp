#pragma once

#include <cstdint>
#include <numbers>
#include <span>
#include <utility>
#include <vector>

#include "enmloc/enm_model.hpp"
#include "enmloc/odometry_model.hpp"
#include "enmloc/random.hpp"
#include "enmloc/scan.hpp"

namespace enmloc::mcl {

struct Particle {
  Pose2 pose;
  double weight = 0.0;
};

struct ParticleSet {
  std::vector<Particle> particles;
  bool normalized = false;

  std::size_t size() const { return particles.size(); }
  /// Scales weights to sum to one. Throws DegenerateWeights when the sum is
  /// zero or not finite.
  void normalize();
};

struct ConvergenceCriteria {
  double pos_std = 0.5;                              // meters
  double yaw_std = 10.0 * std::numbers::pi / 180.0;  // radians
  std::size_t hold = 3;                              // consecutive updates
};

struct MclConfig {
  std::size_t n_init = 80000;
  std::size_t n_track = 1000;
  double lambda = 10.0;  // 1/m
  std::size_t beams = 60;
  MotionNoise motion_noise{0.1, 0.1, 0.05, 0.05};
  double resample_threshold = 0.5;  // resample when ESS < threshold * N
  double oob_penalty = 0.5;         // meters, stands in for endpoints off the map
  ConvergenceCriteria convergence;
  std::uint64_t seed = 0;

  /// Throws InvalidArgument on a violated invariant.
  void validate() const;
};

ParticleSet init_uniform(const Bounds& bounds, std::size_t n, Rng& rng);
/// Particles drawn around `mean` with isotropic position and yaw noise.
ParticleSet init_gaussian(const Pose2& mean, double pos_sigma, double yaw_sigma, std::size_t n,
                          Rng& rng);

/// Moves every particle by the noisy odometry increment from odom_prev to
/// odom_now. Each particle draws from its own stream keyed by one value
/// taken from `rng`, so results do not depend on evaluation order.
void motion_update(ParticleSet& set, const Pose2& odom_prev, const Pose2& odom_now,
                   const MotionNoise& noise, Rng& rng);

/// Per-particle alignment: mean over the subsampled beams of (|s| + |s_bar|) / 2
/// at the endpoints, or oob_penalty for endpoints outside the map.
std::vector<double> alignment_scores(std::span<const Particle> particles, const LidarScan& scan,
                                     const EnmModel& model, const MclConfig& cfg);

inline double likelihood_factor(double score, double lambda) { return std::exp(-lambda * score); }

/// Multiplies each weight by exp(-lambda * score) and renormalizes. Returns
/// the scores. Throws EmptyScan without valid rays and DegenerateWeights
/// when no weight survives.
std::vector<double> observation_update(ParticleSet& set, const LidarScan& scan,
                                       const EnmModel& model, const MclConfig& cfg);

/// 1 / sum(w^2). Throws StateError on an unnormalized set.
double effective_sample_size(const ParticleSet& set);

/// Ancestor index for each of n systematic draws at offsets (u0 + k) / n,
/// u0 in [0, 1). Weights must sum to one.
std::vector<std::size_t> systematic_ancestors(std::span<const double> weights, std::size_t n,
                                              double u0);
/// Systematic resampling to target_n particles with uniform weights.
ParticleSet resample(const ParticleSet& set, std::size_t target_n, Rng& rng);

struct PoseEstimate {
  Pose2 pose;
  double pos_std = 0.0;  // sqrt(var_x + var_y)
  double yaw_std = 0.0;  // circular std, +inf for a zero resultant
};

/// Weighted mean position and circular mean yaw. Throws StateError on an
/// unnormalized set.
PoseEstimate estimate_pose(const ParticleSet& set);

/// True iff the last `hold` entries are all below both thresholds.
bool check_convergence(std::span<const std::pair<double, double>> history,
                       const ConvergenceCriteria& criteria);

struct TrajectoryRow {
  double time = 0.0;
  Pose2 pose;
  double pos_std = 0.0;
  double yaw_std = 0.0;
  bool converged = false;
  std::size_t n_particles = 0;
};

struct MclState {
  ParticleSet set;
  Rng rng;
  std::size_t streak = 0;  // consecutive updates under the thresholds
  bool converged = false;
  bool reduced = false;  // the one-time n_init -> n_track shrink happened
  std::vector<TrajectoryRow> log;
};

/// Uniform initialization over the model's grid with cfg.n_init particles.
MclState start_global(const EnmModel& model, const MclConfig& cfg);
/// Gaussian initialization around a known pose with cfg.n_track particles.
MclState start_tracking(const Pose2& pose, double pos_sigma, double yaw_sigma,
                        const MclConfig& cfg);

/// One filter update: motion, observation, optional resampling, estimate,
/// convergence check with the one-time particle reduction. Appends a log row.
void mcl_step(MclState& state, const LidarScan& scan, const Pose2& odom_prev,
              const Pose2& odom_now, const EnmModel& model, const MclConfig& cfg);

/// Runs mcl_step over a sequence. The first scan gets no motion update.
void run_sequence(MclState& state, std::span<const LidarScan> scans, const EnmModel& model,
                  const MclConfig& cfg);

}  // namespace enmloc::mcl
