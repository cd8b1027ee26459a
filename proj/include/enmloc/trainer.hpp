#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <span>
#include <vector>

#include "enmloc/diff/adam.hpp"
#include "enmloc/enm_model.hpp"
#include "enmloc/random.hpp"
#include "enmloc/scan.hpp"

namespace enmloc::train {

enum class Region { kTruncated, kOccupied, kFree };

/// A point on a training ray with its projective distance target
/// psdf_gt = r - |p - origin|.
struct TrainSample {
  Vec2 p;
  Vec2 d;       // world-frame ray direction
  Vec2 origin;  // sensor position
  double psdf_gt = 0.0;
  Region region = Region::kFree;

  bool near_surface() const { return region != Region::kFree; }
};

struct TrainConfig {
  std::size_t m_t = 6;  // samples per ray in [r - trunc_band, r)
  std::size_t m_o = 4;  // samples per ray in (r, r + occ_band]
  std::size_t m_f = 5;  // samples per ray in [free_min_depth, r - trunc_band)
  double trunc_band = 0.30;
  double occ_band = 0.15;
  double free_min_depth = 0.05;
  double logistic_scale = 0.05;
  double beta = 0.1;  // Eikonal weight
  double lr = 1e-3;
  std::size_t iterations = 5000;
  std::size_t batch_rays = 2048;
  std::uint64_t seed = 0;
  std::size_t telemetry_interval = 100;
  std::size_t chunk = 512;  // samples per tape pass
  EnmConfig model;

  /// Throws InvalidArgument on a violated invariant.
  void validate() const;
};

/// Draws the truncated, occupied and free-space samples of one ray.
/// Rays with r <= trunc_band keep only the occupied samples and truncated
/// samples inside [free_min_depth, r). Throws InvalidArgument for invalid rays.
std::vector<TrainSample> sample_ray(const Pose2& pose, const Ray& ray, const TrainConfig& cfg,
                                    Rng& rng);
void sample_ray_into(const Pose2& pose, const Ray& ray, const TrainConfig& cfg, Rng& rng,
                     std::vector<TrainSample>& out);

// Loss terms. Each returns the mean over its batch and, when `grad` is
// non-empty, writes d(loss)/d(prediction) per sample. Empty batches throw
// EmptyBatch.

/// mean |s_bar - psdf_gt| over near-surface samples.
double loss_psdf(std::span<const TrainSample> samples, std::span<const double> psdf_pred,
                 std::span<double> grad = {});
/// mean BCE(sigmoid(s / scale), sigmoid(psdf_gt / scale)) over all samples.
double loss_sdf(std::span<const TrainSample> samples, std::span<const double> sdf_pred,
                double scale, std::span<double> grad = {});
/// Binary cross-entropy of prediction logit z against target probability t,
/// i.e. -(t log sigmoid(z) + (1 - t) log(1 - sigmoid(z))), evaluated stably.
double bce_with_logit(double z, double t);
/// mean (|g| - 1)^2.
double loss_eikonal(std::span<const Vec2> gradients, std::span<Vec2> grad = {});

struct LossTerms {
  double sdf = 0.0;
  double psdf = 0.0;
  double eikonal = 0.0;
  double total = 0.0;
};

inline double combine_losses(double sdf, double psdf, double eikonal, double beta) {
  return sdf + psdf + beta * eikonal;
}

/// Evaluates the weighted objective over `samples`. With accumulate_grads,
/// one backward pass per chunk adds the gradients to model parameters.
/// Requires at least one near-surface sample.
LossTerms total_loss(EnmModel& model, std::span<const TrainSample> samples,
                     const TrainConfig& cfg, bool accumulate_grads);

struct Telemetry {
  std::size_t iteration = 0;  // last iteration of the interval
  LossTerms loss;             // averaged over the interval
};

struct TrainResult {
  EnmModel model;
  std::vector<Telemetry> log;
};

/// Area covered by the scan endpoints and sensor origins under `poses`.
Bounds mapping_bounds(std::span<const LidarScan> scans, std::span<const Pose2> poses);

/// Fits a map to posed scans. poses[i] is the mapping pose of scans[i].
TrainResult train_map(std::span<const LidarScan> scans, std::span<const Pose2> poses,
                      const TrainConfig& cfg,
                      const std::function<void(const Telemetry&)>& on_telemetry = {});
/// Same, using each scan's ground-truth pose. Throws InvalidArgument if a
/// scan has none.
TrainResult train_map(std::span<const LidarScan> scans, const TrainConfig& cfg,
                      const std::function<void(const Telemetry&)>& on_telemetry = {});

/// Header plus one `iteration,loss_sdf,loss_psdf,loss_eikonal,total` row per entry.
void write_loss_log(std::ostream& os, std::span<const Telemetry> log);

}  // namespace enmloc::train
