#include "enmloc/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <ostream>

#include "enmloc/diff/kernels.hpp"
#include "enmloc/error.hpp"

namespace enmloc::train {

void TrainConfig::validate() const {
  if (!(trunc_band > 0.0) || !(occ_band > 0.0)) {
    throw InvalidArgument("sampling bands must be positive");
  }
  if (!(logistic_scale > 0.0)) {
    throw InvalidArgument("logistic scale must be positive");
  }
  if (!(free_min_depth >= 0.0) || !(beta >= 0.0) || !(lr > 0.0)) {
    throw InvalidArgument("free_min_depth and beta must be >= 0, lr > 0");
  }
  if (m_t + m_o == 0) {
    throw InvalidArgument("at least one near-surface sample per ray is required");
  }
  if (batch_rays == 0 || chunk == 0 || telemetry_interval == 0) {
    throw InvalidArgument("batch_rays, chunk and telemetry_interval must be positive");
  }
}

void sample_ray_into(const Pose2& pose, const Ray& ray, const TrainConfig& cfg, Rng& rng,
                     std::vector<TrainSample>& out) {
  if (!ray.valid || !(ray.range > 0.0)) {
    throw InvalidArgument("sample_ray: ray has no valid return");
  }
  const double r = ray.range;
  const Vec2 origin = pose.translation();
  const Vec2 dir = pose.rotate(ray.direction);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  const auto emit = [&](double depth, Region region) {
    out.push_back({origin + dir * depth, dir, origin, r - depth, region});
  };

  // Truncated band [lo, r); collapses to [free_min_depth, r) for short rays.
  const double trunc_lo = r > cfg.trunc_band ? r - cfg.trunc_band : cfg.free_min_depth;
  if (trunc_lo < r) {
    for (std::size_t i = 0; i < cfg.m_t; ++i) {
      const double depth = trunc_lo + (r - trunc_lo) * unit(rng);
      if (depth < r) {
        emit(depth, Region::kTruncated);
      }
    }
  }
  for (std::size_t i = 0; i < cfg.m_o; ++i) {
    emit(r + cfg.occ_band * (1.0 - unit(rng)), Region::kOccupied);
  }
  const double free_hi = r - cfg.trunc_band;
  if (free_hi > cfg.free_min_depth) {
    for (std::size_t i = 0; i < cfg.m_f; ++i) {
      const double depth = cfg.free_min_depth + (free_hi - cfg.free_min_depth) * unit(rng);
      if (depth < free_hi) {
        emit(depth, Region::kFree);
      }
    }
  }
}

std::vector<TrainSample> sample_ray(const Pose2& pose, const Ray& ray, const TrainConfig& cfg,
                                    Rng& rng) {
  std::vector<TrainSample> out;
  sample_ray_into(pose, ray, cfg, rng, out);
  return out;
}

double bce_with_logit(double z, double t) {
  return std::max(z, 0.0) - z * t + std::log1p(std::exp(-std::abs(z)));
}

double loss_psdf(std::span<const TrainSample> samples, std::span<const double> psdf_pred,
                 std::span<double> grad) {
  if (samples.empty()) {
    throw EmptyBatch("loss_psdf: empty batch");
  }
  if (psdf_pred.size() != samples.size() || (!grad.empty() && grad.size() != samples.size())) {
    throw ShapeError("loss_psdf: prediction count differs from sample count");
  }
  const double inv = 1.0 / static_cast<double>(samples.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (!samples[i].near_surface()) {
      throw InvalidArgument("loss_psdf: free-space sample in near-surface batch");
    }
    const double e = psdf_pred[i] - samples[i].psdf_gt;
    sum += std::abs(e);
    if (!grad.empty()) {
      grad[i] = (e > 0.0 ? 1.0 : (e < 0.0 ? -1.0 : 0.0)) * inv;
    }
  }
  return sum * inv;
}

double loss_sdf(std::span<const TrainSample> samples, std::span<const double> sdf_pred,
                double scale, std::span<double> grad) {
  if (samples.empty()) {
    throw EmptyBatch("loss_sdf: empty batch");
  }
  if (sdf_pred.size() != samples.size() || (!grad.empty() && grad.size() != samples.size())) {
    throw ShapeError("loss_sdf: prediction count differs from sample count");
  }
  const double inv = 1.0 / static_cast<double>(samples.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const double z = sdf_pred[i] / scale;
    const double t = diff::kernels::sigmoid(samples[i].psdf_gt / scale);
    sum += bce_with_logit(z, t);
    if (!grad.empty()) {
      grad[i] = (diff::kernels::sigmoid(z) - t) / scale * inv;
    }
  }
  return sum * inv;
}

double loss_eikonal(std::span<const Vec2> gradients, std::span<Vec2> grad) {
  if (gradients.empty()) {
    throw EmptyBatch("loss_eikonal: empty batch");
  }
  if (!grad.empty() && grad.size() != gradients.size()) {
    throw ShapeError("loss_eikonal: output length differs");
  }
  const double inv = 1.0 / static_cast<double>(gradients.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < gradients.size(); ++i) {
    const double n = gradients[i].norm();
    sum += (n - 1.0) * (n - 1.0);
    if (!grad.empty()) {
      grad[i] = n > 0.0 ? gradients[i] * (2.0 * (n - 1.0) / n * inv) : Vec2{};
    }
  }
  return sum * inv;
}

LossTerms total_loss(EnmModel& model, std::span<const TrainSample> samples,
                     const TrainConfig& cfg, bool accumulate_grads) {
  if (samples.empty()) {
    throw EmptyBatch("total_loss: empty batch");
  }
  std::vector<TrainSample> near;
  std::vector<TrainSample> far;
  for (const TrainSample& s : samples) {
    (s.near_surface() ? near : far).push_back(s);
  }
  if (near.empty()) {
    throw EmptyBatch("total_loss: batch has no near-surface samples");
  }
  const double n_all = static_cast<double>(samples.size());
  const double n_near = static_cast<double>(near.size());

  LossTerms acc;
  diff::Tape tape;
  std::vector<Vec2> points;
  std::vector<Vec2> dirs;
  std::vector<Vec2> grads;
  std::vector<double> sdf_grad;
  std::vector<double> psdf_grad;
  std::vector<Vec2> eik_grad;
  diff::Matrix seed_s;
  diff::Matrix seed_p;
  diff::Matrix seed_gx;
  diff::Matrix seed_gy;

  const auto run = [&](std::span<const TrainSample> chunk, bool near_chunk) {
    const std::size_t b = chunk.size();
    points.resize(b);
    dirs.resize(b);
    for (std::size_t i = 0; i < b; ++i) {
      points[i] = chunk[i].p;
      dirs[i] = chunk[i].d;
    }
    const EnmGraph g = model.record(tape, points, near_chunk ? std::span<const Vec2>(dirs)
                                                             : std::span<const Vec2>(),
                                    near_chunk);
    const double share_all = static_cast<double>(b) / n_all;
    sdf_grad.resize(b);
    acc.sdf += share_all * loss_sdf(chunk, tape.value(g.sdf).values(), cfg.logistic_scale,
                                    sdf_grad);
    seed_s.resize(1, b);
    for (std::size_t i = 0; i < b; ++i) {
      seed_s(0, i) = sdf_grad[i] * share_all;
    }
    std::vector<diff::Tape::Seed> seeds{{g.sdf, &seed_s}};

    if (near_chunk) {
      const double share = static_cast<double>(b) / n_near;
      psdf_grad.resize(b);
      acc.psdf += share * loss_psdf(chunk, tape.value(*g.psdf).values(), psdf_grad);
      grads.resize(b);
      for (std::size_t i = 0; i < b; ++i) {
        grads[i] = {tape.value(*g.grad_x)(0, i), tape.value(*g.grad_y)(0, i)};
      }
      eik_grad.resize(b);
      acc.eikonal += share * loss_eikonal(grads, eik_grad);

      seed_p.resize(1, b);
      seed_gx.resize(1, b);
      seed_gy.resize(1, b);
      for (std::size_t i = 0; i < b; ++i) {
        seed_p(0, i) = psdf_grad[i] * share;
        seed_gx(0, i) = cfg.beta * eik_grad[i].x * share;
        seed_gy(0, i) = cfg.beta * eik_grad[i].y * share;
      }
      seeds.push_back({*g.psdf, &seed_p});
      seeds.push_back({*g.grad_x, &seed_gx});
      seeds.push_back({*g.grad_y, &seed_gy});
    }
    if (accumulate_grads) {
      tape.backward(seeds);
    }
  };

  const std::size_t chunk = cfg.chunk;
  for (std::size_t i = 0; i < near.size(); i += chunk) {
    run(std::span<const TrainSample>(near).subspan(i, std::min(chunk, near.size() - i)), true);
  }
  for (std::size_t i = 0; i < far.size(); i += chunk) {
    run(std::span<const TrainSample>(far).subspan(i, std::min(chunk, far.size() - i)), false);
  }
  acc.total = combine_losses(acc.sdf, acc.psdf, acc.eikonal, cfg.beta);
  return acc;
}

Bounds mapping_bounds(std::span<const LidarScan> scans, std::span<const Pose2> poses) {
  constexpr double kInf = std::numeric_limits<double>::infinity();
  Bounds b{{kInf, kInf}, {-kInf, -kInf}};
  const auto grow = [&b](const Vec2& p) {
    b.min = {std::min(b.min.x, p.x), std::min(b.min.y, p.y)};
    b.max = {std::max(b.max.x, p.x), std::max(b.max.y, p.y)};
  };
  for (std::size_t i = 0; i < scans.size(); ++i) {
    grow(poses[i].translation());
    for (const Ray& r : scans[i].rays) {
      if (r.valid) {
        grow(poses[i].apply(r.direction * r.range));
      }
    }
  }
  if (!(b.min.x <= b.max.x)) {
    throw InvalidArgument("mapping_bounds: no valid rays");
  }
  return b;
}

TrainResult train_map(std::span<const LidarScan> scans, std::span<const Pose2> poses,
                      const TrainConfig& cfg,
                      const std::function<void(const Telemetry&)>& on_telemetry) {
  cfg.validate();
  if (scans.size() != poses.size()) {
    throw InvalidArgument("train_map: one mapping pose per scan is required");
  }
  struct RayRef {
    std::uint32_t scan;
    std::uint32_t ray;
  };
  std::vector<RayRef> pool;
  for (std::size_t s = 0; s < scans.size(); ++s) {
    for (std::size_t r = 0; r < scans[s].rays.size(); ++r) {
      if (scans[s].rays[r].valid) {
        pool.push_back({static_cast<std::uint32_t>(s), static_cast<std::uint32_t>(r)});
      }
    }
  }
  if (pool.empty()) {
    throw InvalidArgument("train_map: no valid rays in the training scans");
  }

  Rng rng(cfg.seed);
  TrainResult result{EnmModel::create(mapping_bounds(scans, poses), cfg.model, rng), {}};
  EnmModel& model = result.model;
  std::vector<diff::ParamTensor*> params = model.parameters();
  diff::AdamState adam(diff::AdamConfig{cfg.lr});

  std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
  std::vector<TrainSample> batch;
  LossTerms window;
  std::size_t window_count = 0;

  for (std::size_t it = 1; it <= cfg.iterations; ++it) {
    batch.clear();
    for (std::size_t k = 0; k < cfg.batch_rays; ++k) {
      const RayRef ref = pool[pick(rng)];
      sample_ray_into(poses[ref.scan], scans[ref.scan].rays[ref.ray], cfg, rng, batch);
    }
    model.zero_grad();
    const LossTerms loss = total_loss(model, batch, cfg, true);
    if (!std::isfinite(loss.total)) {
      throw Error(ErrorKind::kNumeric, "training diverged at iteration " + std::to_string(it));
    }
    diff::adam_step(params, adam);

    window.sdf += loss.sdf;
    window.psdf += loss.psdf;
    window.eikonal += loss.eikonal;
    window.total += loss.total;
    ++window_count;
    if (it % cfg.telemetry_interval == 0 || it == cfg.iterations) {
      const double inv = 1.0 / static_cast<double>(window_count);
      Telemetry t{it, {window.sdf * inv, window.psdf * inv, window.eikonal * inv,
                       window.total * inv}};
      result.log.push_back(t);
      if (on_telemetry) {
        on_telemetry(t);
      }
      window = {};
      window_count = 0;
    }
  }
  return result;
}

TrainResult train_map(std::span<const LidarScan> scans, const TrainConfig& cfg,
                      const std::function<void(const Telemetry&)>& on_telemetry) {
  std::vector<Pose2> poses;
  poses.reserve(scans.size());
  for (const LidarScan& s : scans) {
    if (!s.gt) {
      throw InvalidArgument("train_map: scan at t=" + std::to_string(s.time) +
                            " has no mapping pose");
    }
    poses.push_back(*s.gt);
  }
  return train_map(scans, poses, cfg, on_telemetry);
}

void write_loss_log(std::ostream& os, std::span<const Telemetry> log) {
  os << "iteration,loss_sdf,loss_psdf,loss_eikonal,total\n";
  char line[160];
  for (const Telemetry& t : log) {
    std::snprintf(line, sizeof(line), "%zu,%.9g,%.9g,%.9g,%.9g\n", t.iteration, t.loss.sdf,
                  t.loss.psdf, t.loss.eikonal, t.loss.total);
    os << line;
  }
}

}  // namespace enmloc::train
