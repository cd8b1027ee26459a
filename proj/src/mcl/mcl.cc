#include "enmloc/mcl/mcl.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "enmloc/error.hpp"

namespace enmloc::mcl {

namespace {

constexpr std::size_t kParticleChunk = 256;

void require_normalized(const ParticleSet& set, const char* what) {
  if (!set.normalized) {
    throw StateError(std::string(what) + ": particle set is not normalized");
  }
  if (set.particles.empty()) {
    throw StateError(std::string(what) + ": particle set is empty");
  }
}

}  // namespace

void ParticleSet::normalize() {
  double sum = 0.0;
  for (const Particle& p : particles) {
    sum += p.weight;
  }
  if (!(sum > 0.0) || !std::isfinite(sum)) {
    normalized = false;
    throw DegenerateWeights("particle weights sum to " + std::to_string(sum));
  }
  const double inv = 1.0 / sum;
  for (Particle& p : particles) {
    p.weight *= inv;
  }
  normalized = true;
}

void MclConfig::validate() const {
  if (n_track < 1 || n_track > n_init) {
    throw InvalidArgument("mcl: need 1 <= n_track <= n_init");
  }
  if (!(lambda > 0.0) || !std::isfinite(lambda)) {
    throw InvalidArgument("mcl: lambda must be positive");
  }
  if (beams < 1) {
    throw InvalidArgument("mcl: beams must be at least 1");
  }
  if (motion_noise.a1 < 0.0 || motion_noise.a2 < 0.0 || motion_noise.a3 < 0.0 ||
      motion_noise.a4 < 0.0) {
    throw InvalidArgument("mcl: motion noise coefficients must be non-negative");
  }
  if (!(resample_threshold >= 0.0 && resample_threshold <= 1.0)) {
    throw InvalidArgument("mcl: resample_threshold must lie in [0, 1]");
  }
  if (!(oob_penalty >= 0.0)) {
    throw InvalidArgument("mcl: oob_penalty must be non-negative");
  }
  if (!(convergence.pos_std > 0.0) || !(convergence.yaw_std > 0.0) || convergence.hold < 1) {
    throw InvalidArgument("mcl: convergence thresholds must be positive");
  }
}

ParticleSet init_uniform(const Bounds& bounds, std::size_t n, Rng& rng) {
  if (n < 1) {
    throw InvalidArgument("init_uniform: n must be at least 1");
  }
  if (!(bounds.width() > 0.0) || !(bounds.height() > 0.0)) {
    throw InvalidArgument("init_uniform: degenerate bounds");
  }
  std::uniform_real_distribution<double> ux(bounds.min.x, bounds.max.x);
  std::uniform_real_distribution<double> uy(bounds.min.y, bounds.max.y);
  std::uniform_real_distribution<double> uyaw(-std::numbers::pi, std::numbers::pi);
  ParticleSet set;
  set.particles.reserve(n);
  const double w = 1.0 / static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double x = ux(rng);
    const double y = uy(rng);
    set.particles.push_back({Pose2(x, y, uyaw(rng)), w});
  }
  set.normalized = true;
  return set;
}

ParticleSet init_gaussian(const Pose2& mean, double pos_sigma, double yaw_sigma, std::size_t n,
                          Rng& rng) {
  if (n < 1) {
    throw InvalidArgument("init_gaussian: n must be at least 1");
  }
  if (!(pos_sigma >= 0.0) || !(yaw_sigma >= 0.0)) {
    throw InvalidArgument("init_gaussian: sigmas must be non-negative");
  }
  std::normal_distribution<double> unit(0.0, 1.0);
  ParticleSet set;
  set.particles.reserve(n);
  const double w = 1.0 / static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double dx = pos_sigma * unit(rng);
    const double dy = pos_sigma * unit(rng);
    const double dt = yaw_sigma * unit(rng);
    set.particles.push_back({Pose2(mean.x() + dx, mean.y() + dy, mean.theta() + dt), w});
  }
  set.normalized = true;
  return set;
}

void motion_update(ParticleSet& set, const Pose2& odom_prev, const Pose2& odom_now,
                   const MotionNoise& noise, Rng& rng) {
  if (set.particles.empty()) {
    throw StateError("motion_update: particle set is empty");
  }
  const Pose2 inc = pose_between(odom_prev, odom_now);
  const std::uint64_t key = rng();
  for (std::size_t i = 0; i < set.particles.size(); ++i) {
    SplitMix64 stream = derive_stream(key, 0, i);
    Particle& p = set.particles[i];
    p.pose = pose_compose(p.pose, sample_increment(inc, noise, stream));
  }
}

std::vector<double> alignment_scores(std::span<const Particle> particles, const LidarScan& scan,
                                     const EnmModel& model, const MclConfig& cfg) {
  const std::vector<std::size_t> beams = subsample_valid_rays(scan, cfg.beams);
  if (beams.empty()) {
    throw EmptyScan("observation update: scan has no valid ray");
  }
  const std::size_t k = beams.size();
  std::vector<Vec2> local_end(k);
  std::vector<Vec2> local_dir(k);
  for (std::size_t j = 0; j < k; ++j) {
    const Ray& ray = scan.rays[beams[j]];
    local_dir[j] = ray.direction;
    local_end[j] = ray.direction * ray.range;
  }

  const FeatureGrid& grid = model.grid();
  std::vector<double> scores(particles.size());
  std::vector<Vec2> points;
  std::vector<Vec2> dirs;
  std::vector<std::size_t> owner;
  std::vector<double> sdf;
  std::vector<double> psdf;
  points.reserve(kParticleChunk * k);
  dirs.reserve(kParticleChunk * k);
  owner.reserve(kParticleChunk * k);

  for (std::size_t begin = 0; begin < particles.size(); begin += kParticleChunk) {
    const std::size_t end = std::min(particles.size(), begin + kParticleChunk);
    points.clear();
    dirs.clear();
    owner.clear();
    for (std::size_t i = begin; i < end; ++i) {
      const Pose2& pose = particles[i].pose;
      std::size_t outside = 0;
      for (std::size_t j = 0; j < k; ++j) {
        const Vec2 p = pose.apply(local_end[j]);
        if (!grid.contains(p)) {
          ++outside;
          continue;
        }
        points.push_back(p);
        dirs.push_back(pose.rotate(local_dir[j]));
        owner.push_back(i);
      }
      scores[i] = static_cast<double>(outside) * cfg.oob_penalty;
    }
    sdf.resize(points.size());
    psdf.resize(points.size());
    model.forward_batch(points, dirs, sdf, psdf);
    for (std::size_t q = 0; q < points.size(); ++q) {
      scores[owner[q]] += 0.5 * (std::abs(sdf[q]) + std::abs(psdf[q]));
    }
    for (std::size_t i = begin; i < end; ++i) {
      scores[i] /= static_cast<double>(k);
    }
  }
  return scores;
}

std::vector<double> observation_update(ParticleSet& set, const LidarScan& scan,
                                       const EnmModel& model, const MclConfig& cfg) {
  if (set.particles.empty()) {
    throw StateError("observation_update: particle set is empty");
  }
  std::vector<double> scores = alignment_scores(set.particles, scan, model, cfg);
  // Factors are taken relative to the best particle; the common scale
  // cancels in normalization and keeps large lambda from underflowing.
  const double best = *std::min_element(scores.begin(), scores.end());
  for (std::size_t i = 0; i < set.particles.size(); ++i) {
    set.particles[i].weight *= likelihood_factor(scores[i] - best, cfg.lambda);
  }
  set.normalize();
  return scores;
}

double effective_sample_size(const ParticleSet& set) {
  require_normalized(set, "effective_sample_size");
  double sq = 0.0;
  for (const Particle& p : set.particles) {
    sq += p.weight * p.weight;
  }
  return 1.0 / sq;
}

std::vector<std::size_t> systematic_ancestors(std::span<const double> weights, std::size_t n,
                                              double u0) {
  if (weights.empty()) {
    throw InvalidArgument("systematic_ancestors: no weights");
  }
  if (!(u0 >= 0.0 && u0 < 1.0)) {
    throw InvalidArgument("systematic_ancestors: u0 must lie in [0, 1)");
  }
  std::size_t last = weights.size() - 1;
  while (last > 0 && weights[last] <= 0.0) {
    --last;
  }
  std::vector<std::size_t> out(n);
  std::size_t i = 0;
  double cumulative = weights[0];
  const double step = 1.0 / static_cast<double>(n);
  for (std::size_t k = 0; k < n; ++k) {
    const double u = (u0 + static_cast<double>(k)) * step;
    while (u >= cumulative && i < last) {
      cumulative += weights[++i];
    }
    out[k] = i;
  }
  return out;
}

ParticleSet resample(const ParticleSet& set, std::size_t target_n, Rng& rng) {
  require_normalized(set, "resample");
  if (target_n < 1) {
    throw InvalidArgument("resample: target_n must be at least 1");
  }
  std::vector<double> weights(set.particles.size());
  for (std::size_t i = 0; i < weights.size(); ++i) {
    weights[i] = set.particles[i].weight;
  }
  const double u0 = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
  const std::vector<std::size_t> anc = systematic_ancestors(weights, target_n, u0);
  ParticleSet out;
  out.particles.reserve(target_n);
  const double w = 1.0 / static_cast<double>(target_n);
  for (std::size_t a : anc) {
    out.particles.push_back({set.particles[a].pose, w});
  }
  out.normalized = true;
  return out;
}

PoseEstimate estimate_pose(const ParticleSet& set) {
  require_normalized(set, "estimate_pose");
  double mx = 0.0;
  double my = 0.0;
  double c = 0.0;
  double s = 0.0;
  for (const Particle& p : set.particles) {
    mx += p.weight * p.pose.x();
    my += p.weight * p.pose.y();
    c += p.weight * std::cos(p.pose.theta());
    s += p.weight * std::sin(p.pose.theta());
  }
  double var = 0.0;
  for (const Particle& p : set.particles) {
    const double dx = p.pose.x() - mx;
    const double dy = p.pose.y() - my;
    var += p.weight * (dx * dx + dy * dy);
  }
  // Below this the resultant is rounding noise of cancelling headings.
  constexpr double kZeroResultant = 1e-12;
  double r = std::min(1.0, std::hypot(c, s));
  if (r < kZeroResultant) {
    r = 0.0;
  }
  PoseEstimate est;
  est.pose = Pose2(mx, my, r > 0.0 ? std::atan2(s, c) : 0.0);
  est.pos_std = std::sqrt(var);
  est.yaw_std = r > 0.0 ? std::sqrt(-2.0 * std::log(r)) : std::numeric_limits<double>::infinity();
  return est;
}

bool check_convergence(std::span<const std::pair<double, double>> history,
                       const ConvergenceCriteria& criteria) {
  if (criteria.hold == 0 || history.size() < criteria.hold) {
    return false;
  }
  for (std::size_t i = history.size() - criteria.hold; i < history.size(); ++i) {
    if (!(history[i].first < criteria.pos_std && history[i].second < criteria.yaw_std)) {
      return false;
    }
  }
  return true;
}

MclState start_global(const EnmModel& model, const MclConfig& cfg) {
  cfg.validate();
  MclState state;
  state.rng.seed(cfg.seed);
  state.set = init_uniform(model.grid().bounds(), cfg.n_init, state.rng);
  return state;
}

MclState start_tracking(const Pose2& pose, double pos_sigma, double yaw_sigma,
                        const MclConfig& cfg) {
  cfg.validate();
  MclState state;
  state.rng.seed(cfg.seed);
  state.set = init_gaussian(pose, pos_sigma, yaw_sigma, cfg.n_track, state.rng);
  // A known start needs no shrink.
  state.reduced = true;
  return state;
}

void mcl_step(MclState& state, const LidarScan& scan, const Pose2& odom_prev,
              const Pose2& odom_now, const EnmModel& model, const MclConfig& cfg) {
  motion_update(state.set, odom_prev, odom_now, cfg.motion_noise, state.rng);
  observation_update(state.set, scan, model, cfg);
  const double n = static_cast<double>(state.set.size());
  if (effective_sample_size(state.set) < cfg.resample_threshold * n) {
    state.set = resample(state.set, state.set.size(), state.rng);
  }
  const PoseEstimate est = estimate_pose(state.set);
  const bool below = est.pos_std < cfg.convergence.pos_std && est.yaw_std < cfg.convergence.yaw_std;
  state.streak = below ? state.streak + 1 : 0;
  state.converged = state.streak >= cfg.convergence.hold;
  state.log.push_back({scan.time, est.pose, est.pos_std, est.yaw_std, state.converged,
                       state.set.size()});
  if (state.converged && !state.reduced) {
    state.set = resample(state.set, std::min(cfg.n_track, state.set.size()), state.rng);
    state.reduced = true;
  }
}

void run_sequence(MclState& state, std::span<const LidarScan> scans, const EnmModel& model,
                  const MclConfig& cfg) {
  for (std::size_t i = 0; i < scans.size(); ++i) {
    const Pose2& prev = i == 0 ? scans[0].odom : scans[i - 1].odom;
    mcl_step(state, scans[i], prev, scans[i].odom, model, cfg);
  }
}

}  // namespace enmloc::mcl
