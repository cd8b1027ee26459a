#pragma once

// Small models and sample batches for gradient checks.

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <vector>

#include "enmloc/enm_model.hpp"
#include "enmloc/trainer.hpp"

namespace enmloc::testing {

/// 3 x 3 corners over [0, 1]^2 with D = 4, L = 4 and random parameters.
inline EnmModel toy_model(std::uint64_t seed) {
  Rng rng(seed);
  FeatureGrid grid({0.0, 0.0}, 0.5, 3, 3, 4);
  std::uniform_real_distribution<double> u(-0.5, 0.5);
  for (double& v : grid.features().value.values()) {
    v = u(rng);
  }
  const std::size_t d = 4;
  const std::size_t w = d + encoding_width(4);
  std::array<Linear, EnmModel::kLayerCount> layers;
  const auto make = [&rng](std::size_t in, std::size_t out) {
    Linear l;
    l.weight = diff::param_init(out, in, rng, diff::InitScheme::uniform_fan_in(in));
    l.bias = diff::param_init(out, 1, rng, diff::InitScheme::uniform_fan_in(in));
    return l;
  };
  for (std::size_t i = 0; i < 3; ++i) {
    layers[EnmModel::kPositionLayers + i] = make(d, d);
    layers[EnmModel::kDirectionLayers + i] = make(w, w);
  }
  layers[EnmModel::kSdfHead] = make(d, 1);
  layers[EnmModel::kPsdfHead] = make(w, 1);
  return EnmModel(std::move(grid), std::move(layers), 4);
}

/// Mixed truncated, occupied and free samples inside the toy grid.
inline std::vector<train::TrainSample> toy_samples(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> pos(0.05, 0.95);
  std::uniform_real_distribution<double> ang(-std::numbers::pi, std::numbers::pi);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<train::TrainSample> out;
  const auto add = [&](train::Region region, double gt) {
    const double a = ang(rng);
    const Vec2 d{std::cos(a), std::sin(a)};
    const Vec2 p{pos(rng), pos(rng)};
    out.push_back({p, d, p - d * 0.5, gt, region});
  };
  for (int i = 0; i < 6; ++i) {
    add(train::Region::kTruncated, 0.3 * (1.0 - unit(rng)));
  }
  for (int i = 0; i < 4; ++i) {
    add(train::Region::kOccupied, -0.15 * (1.0 - unit(rng)));
  }
  for (int i = 0; i < 6; ++i) {
    add(train::Region::kFree, 0.3 + 2.0 * unit(rng));
  }
  return out;
}

struct GradCheck {
  double max_rel_err = 0.0;
  std::size_t checked = 0;
  std::size_t parameter_count = 0;
};

/// Compares the accumulated gradient of the full objective against central
/// differences for every grid feature and layer parameter. Relative error
/// is |a - n| / max(|a|, |n|, 1e-6).
inline GradCheck check_total_loss_gradient(EnmModel& model,
                                           const std::vector<train::TrainSample>& samples,
                                           const train::TrainConfig& cfg, double h) {
  model.zero_grad();
  train::total_loss(model, samples, cfg, true);
  GradCheck out;
  for (diff::ParamTensor* p : model.parameters()) {
    out.parameter_count += p->size();
    for (std::size_t i = 0; i < p->size(); ++i) {
      double& v = p->value.data()[i];
      const double saved = v;
      v = saved + h;
      const double fp = train::total_loss(model, samples, cfg, false).total;
      v = saved - h;
      const double fm = train::total_loss(model, samples, cfg, false).total;
      v = saved;
      const double numeric = (fp - fm) / (2.0 * h);
      const double analytic = p->grad.data()[i];
      const double err = std::abs(analytic - numeric) /
                         std::max({std::abs(analytic), std::abs(numeric), 1e-6});
      out.max_rel_err = std::max(out.max_rel_err, err);
      ++out.checked;
    }
  }
  return out;
}

/// Model over `area` whose outputs are the constants (sdf, psdf) everywhere:
/// zero features and weights, only the two head biases set.
inline EnmModel constant_model(const Bounds& area, double sdf, double psdf) {
  Rng rng(0);
  EnmConfig cfg;
  cfg.pad = 0.0;
  EnmModel m = EnmModel::create(area, cfg, rng);
  for (diff::ParamTensor* p : m.parameters()) {
    p->value.fill(0.0);
  }
  m.layer(EnmModel::kSdfHead).bias.value(0, 0) = sdf;
  m.layer(EnmModel::kPsdfHead).bias.value(0, 0) = psdf;
  return m;
}

}  // namespace enmloc::testing
