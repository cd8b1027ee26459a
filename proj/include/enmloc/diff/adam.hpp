#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "enmloc/diff/tensor.hpp"

namespace enmloc::diff {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Moment accumulators for a fixed, ordered list of parameters. The
/// accumulators are sized on the first step and must keep matching the
/// parameter shapes afterwards.
struct AdamState {
  explicit AdamState(AdamConfig cfg = {}) : config(cfg) {}

  AdamConfig config;
  std::uint64_t step_count = 0;
  std::vector<std::vector<double>> first_moment;
  std::vector<std::vector<double>> second_moment;
};

/// One bias-corrected Adam update from the current gradients. Gradients are
/// left untouched; callers zero them before the next accumulation.
void adam_step(std::span<ParamTensor* const> params, AdamState& state);

}  // namespace enmloc::diff
