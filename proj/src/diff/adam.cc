#include "enmloc/diff/adam.hpp"

#include <cmath>

#include "enmloc/error.hpp"

namespace enmloc::diff {

void adam_step(std::span<ParamTensor* const> params, AdamState& state) {
  if (state.step_count == 0 && state.first_moment.empty()) {
    for (const ParamTensor* p : params) {
      state.first_moment.emplace_back(p->size(), 0.0);
      state.second_moment.emplace_back(p->size(), 0.0);
    }
  }
  if (state.first_moment.size() != params.size()) {
    throw ShapeError("adam_step: parameter list changed between steps");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (state.first_moment[i].size() != params[i]->size()) {
      throw ShapeError("adam_step: accumulator shape does not match its parameter");
    }
  }

  const AdamConfig& c = state.config;
  ++state.step_count;
  const double t = static_cast<double>(state.step_count);
  const double correction1 = 1.0 - std::pow(c.beta1, t);
  const double correction2 = 1.0 - std::pow(c.beta2, t);

  for (std::size_t i = 0; i < params.size(); ++i) {
    double* value = params[i]->value.data();
    const double* grad = params[i]->grad.data();
    double* m = state.first_moment[i].data();
    double* v = state.second_moment[i].data();
    const std::size_t n = params[i]->size();
    for (std::size_t j = 0; j < n; ++j) {
      const double g = grad[j];
      m[j] = c.beta1 * m[j] + (1.0 - c.beta1) * g;
      v[j] = c.beta2 * v[j] + (1.0 - c.beta2) * g * g;
      const double m_hat = m[j] / correction1;
      const double v_hat = v[j] / correction2;
      value[j] -= c.lr * m_hat / (std::sqrt(v_hat) + c.eps);
    }
  }
}

}  // namespace enmloc::diff
