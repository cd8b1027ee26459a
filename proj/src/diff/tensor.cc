#include "enmloc/diff/tensor.hpp"

#include <cmath>

#include "enmloc/error.hpp"

namespace enmloc::diff {

ParamTensor param_init(std::size_t rows, std::size_t cols, Rng& rng, InitScheme scheme) {
  ParamTensor t(rows, cols);
  switch (scheme.kind) {
    case InitScheme::Kind::kConstant:
      t.value.fill(scheme.arg);
      break;
    case InitScheme::Kind::kUniformFanIn: {
      if (!(scheme.arg > 0.0)) {
        throw InvalidArgument("param_init: fan_in must be positive");
      }
      const double bound = 1.0 / std::sqrt(scheme.arg);
      std::uniform_real_distribution<double> dist(-bound, bound);
      for (double& v : t.value.values()) {
        v = dist(rng);
      }
      break;
    }
  }
  return t;
}

}  // namespace enmloc::diff
