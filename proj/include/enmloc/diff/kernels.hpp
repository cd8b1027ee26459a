#pragma once

// Batched dense kernels over structure-of-arrays blocks: a block of width w
// and batch b stores feature c of sample n at [c * b + n]. The batch loop is
// innermost, so each sample's arithmetic is independent of the batch size.

#include <cmath>
#include <cstddef>

namespace enmloc::diff::kernels {

/// y = W x + bias; W is (out x in) row-major, bias may be null.
inline void affine_forward(const double* w, const double* bias, std::size_t out, std::size_t in,
                           const double* x, double* y, std::size_t batch) {
  for (std::size_t o = 0; o < out; ++o) {
    double* yo = y + o * batch;
    const double b0 = bias != nullptr ? bias[o] : 0.0;
    for (std::size_t n = 0; n < batch; ++n) {
      yo[n] = b0;
    }
    const double* wo = w + o * in;
    for (std::size_t k = 0; k < in; ++k) {
      const double wk = wo[k];
      const double* xk = x + k * batch;
      for (std::size_t n = 0; n < batch; ++n) {
        yo[n] += wk * xk[n];
      }
    }
  }
}

/// dx += W^T dy.
inline void affine_backward_input(const double* w, std::size_t out, std::size_t in,
                                  const double* dy, double* dx, std::size_t batch) {
  for (std::size_t o = 0; o < out; ++o) {
    const double* dyo = dy + o * batch;
    const double* wo = w + o * in;
    for (std::size_t k = 0; k < in; ++k) {
      const double wk = wo[k];
      double* dxk = dx + k * batch;
      for (std::size_t n = 0; n < batch; ++n) {
        dxk[n] += wk * dyo[n];
      }
    }
  }
}

/// dW += dy x^T, dbias += sum_n dy (dbias may be null).
inline void affine_backward_params(std::size_t out, std::size_t in, const double* x,
                                   const double* dy, double* dw, double* dbias,
                                   std::size_t batch) {
  for (std::size_t o = 0; o < out; ++o) {
    const double* dyo = dy + o * batch;
    for (std::size_t k = 0; k < in; ++k) {
      const double* xk = x + k * batch;
      double acc = 0.0;
#pragma omp simd reduction(+ : acc)
      for (std::size_t n = 0; n < batch; ++n) {
        acc += dyo[n] * xk[n];
      }
      dw[o * in + k] += acc;
    }
    if (dbias != nullptr) {
      double acc = 0.0;
#pragma omp simd reduction(+ : acc)
      for (std::size_t n = 0; n < batch; ++n) {
        acc += dyo[n];
      }
      dbias[o] += acc;
    }
  }
}

inline void relu_forward(const double* x, double* y, std::size_t count) {
  for (std::size_t i = 0; i < count; ++i) {
    y[i] = x[i] > 0.0 ? x[i] : 0.0;
  }
}

inline double sigmoid(double v) { return 1.0 / (1.0 + std::exp(-v)); }

}  // namespace enmloc::diff::kernels
