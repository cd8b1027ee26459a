#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "enmloc/diff/tape.hpp"
#include "enmloc/diff/tensor.hpp"
#include "enmloc/se2.hpp"

namespace enmloc {

/// Axis-aligned rectangle [min, max].
struct Bounds {
  Vec2 min;
  Vec2 max;

  double width() const { return max.x - min.x; }
  double height() const { return max.y - min.y; }
  Vec2 center() const { return (min + max) * 0.5; }
  bool contains(const Vec2& p) const {
    return p.x >= min.x && p.x <= max.x && p.y >= min.y && p.y <= max.y;
  }
};

/// Dense 2D grid of learnable D-dimensional corner features. Corner (i, j)
/// sits at origin + (i, j) * resolution; its features are row j * nx + i of
/// the feature tensor.
class FeatureGrid {
 public:
  FeatureGrid() = default;
  FeatureGrid(Vec2 origin, double resolution, std::size_t nx, std::size_t ny, std::size_t dim);

  /// Smallest grid at `resolution` covering `area` grown by `pad` on every side.
  static FeatureGrid covering(const Bounds& area, double resolution, double pad, std::size_t dim);

  Vec2 origin() const { return origin_; }
  double resolution() const { return resolution_; }
  std::size_t nx() const { return nx_; }
  std::size_t ny() const { return ny_; }
  std::size_t dim() const { return features_.cols(); }
  Bounds bounds() const;

  /// True when p lies in the closed grid rectangle.
  bool contains(const Vec2& p) const;

  diff::ParamTensor& features() { return features_; }
  const diff::ParamTensor& features() const { return features_; }
  std::span<const double> corner(std::size_t i, std::size_t j) const;

  /// Corner indices, bilinear weights and their spatial derivatives at p.
  /// Throws OutOfBounds outside the grid.
  diff::GatherRow cell_weights(const Vec2& p) const;
  /// Non-throwing variant; returns false outside the grid.
  bool try_cell_weights(const Vec2& p, diff::GatherRow& row) const;

  /// Bilinearly interpolated feature vector at p.
  std::vector<double> interpolate(const Vec2& p) const;

 private:
  Vec2 origin_;
  double resolution_ = 0.0;
  std::size_t nx_ = 0;
  std::size_t ny_ = 0;
  diff::ParamTensor features_;
};

/// gamma(v) = (v, sin(2^0 v), cos(2^0 v), ..., sin(2^(L-1) v), cos(2^(L-1) v)),
/// applied to both components and concatenated: length 2 * (2L + 1).
std::vector<double> positional_encode(const Vec2& d, std::size_t bands);

/// Writes gamma(d.x) then gamma(d.y) into out[k * stride], k = 0 .. 2(2L+1)-1.
void positional_encode_into(const Vec2& d, std::size_t bands, double* out, std::size_t stride);

inline std::size_t encoding_width(std::size_t bands) { return 2 * (2 * bands + 1); }

}  // namespace enmloc
