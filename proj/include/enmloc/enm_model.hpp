#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "enmloc/diff/tape.hpp"
#include "enmloc/diff/tensor.hpp"
#include "enmloc/feature_grid.hpp"
#include "enmloc/random.hpp"

namespace enmloc {

struct Linear {
  diff::ParamTensor weight;  // out x in
  diff::ParamTensor bias;    // out x 1

  std::size_t in() const { return weight.cols(); }
  std::size_t out() const { return weight.rows(); }
};

struct EnmConfig {
  std::size_t feature_dim = 4;
  std::size_t frequency_bands = 4;
  double resolution = 0.10;   // meters per cell
  double pad = 1.0;           // meters added around the mapped area
  double feature_init = 0.1;  // features start in U(-feature_init, feature_init)
};

struct EnmPrediction {
  double sdf = 0.0;
  double psdf = 0.0;
};

/// Node ids of one batched forward pass recorded on a tape.
struct EnmGraph {
  diff::NodeId features = 0;
  diff::NodeId sdf = 0;
  std::optional<diff::NodeId> psdf;
  std::optional<diff::NodeId> grad_x;  // ds/dx via forward tangents
  std::optional<diff::NodeId> grad_y;
  std::array<diff::NodeId, 6> pre_activations{};  // F_p then F_d (F_d only with psdf)
};

/// Feature grid plus the two MLP branches.
///
///   f     = bilinear(G, p)
///   e_p   = F_p(f)                      3 x (affine D->D, ReLU)
///   s     = H_sdf(e_p)                  affine D->1
///   e_d   = F_d(e_p ++ gamma(d))        3 x (affine W->W, ReLU), W = D + 2(2L+1)
///   s_bar = H_psdf(e_d)                 affine W->1
///
/// Evaluation through forward()/forward_batch() is const and allocation
/// happens per call, so a trained model may be shared across threads.
class EnmModel {
 public:
  static constexpr std::size_t kPositionLayers = 0;  // layers 0..2
  static constexpr std::size_t kSdfHead = 3;
  static constexpr std::size_t kDirectionLayers = 4;  // layers 4..6
  static constexpr std::size_t kPsdfHead = 7;
  static constexpr std::size_t kLayerCount = 8;

  EnmModel() = default;
  /// Validates that the layer shapes match (D, L).
  EnmModel(FeatureGrid grid, std::array<Linear, kLayerCount> layers, std::size_t bands);

  /// Fresh model covering `area`: uniform-fan-in layers, small random features.
  static EnmModel create(const Bounds& area, const EnmConfig& cfg, Rng& rng);

  FeatureGrid& grid() { return grid_; }
  const FeatureGrid& grid() const { return grid_; }
  Linear& layer(std::size_t i) { return layers_.at(i); }
  const Linear& layer(std::size_t i) const { return layers_.at(i); }
  std::size_t feature_dim() const { return grid_.dim(); }
  std::size_t frequency_bands() const { return bands_; }
  std::size_t direction_width() const { return feature_dim() + encoding_width(bands_); }

  /// Grid features first, then weight and bias of each layer in order.
  std::vector<diff::ParamTensor*> parameters();
  void zero_grad();

  /// (s, s_bar) at p looking along unit direction d. Throws OutOfBounds.
  EnmPrediction forward(const Vec2& p, const Vec2& d) const;
  /// Batched forward; every entry equals the single-sample result bit for bit.
  /// `psdf` may be empty to skip the direction branch.
  void forward_batch(std::span<const Vec2> points, std::span<const Vec2> dirs,
                     std::span<double> sdf, std::span<double> psdf) const;

  /// Analytic ds/dp by reverse-mode through the MLP and the bilinear weights.
  /// Points on a cell edge are nudged 1e-9 m into the cell that owns them.
  Vec2 sdf_gradient(const Vec2& p) const;

  /// Records a batched forward pass on `tape` (reset to the batch size).
  /// `dirs` empty skips the PSDF branch; `with_sdf_gradient` adds forward
  /// tangents dx, dy of s so that losses on |grad s| can be back-propagated.
  EnmGraph record(diff::Tape& tape, std::span<const Vec2> points, std::span<const Vec2> dirs,
                  bool with_sdf_gradient, bool track_point_grad = false);

 private:
  FeatureGrid grid_;
  std::array<Linear, kLayerCount> layers_;
  std::size_t bands_ = 0;
};

/// Free-function spellings of the model operations.
inline std::vector<double> grid_interpolate(const FeatureGrid& g, const Vec2& p) {
  return g.interpolate(p);
}
inline EnmPrediction enm_forward(const EnmModel& m, const Vec2& p, const Vec2& d) {
  return m.forward(p, d);
}
inline Vec2 sdf_spatial_gradient(const EnmModel& m, const Vec2& p) { return m.sdf_gradient(p); }

}  // namespace enmloc
