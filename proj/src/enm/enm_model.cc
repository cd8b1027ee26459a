#include "enmloc/enm_model.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "enmloc/diff/kernels.hpp"
#include "enmloc/error.hpp"

namespace enmloc {

namespace {

constexpr std::size_t kBlock = 64;

void check_layer(const Linear& l, std::size_t in, std::size_t out, std::size_t index) {
  if (l.in() != in || l.out() != out || l.bias.rows() != out || l.bias.cols() != 1) {
    throw ShapeError("layer " + std::to_string(index) + " must be " + std::to_string(out) + "x" +
                     std::to_string(in) + ", got " + std::to_string(l.out()) + "x" +
                     std::to_string(l.in()));
  }
}

void dense(const Linear& l, const double* x, double* y, std::size_t batch) {
  diff::kernels::affine_forward(l.weight.value.data(), l.bias.value.data(), l.out(), l.in(), x, y,
                                batch);
}

void dense_relu(const Linear& l, const double* x, double* y, std::size_t batch) {
  dense(l, x, y, batch);
  diff::kernels::relu_forward(y, y, l.out() * batch);
}

}  // namespace

EnmModel::EnmModel(FeatureGrid grid, std::array<Linear, kLayerCount> layers, std::size_t bands)
    : grid_(std::move(grid)), layers_(std::move(layers)), bands_(bands) {
  const std::size_t d = grid_.dim();
  const std::size_t w = direction_width();
  for (std::size_t i = 0; i < 3; ++i) {
    check_layer(layers_[kPositionLayers + i], d, d, kPositionLayers + i);
    check_layer(layers_[kDirectionLayers + i], w, w, kDirectionLayers + i);
  }
  check_layer(layers_[kSdfHead], d, 1, kSdfHead);
  check_layer(layers_[kPsdfHead], w, 1, kPsdfHead);
}

EnmModel EnmModel::create(const Bounds& area, const EnmConfig& cfg, Rng& rng) {
  FeatureGrid grid = FeatureGrid::covering(area, cfg.resolution, cfg.pad, cfg.feature_dim);
  const std::size_t d = cfg.feature_dim;
  const std::size_t w = d + encoding_width(cfg.frequency_bands);
  std::array<Linear, kLayerCount> layers;
  const auto make = [&rng](std::size_t in, std::size_t out) {
    Linear l;
    l.weight = diff::param_init(out, in, rng, diff::InitScheme::uniform_fan_in(in));
    l.bias = diff::param_init(out, 1, rng, diff::InitScheme::uniform_fan_in(in));
    return l;
  };
  for (std::size_t i = 0; i < 3; ++i) {
    layers[kPositionLayers + i] = make(d, d);
  }
  layers[kSdfHead] = make(d, 1);
  for (std::size_t i = 0; i < 3; ++i) {
    layers[kDirectionLayers + i] = make(w, w);
  }
  layers[kPsdfHead] = make(w, 1);
  if (cfg.feature_init > 0.0) {
    std::uniform_real_distribution<double> dist(-cfg.feature_init, cfg.feature_init);
    for (double& v : grid.features().value.values()) {
      v = dist(rng);
    }
  }
  return EnmModel(std::move(grid), std::move(layers), cfg.frequency_bands);
}

std::vector<diff::ParamTensor*> EnmModel::parameters() {
  std::vector<diff::ParamTensor*> out{&grid_.features()};
  for (Linear& l : layers_) {
    out.push_back(&l.weight);
    out.push_back(&l.bias);
  }
  return out;
}

void EnmModel::zero_grad() {
  for (diff::ParamTensor* p : parameters()) {
    p->zero_grad();
  }
}

EnmPrediction EnmModel::forward(const Vec2& p, const Vec2& d) const {
  double s = 0.0;
  double sb = 0.0;
  forward_batch({&p, 1}, {&d, 1}, {&s, 1}, {&sb, 1});
  return {s, sb};
}

void EnmModel::forward_batch(std::span<const Vec2> points, std::span<const Vec2> dirs,
                             std::span<double> sdf, std::span<double> psdf) const {
  const bool with_psdf = !psdf.empty();
  if (sdf.size() != points.size() || (with_psdf && (psdf.size() != points.size() ||
                                                    dirs.size() != points.size()))) {
    throw ShapeError("forward_batch: input and output lengths differ");
  }
  const std::size_t d = feature_dim();
  const std::size_t w = direction_width();
  const diff::Matrix& table = grid_.features().value;

  // Two ping-pong buffers of width w per block, plus the head output.
  std::vector<double> buf_a(w * kBlock);
  std::vector<double> buf_b(w * kBlock);
  std::vector<double> out(kBlock);

  for (std::size_t start = 0; start < points.size(); start += kBlock) {
    const std::size_t b = std::min(kBlock, points.size() - start);
    double* x = buf_a.data();
    double* y = buf_b.data();
    for (std::size_t n = 0; n < b; ++n) {
      diff::GatherRow row;
      if (!grid_.try_cell_weights(points[start + n], row)) {
        throw OutOfBounds("query point outside feature grid");
      }
      for (std::size_t c = 0; c < d; ++c) {
        double acc = 0.0;
        for (std::size_t k = 0; k < 4; ++k) {
          acc += row.weight[k] * table(row.index[k], c);
        }
        x[c * b + n] = acc;
      }
    }
    for (std::size_t i = 0; i < 3; ++i) {
      dense_relu(layers_[kPositionLayers + i], x, y, b);
      std::swap(x, y);
    }
    dense(layers_[kSdfHead], x, out.data(), b);
    std::copy(out.begin(), out.begin() + static_cast<std::ptrdiff_t>(b),
              sdf.begin() + static_cast<std::ptrdiff_t>(start));
    if (!with_psdf) {
      continue;
    }
    // x holds e_p (d rows); append the direction encoding below it.
    for (std::size_t n = 0; n < b; ++n) {
      positional_encode_into(dirs[start + n], bands_, x + d * b + n, b);
    }
    for (std::size_t i = 0; i < 3; ++i) {
      dense_relu(layers_[kDirectionLayers + i], x, y, b);
      std::swap(x, y);
    }
    dense(layers_[kPsdfHead], x, out.data(), b);
    std::copy(out.begin(), out.begin() + static_cast<std::ptrdiff_t>(b),
              psdf.begin() + static_cast<std::ptrdiff_t>(start));
  }
}

Vec2 EnmModel::sdf_gradient(const Vec2& p) const {
  const Bounds gb = grid_.bounds();
  if (!grid_.contains(p)) {
    throw OutOfBounds("sdf_gradient: point outside feature grid");
  }
  // Nudge points sitting exactly on a cell edge into the owning cell.
  Vec2 q = p;
  const double res = grid_.resolution();
  const auto nudge = [res](double coord, double origin, double upper) {
    constexpr double kEps = 1e-9;
    const double u = (coord - origin) / res;
    if (coord >= upper) {
      return coord - kEps;
    }
    if (u == std::floor(u)) {
      return coord + kEps;
    }
    return coord;
  };
  q.x = nudge(p.x, gb.min.x, gb.max.x);
  q.y = nudge(p.y, gb.min.y, gb.max.y);

  const diff::GatherRow row = grid_.cell_weights(q);
  const std::size_t d = feature_dim();
  const diff::Matrix& table = grid_.features().value;

  // Forward through F_p keeping pre-activations.
  std::array<std::vector<double>, 4> act;
  std::array<std::vector<double>, 3> pre;
  act[0].assign(d, 0.0);
  for (std::size_t c = 0; c < d; ++c) {
    for (std::size_t k = 0; k < 4; ++k) {
      act[0][c] += row.weight[k] * table(row.index[k], c);
    }
  }
  for (std::size_t i = 0; i < 3; ++i) {
    const Linear& l = layers_[kPositionLayers + i];
    pre[i].assign(d, 0.0);
    act[i + 1].assign(d, 0.0);
    dense(l, act[i].data(), pre[i].data(), 1);
    diff::kernels::relu_forward(pre[i].data(), act[i + 1].data(), d);
  }

  // Reverse: ds/de_p = H_sdf row, then back through the ReLU layers.
  std::vector<double> g(layers_[kSdfHead].weight.value.row(0),
                        layers_[kSdfHead].weight.value.row(0) + d);
  for (std::size_t i = 3; i-- > 0;) {
    const Linear& l = layers_[kPositionLayers + i];
    std::vector<double> gin(d, 0.0);
    for (std::size_t o = 0; o < d; ++o) {
      const double go = pre[i][o] > 0.0 ? g[o] : 0.0;
      for (std::size_t k = 0; k < d; ++k) {
        gin[k] += l.weight.value(o, k) * go;
      }
    }
    g = std::move(gin);
  }
  Vec2 grad;
  for (std::size_t k = 0; k < 4; ++k) {
    double proj = 0.0;
    for (std::size_t c = 0; c < d; ++c) {
      proj += table(row.index[k], c) * g[c];
    }
    grad.x += row.dweight_dx[k] * proj;
    grad.y += row.dweight_dy[k] * proj;
  }
  return grad;
}

EnmGraph EnmModel::record(diff::Tape& tape, std::span<const Vec2> points,
                          std::span<const Vec2> dirs, bool with_sdf_gradient,
                          bool track_point_grad) {
  const std::size_t batch = points.size();
  if (batch == 0) {
    throw EmptyBatch("record: no points");
  }
  const bool with_psdf = !dirs.empty();
  if (with_psdf && dirs.size() != batch) {
    throw ShapeError("record: points and directions differ in length");
  }
  tape.reset(batch);

  std::vector<diff::GatherRow> rows(batch);
  for (std::size_t n = 0; n < batch; ++n) {
    rows[n] = grid_.cell_weights(points[n]);
  }

  EnmGraph g;
  g.features = tape.gather(grid_.features(), rows, track_point_grad);
  diff::NodeId h = g.features;
  for (std::size_t i = 0; i < 3; ++i) {
    const diff::NodeId a =
        tape.affine(layers_[kPositionLayers + i].weight, &layers_[kPositionLayers + i].bias, h);
    g.pre_activations[i] = a;
    h = tape.relu(a);
  }
  const diff::NodeId embed = h;
  g.sdf = tape.affine(layers_[kSdfHead].weight, &layers_[kSdfHead].bias, embed);

  if (with_psdf) {
    const diff::NodeId enc = tape.input(encoding_width(bands_), false);
    diff::Matrix& ev = tape.mutable_value(enc);
    for (std::size_t n = 0; n < batch; ++n) {
      positional_encode_into(dirs[n], bands_, ev.data() + n, batch);
    }
    h = tape.concat(embed, enc);
    for (std::size_t i = 0; i < 3; ++i) {
      const diff::NodeId a = tape.affine(layers_[kDirectionLayers + i].weight,
                                         &layers_[kDirectionLayers + i].bias, h);
      g.pre_activations[3 + i] = a;
      h = tape.relu(a);
    }
    g.psdf = tape.affine(layers_[kPsdfHead].weight, &layers_[kPsdfHead].bias, h);
  }

  if (with_sdf_gradient) {
    // Tangent of s along each axis: the same layers without biases, gated by
    // the primal ReLU masks.
    std::vector<diff::GatherRow> tangent_rows(batch);
    const auto tangent = [&](bool along_x) {
      for (std::size_t n = 0; n < batch; ++n) {
        tangent_rows[n] = rows[n];
        tangent_rows[n].weight = along_x ? rows[n].dweight_dx : rows[n].dweight_dy;
      }
      diff::NodeId t = tape.gather(grid_.features(), tangent_rows);
      for (std::size_t i = 0; i < 3; ++i) {
        t = tape.affine(layers_[kPositionLayers + i].weight, nullptr, t);
        t = tape.relu_mask(t, g.pre_activations[i]);
      }
      return tape.affine(layers_[kSdfHead].weight, nullptr, t);
    };
    g.grad_x = tangent(true);
    g.grad_y = tangent(false);
  }
  return g;
}

}  // namespace enmloc
