#include <cmath>
#include <numbers>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "enmloc/enm_model.hpp"
#include "enmloc/error.hpp"
#include "enmloc/feature_grid.hpp"

namespace enmloc {
namespace {

FeatureGrid grid_with_features(std::size_t nx, std::size_t ny, std::size_t dim,
                               std::uint64_t seed) {
  FeatureGrid g({0.0, 0.0}, 0.5, nx, ny, dim);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (double& v : g.features().value.values()) {
    v = u(rng);
  }
  return g;
}

EnmModel random_model(std::uint64_t seed, double feature_init = 0.5) {
  Rng rng(seed);
  EnmConfig cfg;
  cfg.feature_init = feature_init;
  cfg.resolution = 0.25;
  return EnmModel::create({{0.0, 0.0}, {2.0, 2.0}}, cfg, rng);
}

EnmModel zero_model() {
  EnmModel m = random_model(1);
  for (diff::ParamTensor* p : m.parameters()) {
    if (p == &m.grid().features()) {
      continue;
    }
    p->value.fill(0.0);
  }
  return m;
}

TEST(FeatureGrid, RejectsInvalidShapes) {
  EXPECT_THROW(FeatureGrid({0, 0}, 0.1, 1, 5, 4), InvalidArgument);
  EXPECT_THROW(FeatureGrid({0, 0}, 0.0, 3, 3, 4), InvalidArgument);
  EXPECT_THROW(FeatureGrid({0, 0}, 0.1, 3, 3, 0), InvalidArgument);
}

TEST(FeatureGrid, ContainsItsOwnBounds) {
  // Awkward origins and resolutions where origin + (n-1) res does not map
  // back to exactly n-1.
  for (const double res : {0.1, 0.07, 0.3}) {
    for (const double ox : {-1.1, -0.7000000000000001, 3.3}) {
      FeatureGrid g({ox, ox * 0.5}, res, 97, 61, 2);
      const Bounds b = g.bounds();
      for (const Vec2& c : {b.min, b.max, Vec2{b.min.x, b.max.y}, Vec2{b.max.x, b.min.y}}) {
        EXPECT_TRUE(g.contains(c));
        EXPECT_NO_THROW(g.interpolate(c));
      }
      EXPECT_FALSE(g.contains(b.max + Vec2{1e-6, 0.0}));
      EXPECT_FALSE(g.contains(b.min - Vec2{0.0, 1e-6}));
    }
  }
}

TEST(FeatureGrid, CornerQueryReturnsCornerFeature) {
  const FeatureGrid g = grid_with_features(4, 3, 4, 1);
  for (std::size_t j = 0; j < 3; ++j) {
    for (std::size_t i = 0; i < 4; ++i) {
      const Vec2 p{0.5 * static_cast<double>(i), 0.5 * static_cast<double>(j)};
      const std::vector<double> f = grid_interpolate(g, p);
      const auto c = g.corner(i, j);
      for (std::size_t k = 0; k < 4; ++k) {
        EXPECT_EQ(f[k], c[k]);
      }
    }
  }
}

TEST(FeatureGrid, CellCenterIsCornerMean) {
  const FeatureGrid g = grid_with_features(3, 3, 4, 2);
  const std::vector<double> f = g.interpolate({0.75, 0.25});
  for (std::size_t k = 0; k < 4; ++k) {
    const double mean =
        0.25 * (g.corner(1, 0)[k] + g.corner(2, 0)[k] + g.corner(1, 1)[k] + g.corner(2, 1)[k]);
    EXPECT_NEAR(f[k], mean, 1e-15);
  }
}

TEST(FeatureGrid, LinearAlongOneAxis) {
  FeatureGrid g({0.0, 0.0}, 1.0, 2, 2, 1);
  auto& v = g.features().value;
  v(0, 0) = 0.0;  // (0, 0)
  v(1, 0) = 1.0;  // (1, 0)
  v(2, 0) = 0.0;  // (0, 1)
  v(3, 0) = 1.0;  // (1, 1)
  EXPECT_NEAR(g.interpolate({0.3, 0.0})[0], 0.3, 1e-15);
  EXPECT_NEAR(g.interpolate({0.3, 0.8})[0], 0.3, 1e-15);
}

TEST(FeatureGrid, WeightsAreAPartitionOfUnity) {
  const FeatureGrid g = grid_with_features(5, 6, 2, 3);
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> ux(0.0, 2.0);
  std::uniform_real_distribution<double> uy(0.0, 2.5);
  for (int i = 0; i < 1000; ++i) {
    const diff::GatherRow r = g.cell_weights({ux(rng), uy(rng)});
    double sum = 0.0;
    for (double w : r.weight) {
      EXPECT_GE(w, 0.0);
      sum += w;
    }
    EXPECT_NEAR(sum, 1.0, 1e-12);
  }
}

TEST(FeatureGrid, OutsideQueriesThrow) {
  const FeatureGrid g = grid_with_features(3, 3, 2, 5);
  EXPECT_THROW(g.interpolate({-0.01, 0.5}), OutOfBounds);
  EXPECT_THROW(g.interpolate({0.5, 1.01}), OutOfBounds);
  EXPECT_NO_THROW(g.interpolate({1.0, 1.0}));
  diff::GatherRow r;
  EXPECT_FALSE(g.try_cell_weights({2.0, 0.0}, r));
}

TEST(FeatureGrid, CoveringAddsPadding) {
  const FeatureGrid g = FeatureGrid::covering({{1.0, 2.0}, {3.0, 2.5}}, 0.1, 1.0, 4);
  const Bounds b = g.bounds();
  EXPECT_LE(b.min.x, 0.0 + 1e-12);
  EXPECT_LE(b.min.y, 1.0 + 1e-12);
  EXPECT_GE(b.max.x, 4.0 - 1e-12);
  EXPECT_GE(b.max.y, 3.5 - 1e-12);
}

TEST(PositionalEncoding, LengthForFourBands) {
  EXPECT_EQ(positional_encode({1.0, 0.0}, 4).size(), 18u);
  EXPECT_EQ(encoding_width(4), 18u);
}

TEST(PositionalEncoding, ZeroComponent) {
  const std::vector<double> e = positional_encode({0.0, 1.0}, 4);
  const std::vector<double> expected{0, 0, 1, 0, 1, 0, 1, 0, 1};
  for (std::size_t k = 0; k < 9; ++k) {
    EXPECT_EQ(e[k], expected[k]);
  }
}

TEST(PositionalEncoding, SingleBandAtHalfPi) {
  const double h = std::numbers::pi / 2;
  const std::vector<double> e = positional_encode({h, 0.0}, 1);
  ASSERT_EQ(e.size(), 6u);
  EXPECT_NEAR(e[0], 1.5708, 1e-4);
  EXPECT_NEAR(e[1], 1.0, 1e-15);
  EXPECT_NEAR(e[2], 6.1e-17, 1e-17);
}

TEST(PositionalEncoding, MatchesDirectTrigonometry) {
  for (int i = -100; i <= 100; ++i) {
    const double v = 0.0317 * i;
    const std::vector<double> e = positional_encode({v, -v}, 4);
    for (std::size_t c = 0; c < 2; ++c) {
      const double x = c == 0 ? v : -v;
      double f = 1.0;
      for (std::size_t l = 0; l < 4; ++l, f *= 2.0) {
        EXPECT_NEAR(e[c * 9 + 1 + 2 * l], std::sin(f * x), 1e-14);
        EXPECT_NEAR(e[c * 9 + 2 + 2 * l], std::cos(f * x), 1e-14);
      }
    }
  }
}

TEST(EnmModel, LayerWidthsFollowConfig) {
  const EnmModel m = random_model(3);
  EXPECT_EQ(m.feature_dim(), 4u);
  EXPECT_EQ(m.direction_width(), 22u);
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_EQ(m.layer(EnmModel::kPositionLayers + i).in(), 4u);
    EXPECT_EQ(m.layer(EnmModel::kPositionLayers + i).out(), 4u);
    EXPECT_EQ(m.layer(EnmModel::kDirectionLayers + i).in(), 22u);
    EXPECT_EQ(m.layer(EnmModel::kDirectionLayers + i).out(), 22u);
  }
  EXPECT_EQ(m.layer(EnmModel::kSdfHead).out(), 1u);
  EXPECT_EQ(m.layer(EnmModel::kPsdfHead).in(), 22u);
}

TEST(EnmModel, ZeroNetworkPredictsZero) {
  const EnmModel m = zero_model();
  const EnmPrediction p = enm_forward(m, {0.7, 1.1}, {0.6, 0.8});
  EXPECT_EQ(p.sdf, 0.0);
  EXPECT_EQ(p.psdf, 0.0);
  const Vec2 g = sdf_spatial_gradient(m, {0.7, 1.1});
  EXPECT_EQ(g.x, 0.0);
  EXPECT_EQ(g.y, 0.0);
}

TEST(EnmModel, ForwardIsPure) {
  const EnmModel m = random_model(4);
  const EnmPrediction a = m.forward({1.3, 0.4}, {0.0, 1.0});
  const EnmPrediction b = m.forward({1.3, 0.4}, {0.0, 1.0});
  EXPECT_EQ(a.sdf, b.sdf);
  EXPECT_EQ(a.psdf, b.psdf);
}

TEST(EnmModel, SdfIgnoresDirection) {
  const EnmModel m = random_model(5);
  const EnmPrediction a = m.forward({1.3, 0.4}, {0.0, 1.0});
  const EnmPrediction b = m.forward({1.3, 0.4}, {std::sqrt(0.5), -std::sqrt(0.5)});
  EXPECT_EQ(a.sdf, b.sdf);
  EXPECT_NE(a.psdf, b.psdf);
}

TEST(EnmModel, BatchEqualsSingleEvaluations) {
  const EnmModel m = random_model(6);
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(-0.9, 2.9);
  std::uniform_real_distribution<double> a(-std::numbers::pi, std::numbers::pi);
  const std::size_t n = 300;
  std::vector<Vec2> pts(n);
  std::vector<Vec2> dirs(n);
  for (std::size_t i = 0; i < n; ++i) {
    pts[i] = {u(rng), u(rng)};
    const double t = a(rng);
    dirs[i] = {std::cos(t), std::sin(t)};
  }
  std::vector<double> s(n);
  std::vector<double> sb(n);
  m.forward_batch(pts, dirs, s, sb);
  for (std::size_t i = 0; i < n; ++i) {
    const EnmPrediction p = m.forward(pts[i], dirs[i]);
    EXPECT_EQ(s[i], p.sdf);
    EXPECT_EQ(sb[i], p.psdf);
  }
}

TEST(EnmModel, OutOfGridThrows) {
  const EnmModel m = random_model(8);
  EXPECT_THROW(m.forward({-5.0, 0.0}, {1.0, 0.0}), OutOfBounds);
  EXPECT_THROW(m.sdf_gradient({0.0, 50.0}), OutOfBounds);
}

TEST(EnmModel, SpatialGradientMatchesCentralDifferences) {
  const EnmModel m = random_model(9);
  const double res = m.grid().resolution();
  const Vec2 o = m.grid().origin();
  std::mt19937_64 rng(10);
  std::uniform_int_distribution<std::size_t> ci(0, m.grid().nx() - 2);
  std::uniform_int_distribution<std::size_t> cj(0, m.grid().ny() - 2);
  std::uniform_real_distribution<double> frac(0.05, 0.95);
  const double h = 1e-4;
  int checked = 0;
  for (int trial = 0; trial < 200; ++trial) {
    const Vec2 p{o.x + (static_cast<double>(ci(rng)) + frac(rng)) * res,
                 o.y + (static_cast<double>(cj(rng)) + frac(rng)) * res};
    const Vec2 g = m.sdf_gradient(p);
    const double dx = (m.forward(p + Vec2{h, 0}, {1, 0}).sdf -
                       m.forward(p - Vec2{h, 0}, {1, 0}).sdf) / (2 * h);
    const double dy = (m.forward(p + Vec2{0, h}, {1, 0}).sdf -
                       m.forward(p - Vec2{0, h}, {1, 0}).sdf) / (2 * h);
    const double scale = std::max({g.norm(), std::hypot(dx, dy), 1e-3});
    // A ReLU kink between the two probes breaks the comparison; those are rare.
    if (std::hypot(g.x - dx, g.y - dy) / scale > 1e-3) {
      continue;
    }
    ++checked;
  }
  EXPECT_GE(checked, 190);
}

TEST(EnmModel, SpatialGradientOnCellEdgeUsesOwningCell) {
  const EnmModel m = random_model(11);
  const double res = m.grid().resolution();
  const Vec2 o = m.grid().origin();
  const Vec2 edge{o.x + 3 * res, o.y + 2.5 * res};
  const Vec2 inside{edge.x + 1e-7, edge.y};
  const Vec2 a = m.sdf_gradient(edge);
  const Vec2 b = m.sdf_gradient(inside);
  EXPECT_NEAR(a.x, b.x, 1e-5);
  EXPECT_NEAR(a.y, b.y, 1e-5);
}

TEST(EnmModel, SeededForwardRegression) {
  Rng rng(42);
  const EnmModel m = EnmModel::create({{0.0, 0.0}, {2.0, 2.0}}, EnmConfig{}, rng);
  const EnmPrediction p = m.forward({1.23, 0.77}, {0.6, 0.8});
  // Pinned from the first verified build.
  EXPECT_NEAR(p.sdf, 0.20053739543646398, 1e-12);
  EXPECT_NEAR(p.psdf, 0.0285165953274122, 1e-12);
}

TEST(EnmModel, RecordedGraphMatchesForward) {
  EnmModel m = random_model(12);
  const std::vector<Vec2> pts{{0.3, 0.4}, {1.7, 1.1}, {0.9, 1.9}};
  const std::vector<Vec2> dirs{{1, 0}, {0, 1}, {0.6, -0.8}};
  diff::Tape tape;
  const EnmGraph g = m.record(tape, pts, dirs, true);
  for (std::size_t i = 0; i < pts.size(); ++i) {
    const EnmPrediction p = m.forward(pts[i], dirs[i]);
    EXPECT_EQ(tape.value(g.sdf)(0, i), p.sdf);
    EXPECT_EQ(tape.value(*g.psdf)(0, i), p.psdf);
    const Vec2 grad = m.sdf_gradient(pts[i]);
    EXPECT_NEAR(tape.value(*g.grad_x)(0, i), grad.x, 1e-12);
    EXPECT_NEAR(tape.value(*g.grad_y)(0, i), grad.y, 1e-12);
  }
}

}  // namespace
}  // namespace enmloc
