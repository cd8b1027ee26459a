#include <cmath>
#include <random>
#include <sstream>
#include <vector>

#include <gtest/gtest.h>

#include "enmloc/error.hpp"
#include "enmloc/trainer.hpp"
#include "toy_model.hpp"

namespace enmloc::train {
namespace {

Ray ray_along_x(double r) { return {{1.0, 0.0}, r, true}; }

TEST(SampleRay, DefaultCountsAndRegions) {
  TrainConfig cfg;
  Rng rng(1);
  const Pose2 pose(1.0, 2.0, 0.4);
  const auto s = sample_ray(pose, ray_along_x(3.0), cfg, rng);
  ASSERT_EQ(s.size(), 15u);
  std::size_t t = 0, o = 0, f = 0;
  for (const TrainSample& x : s) {
    switch (x.region) {
      case Region::kTruncated:
        ++t;
        EXPECT_GT(x.psdf_gt, 0.0);
        EXPECT_LE(x.psdf_gt, cfg.trunc_band);
        break;
      case Region::kOccupied:
        ++o;
        EXPECT_GE(x.psdf_gt, -cfg.occ_band);
        EXPECT_LT(x.psdf_gt, 0.0);
        break;
      case Region::kFree:
        ++f;
        EXPECT_GT(x.psdf_gt, cfg.trunc_band);
        EXPECT_LE(3.0 - x.psdf_gt, 3.0 - cfg.trunc_band);
        EXPECT_GE(3.0 - x.psdf_gt, cfg.free_min_depth);
        break;
    }
  }
  EXPECT_EQ(t, 6u);
  EXPECT_EQ(o, 4u);
  EXPECT_EQ(f, 5u);
}

TEST(SampleRay, SamplesLieOnTheRay) {
  TrainConfig cfg;
  Rng rng(2);
  std::uniform_real_distribution<double> u(-3.0, 3.0);
  for (int i = 0; i < 200; ++i) {
    const Pose2 pose(u(rng), u(rng), u(rng));
    const double r = 0.5 + std::abs(u(rng)) * 3;
    const double a = u(rng);
    const Ray ray{{std::cos(a), std::sin(a)}, r, true};
    for (const TrainSample& s : sample_ray(pose, ray, cfg, rng)) {
      const Vec2 expected = s.origin + s.d * (r - s.psdf_gt);
      EXPECT_NEAR(s.p.x, expected.x, 1e-9);
      EXPECT_NEAR(s.p.y, expected.y, 1e-9);
      EXPECT_NEAR(s.d.norm(), 1.0, 1e-12);
      const Vec2 world_dir = pose.rotate(ray.direction);
      EXPECT_NEAR(s.d.x, world_dir.x, 1e-15);
      EXPECT_NEAR(s.d.y, world_dir.y, 1e-15);
    }
  }
}

TEST(SampleRay, TargetIsRangeMinusDepth) {
  // psdf_gt = r - |p - o|: depth 2.5 on a 3 m ray gives 0.5, depth 3.4 gives -0.4.
  TrainConfig cfg;
  cfg.trunc_band = 0.6;
  cfg.occ_band = 0.5;
  Rng rng(3);
  for (const TrainSample& s : sample_ray(Pose2::identity(), ray_along_x(3.0), cfg, rng)) {
    const double depth = (s.p - s.origin).norm();
    EXPECT_NEAR(s.psdf_gt, 3.0 - depth, 1e-12);
  }
  const TrainSample at_2_5{{2.5, 0.0}, {1, 0}, {0, 0}, 3.0 - 2.5, Region::kTruncated};
  EXPECT_DOUBLE_EQ(at_2_5.psdf_gt, 0.5);
  EXPECT_TRUE(at_2_5.near_surface());
}

TEST(SampleRay, ShortRayKeepsNearSurfaceSamplesOnly) {
  TrainConfig cfg;
  Rng rng(4);
  const auto s = sample_ray(Pose2::identity(), ray_along_x(0.2), cfg, rng);
  EXPECT_EQ(s.size(), cfg.m_t + cfg.m_o);
  for (const TrainSample& x : s) {
    EXPECT_NE(x.region, Region::kFree);
    const double depth = x.p.x;
    if (x.region == Region::kTruncated) {
      EXPECT_GE(depth, cfg.free_min_depth);
      EXPECT_LT(depth, 0.2);
    }
  }
}

TEST(SampleRay, InvalidRayThrows) {
  TrainConfig cfg;
  Rng rng(5);
  EXPECT_THROW(sample_ray(Pose2::identity(), {{1, 0}, -1.0, false}, cfg, rng), InvalidArgument);
}

TrainSample near(double gt) { return {{}, {1, 0}, {}, gt, Region::kTruncated}; }
TrainSample far(double gt) { return {{}, {1, 0}, {}, gt, Region::kFree}; }

TEST(LossPsdf, Examples) {
  const std::vector<TrainSample> one{near(0.5)};
  EXPECT_NEAR(loss_psdf(one, std::vector<double>{0.2}), 0.3, 1e-15);
  EXPECT_EQ(loss_psdf(one, std::vector<double>{0.5}), 0.0);
  const std::vector<TrainSample> two{near(0.0), near(0.0)};
  EXPECT_NEAR(loss_psdf(two, std::vector<double>{0.1, -0.3}), 0.2, 1e-15);
}

TEST(LossPsdf, RejectsEmptyAndFreeSamples) {
  EXPECT_THROW(loss_psdf({}, {}), EmptyBatch);
  const std::vector<TrainSample> f{far(1.0)};
  EXPECT_THROW(loss_psdf(f, std::vector<double>{0.0}), InvalidArgument);
}

TEST(LossSdf, BalancedAtZero) {
  const std::vector<TrainSample> s{near(0.0)};
  EXPECT_NEAR(loss_sdf(s, std::vector<double>{0.0}, 0.05), std::log(2.0), 1e-15);
}

TEST(LossSdf, VanishesForConfidentAgreement) {
  const std::vector<TrainSample> s{far(1e6)};
  EXPECT_LT(loss_sdf(s, std::vector<double>{1e6}, 0.05), 1e-12);
}

TEST(LossSdf, EntropyOfSigmoidOne) {
  // s / scale = 1 and psdf_gt / scale = 1: the BCE equals the entropy of sigma(1).
  const double sig = 1.0 / (1.0 + std::exp(-1.0));
  const double entropy = -(sig * std::log(sig) + (1.0 - sig) * std::log(1.0 - sig));
  const std::vector<TrainSample> s{near(0.05)};
  EXPECT_NEAR(loss_sdf(s, std::vector<double>{0.05}, 0.05), entropy, 1e-12);
  // Independent 64-bit evaluation, frozen.
  EXPECT_NEAR(entropy, 0.58220310888821791, 1e-15);
}

TEST(LossSdf, GradientMatchesFiniteDifference) {
  const std::vector<TrainSample> s{near(0.1), far(0.7), near(-0.05)};
  std::vector<double> pred{0.02, 0.5, -0.2};
  std::vector<double> grad(3);
  loss_sdf(s, pred, 0.05, grad);
  for (std::size_t i = 0; i < 3; ++i) {
    const double h = 1e-6;
    std::vector<double> p = pred;
    p[i] += h;
    const double fp = loss_sdf(s, p, 0.05);
    p[i] -= 2 * h;
    const double fm = loss_sdf(s, p, 0.05);
    EXPECT_NEAR(grad[i], (fp - fm) / (2 * h), 1e-8);
  }
}

TEST(LossEikonal, Examples) {
  EXPECT_EQ(loss_eikonal(std::vector<Vec2>{{1, 0}, {0, -1}}), 0.0);
  EXPECT_EQ(loss_eikonal(std::vector<Vec2>{{0, 0}}), 1.0);
  EXPECT_EQ(loss_eikonal(std::vector<Vec2>{{3, 4}}), 16.0);
  EXPECT_THROW(loss_eikonal({}), EmptyBatch);
}

TEST(TotalLoss, WeightedSum) { EXPECT_NEAR(combine_losses(0.5, 0.3, 1.0, 0.1), 0.9, 1e-15); }

TEST(TotalLoss, ComponentsMatchStandaloneLosses) {
  EnmModel m = testing::toy_model(21);
  const auto samples = testing::toy_samples(22);
  TrainConfig cfg;
  const LossTerms terms = total_loss(m, samples, cfg, false);

  std::vector<TrainSample> near_set;
  std::vector<double> s;
  std::vector<double> sb;
  std::vector<Vec2> g;
  for (const TrainSample& x : samples) {
    const EnmPrediction p = m.forward(x.p, x.d);
    s.push_back(p.sdf);
    if (x.near_surface()) {
      near_set.push_back(x);
      sb.push_back(p.psdf);
      g.push_back(m.sdf_gradient(x.p));
    }
  }
  EXPECT_NEAR(terms.sdf, loss_sdf(samples, s, cfg.logistic_scale), 1e-12);
  EXPECT_NEAR(terms.psdf, loss_psdf(near_set, sb), 1e-12);
  EXPECT_NEAR(terms.eikonal, loss_eikonal(g), 1e-12);
  EXPECT_NEAR(terms.total, combine_losses(terms.sdf, terms.psdf, terms.eikonal, cfg.beta), 1e-12);
}

TEST(TotalLoss, FreeSamplesDoNotEnterNearSurfaceTerms) {
  EnmModel m = testing::toy_model(23);
  const auto samples = testing::toy_samples(24);
  std::vector<TrainSample> near_only;
  for (const TrainSample& x : samples) {
    if (x.near_surface()) {
      near_only.push_back(x);
    }
  }
  TrainConfig cfg;
  const LossTerms all = total_loss(m, samples, cfg, false);
  const LossTerms part = total_loss(m, near_only, cfg, false);
  EXPECT_EQ(all.psdf, part.psdf);
  EXPECT_EQ(all.eikonal, part.eikonal);
  EXPECT_NE(all.sdf, part.sdf);

  std::vector<TrainSample> free_only;
  for (const TrainSample& x : samples) {
    if (!x.near_surface()) {
      free_only.push_back(x);
    }
  }
  EXPECT_THROW(total_loss(m, free_only, cfg, false), EmptyBatch);
}

TEST(TotalLoss, GradientsMatchCentralDifferences) {
  EnmModel m = testing::toy_model(25);
  const auto samples = testing::toy_samples(26);
  TrainConfig cfg;
  const testing::GradCheck check = testing::check_total_loss_gradient(m, samples, cfg, 1e-5);
  EXPECT_EQ(check.checked, check.parameter_count);
  EXPECT_LE(check.max_rel_err, 1e-4);
}

TEST(TotalLoss, ChunkSizeDoesNotChangeGradients) {
  const auto samples = testing::toy_samples(27);
  EnmModel a = testing::toy_model(28);
  EnmModel b = a;
  TrainConfig big;
  TrainConfig small;
  small.chunk = 3;
  const LossTerms la = total_loss(a, samples, big, true);
  const LossTerms lb = total_loss(b, samples, small, true);
  EXPECT_NEAR(la.total, lb.total, 1e-14);
  const auto pa = a.parameters();
  const auto pb = b.parameters();
  for (std::size_t k = 0; k < pa.size(); ++k) {
    for (std::size_t i = 0; i < pa[k]->size(); ++i) {
      EXPECT_NEAR(pa[k]->grad.data()[i], pb[k]->grad.data()[i], 1e-14);
    }
  }
}

TEST(TotalLoss, GradientsAreLinearInBeta) {
  const auto samples = testing::toy_samples(29);
  const auto grads = [&](double beta) {
    EnmModel m = testing::toy_model(30);
    TrainConfig cfg;
    cfg.beta = beta;
    m.zero_grad();
    total_loss(m, samples, cfg, true);
    std::vector<double> out;
    for (const diff::ParamTensor* p : m.parameters()) {
      out.insert(out.end(), p->grad.values().begin(), p->grad.values().end());
    }
    return out;
  };
  const auto g0 = grads(0.0);
  const auto g1 = grads(1.0);
  const auto gh = grads(0.5);
  double eik_part = 0.0;
  for (std::size_t i = 0; i < g0.size(); ++i) {
    EXPECT_NEAR(gh[i], 0.5 * (g0[i] + g1[i]), 1e-12);
    eik_part = std::max(eik_part, std::abs(g1[i] - g0[i]));
  }
  // With beta = 0 the Eikonal branch contributes nothing; with beta = 1 it does.
  EXPECT_GT(eik_part, 1e-6);
}

TEST(TotalLoss, ZeroBetaGradientsMatchCentralDifferences) {
  EnmModel m = testing::toy_model(33);
  const auto samples = testing::toy_samples(34);
  TrainConfig cfg;
  cfg.beta = 0.0;
  const testing::GradCheck check = testing::check_total_loss_gradient(m, samples, cfg, 1e-5);
  EXPECT_LE(check.max_rel_err, 1e-4);
}

TEST(TotalLoss, SmallStepDecreasesBatchLoss) {
  EnmModel m = testing::toy_model(31);
  const auto samples = testing::toy_samples(32);
  TrainConfig cfg;
  m.zero_grad();
  const double before = total_loss(m, samples, cfg, true).total;
  diff::AdamState adam(diff::AdamConfig{1e-4});
  adam_step(m.parameters(), adam);
  const double after = total_loss(m, samples, cfg, false).total;
  EXPECT_LT(after, before);
}

std::vector<LidarScan> ring_scans() {
  // A sensor in the middle of a circular room of radius 2 at several poses.
  std::vector<LidarScan> scans;
  for (int k = 0; k < 4; ++k) {
    const Pose2 pose(0.2 * k, -0.1 * k, 0.3 * k);
    std::vector<double> ranges;
    const std::size_t n = 90;
    const double inc = 2 * std::numbers::pi / n;
    for (std::size_t i = 0; i < n; ++i) {
      const Vec2 d = pose.rotate({std::cos(i * inc), std::sin(i * inc)});
      const Vec2 o = pose.translation();
      // Distance to the circle |o + t d| = 2.
      const double b = o.dot(d);
      const double c = o.squared_norm() - 4.0;
      ranges.push_back(-b + std::sqrt(b * b - c));
    }
    scans.push_back(LidarScan::from_ranges(k, pose, pose, 0.0, inc, 10.0, ranges));
  }
  return scans;
}

TEST(TrainMap, ZeroIterationsReturnsInitialModel) {
  const auto scans = ring_scans();
  TrainConfig cfg;
  cfg.iterations = 0;
  const TrainResult r = train_map(scans, cfg);
  Rng rng(cfg.seed);
  std::vector<Pose2> poses;
  for (const LidarScan& s : scans) {
    poses.push_back(*s.gt);
  }
  const EnmModel fresh = EnmModel::create(mapping_bounds(scans, poses), cfg.model, rng);
  const auto& a = r.model.grid().features().value;
  const auto& b = fresh.grid().features().value;
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    ASSERT_EQ(a.data()[i], b.data()[i]);
  }
  EXPECT_TRUE(r.log.empty());
}

TEST(TrainMap, DeterministicForSeed) {
  const auto scans = ring_scans();
  TrainConfig cfg;
  cfg.iterations = 20;
  cfg.batch_rays = 64;
  cfg.telemetry_interval = 5;
  const TrainResult a = train_map(scans, cfg);
  const TrainResult b = train_map(scans, cfg);
  EnmModel ma = a.model;
  EnmModel mb = b.model;
  const auto pa = ma.parameters();
  const auto pb = mb.parameters();
  for (std::size_t k = 0; k < pa.size(); ++k) {
    for (std::size_t i = 0; i < pa[k]->size(); ++i) {
      ASSERT_EQ(pa[k]->value.data()[i], pb[k]->value.data()[i]);
    }
  }
  ASSERT_EQ(a.log.size(), 4u);
  EXPECT_EQ(a.log.back().iteration, 20u);
  std::ostringstream os;
  write_loss_log(os, a.log);
  EXPECT_EQ(os.str().substr(0, os.str().find('\n')),
            "iteration,loss_sdf,loss_psdf,loss_eikonal,total");
}

TEST(TrainMap, LossDropsOnASimpleRoom) {
  const auto scans = ring_scans();
  TrainConfig cfg;
  cfg.iterations = 300;
  cfg.batch_rays = 128;
  cfg.telemetry_interval = 50;
  const TrainResult r = train_map(scans, cfg);
  EXPECT_LT(r.log.back().loss.total, 0.8 * r.log.front().loss.total);
}

TEST(TrainMap, ScansWithoutPosesAreRejected) {
  auto scans = ring_scans();
  scans[1].gt.reset();
  TrainConfig cfg;
  cfg.iterations = 1;
  EXPECT_THROW(train_map(scans, cfg), InvalidArgument);
  std::vector<Pose2> too_few(1);
  EXPECT_THROW(train_map(scans, too_few, cfg), InvalidArgument);
}

TEST(TrainConfig, ValidationRejectsBadValues) {
  TrainConfig cfg;
  EXPECT_NO_THROW(cfg.validate());
  cfg.logistic_scale = 0.0;
  EXPECT_THROW(cfg.validate(), InvalidArgument);
  cfg = TrainConfig{};
  cfg.trunc_band = -1.0;
  EXPECT_THROW(cfg.validate(), InvalidArgument);
}

}  // namespace
}  // namespace enmloc::train
