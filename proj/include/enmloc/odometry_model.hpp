#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "enmloc/se2.hpp"

namespace enmloc {

/// Rotate-translate-rotate decomposition of a relative motion.
struct RotTransRot {
  double rot1 = 0.0;
  double trans = 0.0;
  double rot2 = 0.0;
};

/// Noise coefficients of the rot-trans-rot odometry model:
///   var(rot1)  = a1 rot1^2 + a2 trans^2
///   var(trans) = a3 trans^2 + a4 (rot1^2 + rot2^2)
///   var(rot2)  = a1 rot2^2 + a2 trans^2
struct MotionNoise {
  double a1 = 0.0;
  double a2 = 0.0;
  double a3 = 0.0;
  double a4 = 0.0;

  bool is_zero() const { return a1 == 0.0 && a2 == 0.0 && a3 == 0.0 && a4 == 0.0; }
};

/// Translations shorter than this carry no meaningful heading; rot1 is 0.
/// Odometry jitter while turning in place would otherwise produce an
/// arbitrary rot1 and a huge rotational variance.
inline constexpr double kMinTranslationForHeading = 0.01;

/// |rot1| folded so driving backwards is not treated as a half turn.
inline double folded_rotation(double rot) {
  const double a = std::abs(angle_wrap(rot));
  return std::min(a, std::numbers::pi - a);
}

inline RotTransRot decompose(const Pose2& increment) {
  RotTransRot m;
  m.trans = increment.translation().norm();
  m.rot1 = m.trans > kMinTranslationForHeading ? std::atan2(increment.y(), increment.x()) : 0.0;
  m.rot2 = angle_wrap(increment.theta() - m.rot1);
  return m;
}

inline Pose2 recompose(const RotTransRot& m) {
  return {m.trans * std::cos(m.rot1), m.trans * std::sin(m.rot1), m.rot1 + m.rot2};
}

/// Draws a perturbed version of `increment`. Zero noise returns it unchanged.
template <typename Gen>
Pose2 sample_increment(const Pose2& increment, const MotionNoise& noise, Gen& gen) {
  if (noise.is_zero()) {
    return increment;
  }
  const RotTransRot m = decompose(increment);
  const auto draw = [&gen](double variance) {
    if (!(variance > 0.0)) {
      return 0.0;
    }
    std::normal_distribution<double> dist(0.0, std::sqrt(variance));
    return dist(gen);
  };
  const double r1 = folded_rotation(m.rot1);
  const double r2 = folded_rotation(m.rot2);
  RotTransRot n;
  n.rot1 = m.rot1 + draw(noise.a1 * r1 * r1 + noise.a2 * m.trans * m.trans);
  n.trans = m.trans + draw(noise.a3 * m.trans * m.trans + noise.a4 * (r1 * r1 + r2 * r2));
  n.rot2 = m.rot2 + draw(noise.a1 * r2 * r2 + noise.a2 * m.trans * m.trans);
  return recompose(n);
}

}  // namespace enmloc
