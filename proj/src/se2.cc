#include "enmloc/se2.hpp"

#include <cmath>
#include <numbers>

#include "enmloc/error.hpp"

namespace enmloc {

double angle_wrap(double theta) {
  if (!std::isfinite(theta)) {
    throw InvalidArgument("angle_wrap: non-finite angle");
  }
  constexpr double kPi = std::numbers::pi;
  constexpr double kTwoPi = 2.0 * std::numbers::pi;
  if (theta >= -kPi && theta < kPi) {
    return theta;
  }
  double r = std::fmod(theta + kPi, kTwoPi);
  if (r < 0.0) {
    r += kTwoPi;
  }
  r -= kPi;
  // fmod rounding can land exactly on +pi.
  if (r >= kPi) {
    r = -kPi;
  }
  return r;
}

Pose2::Pose2(double x, double y, double theta) : x_(x), y_(y), theta_(angle_wrap(theta)) {}

Vec2 Pose2::apply(const Vec2& p) const {
  const double c = std::cos(theta_);
  const double s = std::sin(theta_);
  return {c * p.x - s * p.y + x_, s * p.x + c * p.y + y_};
}

Pose2 Pose2::inverse() const {
  const Vec2 t = enmloc::rotate(Vec2{-x_, -y_}, -theta_);
  return {t.x, t.y, -theta_};
}

Pose2 pose_compose(const Pose2& a, const Pose2& b) {
  return {a.apply(b.translation()), a.theta() + b.theta()};
}

Pose2 pose_between(const Pose2& a, const Pose2& b) {
  const Vec2 d = enmloc::rotate(b.translation() - a.translation(), -a.theta());
  return {d, b.theta() - a.theta()};
}

}  // namespace enmloc
