#pragma once

#include <cmath>
#include <numbers>

namespace enmloc {

struct Vec2 {
  double x = 0.0;
  double y = 0.0;

  constexpr Vec2() = default;
  constexpr Vec2(double x_, double y_) : x(x_), y(y_) {}

  constexpr Vec2 operator+(const Vec2& o) const { return {x + o.x, y + o.y}; }
  constexpr Vec2 operator-(const Vec2& o) const { return {x - o.x, y - o.y}; }
  constexpr Vec2 operator-() const { return {-x, -y}; }
  constexpr Vec2 operator*(double k) const { return {x * k, y * k}; }
  constexpr Vec2& operator+=(const Vec2& o) {
    x += o.x;
    y += o.y;
    return *this;
  }
  constexpr bool operator==(const Vec2&) const = default;

  constexpr double dot(const Vec2& o) const { return x * o.x + y * o.y; }
  constexpr double cross(const Vec2& o) const { return x * o.y - y * o.x; }
  double norm() const { return std::hypot(x, y); }
  constexpr double squared_norm() const { return x * x + y * y; }
};

constexpr Vec2 operator*(double k, const Vec2& v) { return v * k; }

/// Rotates v counter-clockwise by theta.
inline Vec2 rotate(const Vec2& v, double theta) {
  const double c = std::cos(theta);
  const double s = std::sin(theta);
  return {c * v.x - s * v.y, s * v.x + c * v.y};
}

/// Wraps an angle into [-pi, pi). The boundary value +pi maps to -pi.
/// Throws InvalidArgument for non-finite input.
double angle_wrap(double theta);

/// Planar pose (x, y, theta). theta is kept wrapped by every constructor.
class Pose2 {
 public:
  Pose2() = default;
  Pose2(double x, double y, double theta);
  Pose2(const Vec2& t, double theta) : Pose2(t.x, t.y, theta) {}

  static Pose2 identity() { return {}; }

  double x() const { return x_; }
  double y() const { return y_; }
  double theta() const { return theta_; }
  Vec2 translation() const { return {x_, y_}; }

  /// R(theta) p + t.
  Vec2 apply(const Vec2& p) const;
  /// R(theta) v, no translation.
  Vec2 rotate(const Vec2& v) const { return enmloc::rotate(v, theta_); }

  Pose2 inverse() const;

  bool operator==(const Pose2&) const = default;

 private:
  double x_ = 0.0;
  double y_ = 0.0;
  double theta_ = 0.0;
};

/// a ⊕ b: b expressed in a's frame, mapped to the world.
Pose2 pose_compose(const Pose2& a, const Pose2& b);
/// The relative transform r with a ⊕ r = b.
Pose2 pose_between(const Pose2& a, const Pose2& b);
inline Vec2 pose_apply(const Pose2& pose, const Vec2& p) { return pose.apply(p); }

}  // namespace enmloc
