#include "enmloc/feature_grid.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "enmloc/error.hpp"

namespace enmloc {

FeatureGrid::FeatureGrid(Vec2 origin, double resolution, std::size_t nx, std::size_t ny,
                         std::size_t dim)
    : origin_(origin), resolution_(resolution), nx_(nx), ny_(ny), features_(nx * ny, dim) {
  if (nx < 2 || ny < 2) {
    throw InvalidArgument("feature grid needs at least 2x2 corners");
  }
  if (!(resolution > 0.0)) {
    throw InvalidArgument("feature grid resolution must be positive");
  }
  if (dim < 1) {
    throw InvalidArgument("feature dimension must be at least 1");
  }
}

FeatureGrid FeatureGrid::covering(const Bounds& area, double resolution, double pad,
                                  std::size_t dim) {
  if (!(resolution > 0.0)) {
    throw InvalidArgument("feature grid resolution must be positive");
  }
  const Vec2 origin = area.min - Vec2{pad, pad};
  const auto corners = [&](double extent) {
    return static_cast<std::size_t>(std::ceil((extent + 2.0 * pad) / resolution)) + 1;
  };
  return FeatureGrid(origin, resolution, std::max<std::size_t>(2, corners(area.width())),
                     std::max<std::size_t>(2, corners(area.height())), dim);
}

Bounds FeatureGrid::bounds() const {
  return {origin_, origin_ + Vec2{static_cast<double>(nx_ - 1) * resolution_,
                                  static_cast<double>(ny_ - 1) * resolution_}};
}

namespace {

// Grid coordinate of x, snapped onto [0, max] when it misses by rounding
// (e.g. bounds().max maps back to max plus one ulp). NaN when outside.
double grid_coord(double x, double origin, double resolution, double max) {
  constexpr double kEdgeSlack = 1e-9;  // cells
  const double u = (x - origin) / resolution;
  if (u >= 0.0 && u <= max) {
    return u;
  }
  if (u >= -kEdgeSlack && u < 0.0) {
    return 0.0;
  }
  if (u > max && u <= max + kEdgeSlack) {
    return max;
  }
  return std::numeric_limits<double>::quiet_NaN();
}

}  // namespace

bool FeatureGrid::contains(const Vec2& p) const {
  return !std::isnan(grid_coord(p.x, origin_.x, resolution_, static_cast<double>(nx_ - 1))) &&
         !std::isnan(grid_coord(p.y, origin_.y, resolution_, static_cast<double>(ny_ - 1)));
}

std::span<const double> FeatureGrid::corner(std::size_t i, std::size_t j) const {
  if (i >= nx_ || j >= ny_) {
    throw OutOfBounds("corner (" + std::to_string(i) + ", " + std::to_string(j) +
                      ") outside grid");
  }
  return {features_.value.row(j * nx_ + i), dim()};
}

bool FeatureGrid::try_cell_weights(const Vec2& p, diff::GatherRow& row) const {
  const double u = grid_coord(p.x, origin_.x, resolution_, static_cast<double>(nx_ - 1));
  const double v = grid_coord(p.y, origin_.y, resolution_, static_cast<double>(ny_ - 1));
  if (std::isnan(u) || std::isnan(v)) {
    return false;
  }
  // The last corner row/column belongs to the cell before it.
  const std::size_t i = std::min(static_cast<std::size_t>(u), nx_ - 2);
  const std::size_t j = std::min(static_cast<std::size_t>(v), ny_ - 2);
  const double tx = u - static_cast<double>(i);
  const double ty = v - static_cast<double>(j);
  const auto base = static_cast<std::uint32_t>(j * nx_ + i);
  const auto stride = static_cast<std::uint32_t>(nx_);
  row.index = {base, base + 1, base + stride, base + stride + 1};
  row.weight = {(1.0 - tx) * (1.0 - ty), tx * (1.0 - ty), (1.0 - tx) * ty, tx * ty};
  const double inv = 1.0 / resolution_;
  row.dweight_dx = {-(1.0 - ty) * inv, (1.0 - ty) * inv, -ty * inv, ty * inv};
  row.dweight_dy = {-(1.0 - tx) * inv, -tx * inv, (1.0 - tx) * inv, tx * inv};
  return true;
}

diff::GatherRow FeatureGrid::cell_weights(const Vec2& p) const {
  diff::GatherRow row;
  if (!try_cell_weights(p, row)) {
    throw OutOfBounds("point (" + std::to_string(p.x) + ", " + std::to_string(p.y) +
                      ") outside feature grid");
  }
  return row;
}

std::vector<double> FeatureGrid::interpolate(const Vec2& p) const {
  const diff::GatherRow row = cell_weights(p);
  std::vector<double> out(dim());
  for (std::size_t c = 0; c < dim(); ++c) {
    double acc = 0.0;
    for (std::size_t k = 0; k < 4; ++k) {
      acc += row.weight[k] * features_.value(row.index[k], c);
    }
    out[c] = acc;
  }
  return out;
}

void positional_encode_into(const Vec2& d, std::size_t bands, double* out, std::size_t stride) {
  // Higher octaves come from double-angle identities: trig dominated the
  // cost of batched direction queries otherwise.
  std::size_t k = 0;
  for (const double v : {d.x, d.y}) {
    out[(k++) * stride] = v;
    double s = std::sin(v);
    double c = std::cos(v);
    for (std::size_t l = 0; l < bands; ++l) {
      out[(k++) * stride] = s;
      out[(k++) * stride] = c;
      const double s2 = 2.0 * s * c;
      c = (c - s) * (c + s);
      s = s2;
    }
  }
}

std::vector<double> positional_encode(const Vec2& d, std::size_t bands) {
  std::vector<double> out(encoding_width(bands));
  positional_encode_into(d, bands, out.data(), 1);
  return out;
}

}  // namespace enmloc
