#include "enmloc/evalio/render.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <ostream>

#include "enmloc/error.hpp"

namespace enmloc::evalio {

namespace {

constexpr double kHalfRange = 0.5;  // meters mapped to the gray ends

std::uint8_t to_gray(double s) {
  const double v = std::round((s + kHalfRange) / (2.0 * kHalfRange) * 255.0);
  return static_cast<std::uint8_t>(std::clamp(v, 0.0, 255.0));
}

}  // namespace

Vec2 SdfRender::pixel_center(std::size_t col, std::size_t row) const {
  const double x = bounds.min.x + (static_cast<double>(col) + 0.5) / px_per_meter;
  const double y = bounds.max.y - (static_cast<double>(row) + 0.5) / px_per_meter;
  return {std::min(x, bounds.max.x), std::max(y, bounds.min.y)};
}

SdfRender render_sdf_image(const EnmModel& model, const Bounds& bounds, double px_per_meter) {
  if (!(px_per_meter > 0.0) || !std::isfinite(px_per_meter)) {
    throw InvalidArgument("render: pixels per meter must be positive");
  }
  if (!(bounds.width() > 0.0) || !(bounds.height() > 0.0)) {
    throw InvalidArgument("render: degenerate bounds");
  }
  if (!model.grid().contains(bounds.min) || !model.grid().contains(bounds.max)) {
    throw OutOfBounds("render: bounds leave the map grid");
  }
  SdfRender r;
  r.px_per_meter = px_per_meter;
  r.bounds = bounds;
  const auto w = static_cast<std::size_t>(std::ceil(bounds.width() * px_per_meter - 1e-9));
  const auto h = static_cast<std::size_t>(std::ceil(bounds.height() * px_per_meter - 1e-9));
  std::vector<Vec2> points;
  points.reserve(w * h);
  for (std::size_t row = 0; row < h; ++row) {
    for (std::size_t col = 0; col < w; ++col) {
      points.push_back(r.pixel_center(col, row));
    }
  }
  std::vector<double> s(points.size());
  model.forward_batch(points, {}, s, {});

  r.image.width = r.overlay.width = w;
  r.image.height = r.overlay.height = h;
  r.image.pixels.resize(w * h);
  for (std::size_t i = 0; i < s.size(); ++i) {
    r.image.pixels[i] = to_gray(s[i]);
  }
  r.zero_crossing.assign(w * h, false);
  const auto mark = [&](std::size_t a, std::size_t b) {
    if ((s[a] >= 0.0) == (s[b] >= 0.0)) {
      return;
    }
    r.zero_crossing[std::abs(s[a]) <= std::abs(s[b]) ? a : b] = true;
  };
  for (std::size_t row = 0; row < h; ++row) {
    for (std::size_t col = 0; col < w; ++col) {
      const std::size_t i = row * w + col;
      if (col + 1 < w) {
        mark(i, i + 1);
      }
      if (row + 1 < h) {
        mark(i, i + w);
      }
    }
  }
  r.overlay.pixels = r.image.pixels;
  for (std::size_t i = 0; i < r.zero_crossing.size(); ++i) {
    if (r.zero_crossing[i]) {
      r.overlay.pixels[i] = 0;
    }
  }
  return r;
}

void write_pgm(std::ostream& os, const GrayImage& image) {
  os << "P5\n" << image.width << ' ' << image.height << "\n255\n";
  os.write(reinterpret_cast<const char*>(image.pixels.data()),
           static_cast<std::streamsize>(image.pixels.size()));
  if (!os) {
    throw IoError("failed writing image");
  }
}

void write_pgm_file(const std::string& path, const GrayImage& image) {
  std::ofstream os(path, std::ios::binary);
  if (!os) {
    throw IoError("cannot open '" + path + "' for writing");
  }
  write_pgm(os, image);
  os.close();
  if (!os) {
    throw IoError("failed writing '" + path + "'");
  }
}

}  // namespace enmloc::evalio
