#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "enmloc/enm_model.hpp"

namespace enmloc::evalio {

/// 8-bit grayscale raster, row 0 at the top.
struct GrayImage {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<std::uint8_t> pixels;  // row-major

  std::uint8_t at(std::size_t col, std::size_t row) const { return pixels[row * width + col]; }
};

struct SdfRender {
  GrayImage image;    // s in [-0.5, 0.5] m mapped to [0, 255], clamped
  GrayImage overlay;  // image with zero-crossing pixels painted black
  std::vector<bool> zero_crossing;
  double px_per_meter = 0.0;
  Bounds bounds;

  /// World position of a pixel center.
  Vec2 pixel_center(std::size_t col, std::size_t row) const;
};

/// Samples s on a ceil(w * ppm) x ceil(h * ppm) lattice over `bounds`.
/// A pixel is a zero crossing when a 4-neighbor has the opposite sign and
/// the pixel is the one of the pair closer to zero. Throws OutOfBounds
/// when `bounds` leaves the grid.
SdfRender render_sdf_image(const EnmModel& model, const Bounds& bounds, double px_per_meter);

/// Binary portable graymap (P5).
void write_pgm(std::ostream& os, const GrayImage& image);
void write_pgm_file(const std::string& path, const GrayImage& image);

}  // namespace enmloc::evalio
