#include "enmloc/sim/floorplan.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "enmloc/error.hpp"

namespace enmloc::sim {

double point_segment_distance(const Vec2& p, const Segment& s) {
  const Vec2 e = s.b - s.a;
  const double len2 = e.squared_norm();
  double t = len2 > 0.0 ? (p - s.a).dot(e) / len2 : 0.0;
  t = std::clamp(t, 0.0, 1.0);
  return (p - (s.a + e * t)).norm();
}

double ray_segment_distance(const Vec2& o, const Vec2& d, const Segment& s) {
  constexpr double kInf = std::numeric_limits<double>::infinity();
  const Vec2 e = s.b - s.a;
  const double den = d.cross(e);
  if (std::abs(den) < 1e-15) {
    return kInf;
  }
  const Vec2 ao = s.a - o;
  const double t = ao.cross(e) / den;
  const double u = ao.cross(d) / den;
  if (t < 0.0 || u < 0.0 || u > 1.0) {
    return kInf;
  }
  return t;
}

FloorPlan::FloorPlan(std::vector<Segment> segments, Bounds bounds, Vec2 interior)
    : segments_(std::move(segments)), bounds_(bounds), interior_(interior) {
  if (segments_.empty()) {
    throw InvalidArgument("floor plan has no walls");
  }
  if (!(bounds_.width() > 0.0 && bounds_.height() > 0.0)) {
    throw InvalidArgument("floor plan bounds are degenerate");
  }
  for (const Segment& s : segments_) {
    if (!((s.b - s.a).norm() > 0.0)) {
      throw InvalidArgument("floor plan contains a zero-length wall");
    }
    if (!bounds_.contains(s.a) || !bounds_.contains(s.b)) {
      throw InvalidArgument("floor plan wall lies outside the bounds");
    }
  }
  if (!bounds_.contains(interior_)) {
    throw InvalidArgument("interior point lies outside the bounds");
  }
  build_mask();
}

void FloorPlan::build_mask() {
  constexpr double res = kMaskResolution;
  mask_origin_ = bounds_.min - Vec2{kMaskPad, kMaskPad};
  mask_nx_ = static_cast<std::size_t>(std::ceil((bounds_.width() + 2 * kMaskPad) / res));
  mask_ny_ = static_cast<std::size_t>(std::ceil((bounds_.height() + 2 * kMaskPad) / res));
  mask_.assign(mask_nx_ * mask_ny_, kUnknown);

  const auto index = [this](const Vec2& p, std::size_t& out) {
    const double u = std::floor((p.x - mask_origin_.x) / res);
    const double v = std::floor((p.y - mask_origin_.y) / res);
    if (u < 0 || v < 0 || u >= static_cast<double>(mask_nx_) ||
        v >= static_cast<double>(mask_ny_)) {
      return false;
    }
    out = static_cast<std::size_t>(v) * mask_nx_ + static_cast<std::size_t>(u);
    return true;
  };

  for (const Segment& s : segments_) {
    const double len = (s.b - s.a).norm();
    const auto steps = static_cast<std::size_t>(std::ceil(len / (0.25 * res)));
    for (std::size_t k = 0; k <= steps; ++k) {
      const double t = static_cast<double>(k) / static_cast<double>(steps);
      std::size_t idx;
      if (index(s.a + (s.b - s.a) * t, idx)) {
        mask_[idx] = kWall;
      }
    }
  }

  std::size_t seed;
  if (!index(interior_, seed) || mask_[seed] == kWall) {
    throw InvalidArgument("interior point sits on a wall");
  }
  std::vector<std::size_t> stack{seed};
  mask_[seed] = kFree;
  while (!stack.empty()) {
    const std::size_t c = stack.back();
    stack.pop_back();
    const std::size_t cx = c % mask_nx_;
    const std::size_t cy = c / mask_nx_;
    const auto visit = [&](std::size_t n) {
      if (mask_[n] == kUnknown) {
        mask_[n] = kFree;
        stack.push_back(n);
      }
    };
    if (cx > 0) visit(c - 1);
    if (cx + 1 < mask_nx_) visit(c + 1);
    if (cy > 0) visit(c - mask_nx_);
    if (cy + 1 < mask_ny_) visit(c + mask_nx_);
  }
  // A leak to the mask border means the walls are not closed.
  for (std::size_t x = 0; x < mask_nx_; ++x) {
    if (mask_[x] == kFree || mask_[(mask_ny_ - 1) * mask_nx_ + x] == kFree) {
      throw InvalidArgument("floor plan free space is not enclosed by walls");
    }
  }
  for (std::size_t y = 0; y < mask_ny_; ++y) {
    if (mask_[y * mask_nx_] == kFree || mask_[y * mask_nx_ + mask_nx_ - 1] == kFree) {
      throw InvalidArgument("floor plan free space is not enclosed by walls");
    }
  }
}

FloorPlan::Cell FloorPlan::cell_at(const Vec2& p) const {
  const double u = std::floor((p.x - mask_origin_.x) / kMaskResolution);
  const double v = std::floor((p.y - mask_origin_.y) / kMaskResolution);
  if (u < 0 || v < 0 || u >= static_cast<double>(mask_nx_) ||
      v >= static_cast<double>(mask_ny_)) {
    return kUnknown;
  }
  return static_cast<Cell>(
      mask_[static_cast<std::size_t>(v) * mask_nx_ + static_cast<std::size_t>(u)]);
}

bool FloorPlan::is_free(const Vec2& p) const { return cell_at(p) == kFree; }

double FloorPlan::distance(const Vec2& p) const {
  double best = std::numeric_limits<double>::infinity();
  for (const Segment& s : segments_) {
    best = std::min(best, point_segment_distance(p, s));
  }
  return best;
}

double FloorPlan::true_sdf(const Vec2& p) const {
  const double d = distance(p);
  // Wall cells are within one mask cell of a wall; treat them as the free side.
  return cell_at(p) == kUnknown ? -d : d;
}

double FloorPlan::true_psdf(const Vec2& p, const Vec2& d) const {
  double best = std::numeric_limits<double>::infinity();
  for (const Segment& s : segments_) {
    best = std::min(best, ray_segment_distance(p, d, s));
  }
  return best;
}

FloorPlan read_floorplan(std::istream& is) {
  std::string line;
  std::size_t line_no = 0;
  bool have_header = false;
  Bounds bounds;
  Vec2 interior;
  std::vector<Segment> segments;
  while (std::getline(is, line)) {
    ++line_no;
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') {
      continue;
    }
    std::istringstream ls(line);
    if (!have_header) {
      std::string kw_bounds;
      std::string kw_interior;
      if (!(ls >> kw_bounds >> bounds.min.x >> bounds.min.y >> bounds.max.x >> bounds.max.y >>
            kw_interior >> interior.x >> interior.y) ||
          kw_bounds != "bounds" || kw_interior != "interior") {
        throw ParseError(line_no,
                         "expected header `bounds minx miny maxx maxy interior px py`");
      }
      have_header = true;
      continue;
    }
    Segment s;
    if (!(ls >> s.a.x >> s.a.y >> s.b.x >> s.b.y)) {
      throw ParseError(line_no, "expected `ax ay bx by`");
    }
    std::string rest;
    if (ls >> rest) {
      throw ParseError(line_no, "trailing data after segment");
    }
    segments.push_back(s);
  }
  if (!have_header) {
    throw SchemaError("floor plan has no header line");
  }
  try {
    return FloorPlan(std::move(segments), bounds, interior);
  } catch (const InvalidArgument& e) {
    throw SchemaError(std::string("invalid floor plan: ") + e.what());
  }
}

FloorPlan read_floorplan_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) {
    throw IoError("cannot open floor plan " + path);
  }
  return read_floorplan(f);
}

void write_floorplan(std::ostream& os, const FloorPlan& plan) {
  const auto old = os.precision(17);
  const Bounds& b = plan.bounds();
  os << "bounds " << b.min.x << ' ' << b.min.y << ' ' << b.max.x << ' ' << b.max.y
     << " interior " << plan.interior_point().x << ' ' << plan.interior_point().y << '\n';
  for (const Segment& s : plan.segments()) {
    os << s.a.x << ' ' << s.a.y << ' ' << s.b.x << ' ' << s.b.y << '\n';
  }
  os.precision(old);
}

}  // namespace enmloc::sim
