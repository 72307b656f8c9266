#include "segtk/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <random>

#include "segtk/error.hpp"

namespace segtk::synthetic {

Shape Shape::disk(double cx, double cy, double r) {
  Shape s;
  s.kind = ShapeKind::kDisk;
  s.cx = cx;
  s.cy = cy;
  s.r_outer = r;
  return s;
}

Shape Shape::rect(double x0, double y0, double x1, double y1) {
  Shape s;
  s.kind = ShapeKind::kRect;
  s.x0 = x0;
  s.y0 = y0;
  s.x1 = x1;
  s.y1 = y1;
  return s;
}

Shape Shape::annulus(double cx, double cy, double r_inner, double r_outer) {
  Shape s;
  s.kind = ShapeKind::kAnnulus;
  s.cx = cx;
  s.cy = cy;
  s.r_inner = r_inner;
  s.r_outer = r_outer;
  return s;
}

std::string describe(const Shape& s) {
  char buf[128];
  switch (s.kind) {
    case ShapeKind::kDisk:
      std::snprintf(buf, sizeof buf, "disk(%.4f,%.4f,r=%.4f)", s.cx, s.cy,
                    s.r_outer);
      break;
    case ShapeKind::kRect:
      std::snprintf(buf, sizeof buf, "rect(%.4f,%.4f,%.4f,%.4f)", s.x0, s.y0,
                    s.x1, s.y1);
      break;
    case ShapeKind::kAnnulus:
      std::snprintf(buf, sizeof buf, "annulus(%.4f,%.4f,%.4f..%.4f)", s.cx,
                    s.cy, s.r_inner, s.r_outer);
      break;
  }
  return buf;
}

double signed_distance(const Shape& s, Point p) {
  switch (s.kind) {
    case ShapeKind::kDisk:
      return s.r_outer - std::hypot(p.x - s.cx, p.y - s.cy);
    case ShapeKind::kAnnulus: {
      const double d = std::hypot(p.x - s.cx, p.y - s.cy);
      return std::min(d - s.r_inner, s.r_outer - d);
    }
    case ShapeKind::kRect: {
      const double dx = std::max(s.x0 - p.x, p.x - s.x1);
      const double dy = std::max(s.y0 - p.y, p.y - s.y1);
      if (dx < 0.0 && dy < 0.0) return -std::max(dx, dy);
      return -std::hypot(std::max(dx, 0.0), std::max(dy, 0.0));
    }
  }
  return 0.0;
}

ScoreField shape_field(const Shape& s, int side) {
  if (side < 2) throw InvalidArgument("shape_field: side must be >= 2");
  const double scale = static_cast<double>(side - 1);
  std::vector<double> logits(static_cast<std::size_t>(side) * side);
  for (int y = 0; y < side; ++y) {
    for (int x = 0; x < side; ++x) {
      const Point p{pixel_center(x, side), pixel_center(y, side)};
      logits[static_cast<std::size_t>(y) * side + x] =
          signed_distance(s, p) * scale;
    }
  }
  return ScoreField(side, side, std::move(logits));
}

std::vector<Shape> make_corpus(int n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  auto uniform = [&](double lo, double hi) {
    return std::uniform_real_distribution<double>(lo, hi)(rng);
  };
  std::vector<Shape> out;
  out.reserve(static_cast<std::size_t>(std::max(n, 0)));
  for (int i = 0; i < n; ++i) {
    switch (i % 3) {
      case 0:
        out.push_back(Shape::disk(uniform(0.35, 0.65), uniform(0.35, 0.65),
                                  uniform(0.12, 0.35)));
        break;
      case 1: {
        const double x0 = uniform(0.05, 0.4), y0 = uniform(0.05, 0.4);
        out.push_back(Shape::rect(x0, y0, x0 + uniform(0.2, 0.55),
                                  y0 + uniform(0.2, 0.55)));
        break;
      }
      default: {
        const double r_outer = uniform(0.25, 0.45);
        out.push_back(Shape::annulus(uniform(0.45, 0.55), uniform(0.45, 0.55),
                                     r_outer * uniform(0.35, 0.7), r_outer));
        break;
      }
    }
  }
  return out;
}

}  // namespace segtk::synthetic
