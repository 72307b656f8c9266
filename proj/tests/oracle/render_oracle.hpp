#pragma once

// Straightforward reference for subdivision rendering and shape
// rasterization: explicit per-pixel interpolation weights, a full sort for
// point selection and point-in-shape tests at pixel centres.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <vector>

namespace oracle {

struct Grid {
  int side = 0;
  std::vector<double> v;  // row-major
  double at(int x, int y) const { return v[static_cast<std::size_t>(y) * side + x]; }
};

// Sample at continuous pixel coordinates (px, py) in [0, side-1].
inline double sample_px(const Grid& g, double px, double py) {
  const int n = g.side;
  auto split = [n](double p, int& lo, double& t) {
    const double r = std::round(p);
    if (std::fabs(p - r) < 1e-9) p = r;
    lo = static_cast<int>(std::floor(p));
    if (lo >= n - 1) {
      lo = n - 1;
      t = 0.0;
    } else {
      t = p - lo;
    }
  };
  int x0, y0;
  double tx, ty;
  split(px, x0, tx);
  split(py, y0, ty);
  const int x1 = std::min(x0 + 1, n - 1), y1 = std::min(y0 + 1, n - 1);
  const double top = g.at(x0, y0) + tx * (g.at(x1, y0) - g.at(x0, y0));
  const double bot = g.at(x0, y1) + tx * (g.at(x1, y1) - g.at(x0, y1));
  return top + ty * (bot - top);
}

// Sample at unit coordinates with corner-aligned pixel centres.
inline double sample_unit(const Grid& g, double u, double v) {
  return sample_px(g, u * (g.side - 1), v * (g.side - 1));
}

inline Grid upsample(const Grid& g, int side) {
  Grid out{side, std::vector<double>(static_cast<std::size_t>(side) * side)};
  for (int y = 0; y < side; ++y) {
    for (int x = 0; x < side; ++x) {
      const double u = static_cast<double>(x) / (side - 1);
      const double v = static_cast<double>(y) / (side - 1);
      out.v[static_cast<std::size_t>(y) * side + x] = sample_unit(g, u, v);
    }
  }
  return out;
}

// Re-predicts the n pixels with the smallest |logit| (ties: lowest index)
// by sampling `reference` at their centres, after each doubling.
inline Grid render(const Grid& coarse, const Grid& reference, int target,
                   std::size_t n) {
  Grid g = coarse;
  while (g.side < target) {
    g = upsample(g, g.side * 2);
    std::vector<std::size_t> idx(g.v.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
      const double ua = std::fabs(g.v[a]), ub = std::fabs(g.v[b]);
      if (ua != ub) return ua < ub;
      return a < b;
    });
    const std::size_t take = std::min(n, idx.size());
    std::vector<double> next = g.v;
    for (std::size_t k = 0; k < take; ++k) {
      const std::size_t i = idx[k];
      const int x = static_cast<int>(i % g.side), y = static_cast<int>(i / g.side);
      next[i] = sample_unit(reference, static_cast<double>(x) / (g.side - 1),
                            static_cast<double>(y) / (g.side - 1));
    }
    g.v = std::move(next);
  }
  return g;
}

inline Grid upsample_only(const Grid& coarse, int target) {
  Grid g = coarse;
  while (g.side < target) g = upsample(g, g.side * 2);
  return g;
}

enum class Kind { kDisk, kRect, kAnnulus };

struct ShapeSpec {
  Kind kind;
  double a, b, c, d;  // disk: cx cy r -; rect: x0 y0 x1 y1; annulus: cx cy rin rout
};

inline bool inside(const ShapeSpec& s, double x, double y) {
  switch (s.kind) {
    case Kind::kDisk:
      return (x - s.a) * (x - s.a) + (y - s.b) * (y - s.b) < s.c * s.c;
    case Kind::kRect:
      return x > s.a && x < s.c && y > s.b && y < s.d;
    case Kind::kAnnulus: {
      const double r2 = (x - s.a) * (x - s.a) + (y - s.b) * (y - s.b);
      return r2 > s.c * s.c && r2 < s.d * s.d;
    }
  }
  return false;
}

inline std::vector<std::uint8_t> rasterize(const ShapeSpec& s, int side) {
  std::vector<std::uint8_t> out(static_cast<std::size_t>(side) * side);
  for (int y = 0; y < side; ++y) {
    for (int x = 0; x < side; ++x) {
      out[static_cast<std::size_t>(y) * side + x] =
          inside(s, static_cast<double>(x) / (side - 1),
                 static_cast<double>(y) / (side - 1));
    }
  }
  return out;
}

// Signed distance (positive inside) in unit coordinates.
inline double distance(const ShapeSpec& s, double x, double y) {
  switch (s.kind) {
    case Kind::kDisk:
      return s.c - std::sqrt((x - s.a) * (x - s.a) + (y - s.b) * (y - s.b));
    case Kind::kRect: {
      const double inside_x = std::min(x - s.a, s.c - x);
      const double inside_y = std::min(y - s.b, s.d - y);
      if (inside_x > 0 && inside_y > 0) return std::min(inside_x, inside_y);
      const double ox = std::max(0.0, -inside_x), oy = std::max(0.0, -inside_y);
      return -std::sqrt(ox * ox + oy * oy);
    }
    case Kind::kAnnulus: {
      const double r = std::sqrt((x - s.a) * (x - s.a) + (y - s.b) * (y - s.b));
      return std::min(r - s.c, s.d - r);
    }
  }
  return 0.0;
}

// Signed distance in target pixels at every pixel centre.
inline Grid distance_grid(const ShapeSpec& s, int side) {
  Grid g{side, std::vector<double>(static_cast<std::size_t>(side) * side)};
  for (int y = 0; y < side; ++y) {
    for (int x = 0; x < side; ++x) {
      g.v[static_cast<std::size_t>(y) * side + x] =
          distance(s, static_cast<double>(x) / (side - 1),
                   static_cast<double>(y) / (side - 1)) *
          (side - 1);
    }
  }
  return g;
}

inline std::vector<std::uint8_t> positive(const Grid& g) {
  std::vector<std::uint8_t> out(g.v.size());
  for (std::size_t i = 0; i < g.v.size(); ++i) out[i] = g.v[i] > 0.0;
  return out;
}

inline double iou(const std::vector<std::uint8_t>& a, const std::vector<std::uint8_t>& b) {
  long inter = 0, uni = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    inter += a[i] && b[i];
    uni += a[i] || b[i];
  }
  return uni ? static_cast<double>(inter) / uni : 0.0;
}

}  // namespace oracle
