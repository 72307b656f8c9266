#include <algorithm>
#include <cmath>

#include "segtk/error.hpp"
#include "segtk/ingest.hpp"

namespace segtk::ingest {

BinaryMask rasterize_polygon(const Polygon& polygon, int width, int height) {
  if (polygon.size() < 3) {
    throw InvalidArgument("polygon needs at least 3 vertices, got " +
                          std::to_string(polygon.size()));
  }
  BinaryMask mask(width, height);
  std::vector<double> crossings;
  const std::size_t n = polygon.size();
  for (int row = 0; row < height; ++row) {
    const double yc = row + 0.5;
    crossings.clear();
    for (std::size_t i = 0; i < n; ++i) {
      const Point& a = polygon[i];
      const Point& b = polygon[(i + 1) % n];
      // Half-open in y so a vertex on the scanline is counted once.
      if ((a.y <= yc) == (b.y <= yc)) continue;
      crossings.push_back(a.x + (yc - a.y) * (b.x - a.x) / (b.y - a.y));
    }
    std::sort(crossings.begin(), crossings.end());
    for (std::size_t i = 0; i + 1 < crossings.size(); i += 2) {
      // Pixel centres c + 0.5 in [left, right).
      const double left = std::ceil(crossings[i] - 0.5);
      const double right = std::ceil(crossings[i + 1] - 0.5);
      const int c0 = static_cast<int>(std::max(left, 0.0));
      const int c1 = static_cast<int>(std::min(right, static_cast<double>(width)));
      for (int c = c0; c < c1; ++c) mask.set(c, row, true);
    }
  }
  return mask;
}

BinaryMask rasterize_polygons(const std::vector<Polygon>& polygons, int width,
                              int height) {
  BinaryMask out(width, height);
  for (const Polygon& p : polygons) {
    const BinaryMask m = rasterize_polygon(p, width, height);
    for (int y = 0; y < height; ++y) {
      for (int x = 0; x < width; ++x) {
        if (m.at(x, y)) out.set(x, y, true);
      }
    }
  }
  return out;
}

}  // namespace segtk::ingest
