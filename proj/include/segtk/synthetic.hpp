#pragma once

// Analytic shapes on the unit square, used as ground truth for rendering
// experiments. Logit fields are signed distances in pixels of the target
// grid: positive strictly inside, negative outside.

#include <cstdint>
#include <string>
#include <vector>

#include "segtk/mask.hpp"

namespace segtk::synthetic {

enum class ShapeKind { kDisk, kRect, kAnnulus };

struct Shape {
  ShapeKind kind = ShapeKind::kDisk;
  // Disk/annulus: centre and radii. Rect: [x0, x1] x [y0, y1].
  double cx = 0.5, cy = 0.5;
  double r_outer = 0.35, r_inner = 0.0;
  double x0 = 0.0, y0 = 0.0, x1 = 0.0, y1 = 0.0;

  static Shape disk(double cx, double cy, double r);
  static Shape rect(double x0, double y0, double x1, double y1);
  static Shape annulus(double cx, double cy, double r_inner, double r_outer);
};

std::string describe(const Shape& s);

// Signed distance in unit-square coordinates.
double signed_distance(const Shape& s, Point p);

// side x side field with the align-corners pixel convention.
ScoreField shape_field(const Shape& s, int side);

// n shapes cycling disk, rectangle, annulus with seeded random parameters.
std::vector<Shape> make_corpus(int n, std::uint64_t seed);

}  // namespace segtk::synthetic
