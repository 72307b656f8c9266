#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

namespace segtk {

// Continuous position inside a unit square. Both coordinates are in [0, 1];
// x runs along columns and y along rows.
struct Point {
  double x = 0.0;
  double y = 0.0;
};

// Rectangular grid of mask logits, row-major. Logit 0 is probability 0.5.
class ScoreField {
 public:
  ScoreField() = default;
  // Throws InvalidArgument on empty dimensions, size mismatch or a
  // non-finite logit.
  ScoreField(int width, int height, std::vector<double> logits);
  // Constant-valued field.
  ScoreField(int width, int height, double value);

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  std::size_t size() const noexcept { return logits_.size(); }

  double at(int x, int y) const { return logits_[index(x, y)]; }
  void set(int x, int y, double v);

  std::span<const double> logits() const noexcept { return logits_; }
  double operator[](std::size_t i) const { return logits_[i]; }

  std::size_t index(int x, int y) const noexcept {
    return static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) +
           static_cast<std::size_t>(x);
  }

  friend bool operator==(const ScoreField&, const ScoreField&) = default;

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<double> logits_;
};

// Row-major bitmap; one byte per pixel, 0 or 1.
class BinaryMask {
 public:
  BinaryMask() = default;
  BinaryMask(int width, int height);
  BinaryMask(int width, int height, std::vector<std::uint8_t> bits);

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  std::size_t size() const noexcept { return bits_.size(); }

  bool at(int x, int y) const { return bits_[index(x, y)] != 0; }
  void set(int x, int y, bool v) { bits_[index(x, y)] = v ? 1 : 0; }
  std::span<const std::uint8_t> bits() const noexcept { return bits_; }

  std::size_t count() const noexcept;

  std::size_t index(int x, int y) const noexcept {
    return static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) +
           static_cast<std::size_t>(x);
  }

  friend bool operator==(const BinaryMask&, const BinaryMask&) = default;

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<std::uint8_t> bits_;
};

// COCO run-length encoding: column-major, alternating background and
// foreground runs, starting with background. Only the first run may be 0.
struct RleMask {
  int width = 0;
  int height = 0;
  std::vector<std::uint32_t> counts;

  friend bool operator==(const RleMask&, const RleMask&) = default;
};

// Axis-aligned box in pixels, (x, y) is the top-left corner.
struct BBox {
  double x = 0.0;
  double y = 0.0;
  double w = 0.0;
  double h = 0.0;

  double area() const noexcept { return w * h; }
  friend bool operator==(const BBox&, const BBox&) = default;
};

enum class SizeBucket { kSmall, kMedium, kLarge };

// Side lengths whose squares split small/medium/large. Defaults follow the
// 3D-FUTURE convention (COCO uses 32 and 96).
struct SizeThresholds {
  double small_side = 113.0;
  double large_side = 256.0;
};

std::string_view to_string(SizeBucket b);

// Bilinear interpolation with the align-corners convention: (0,0) is the
// centre of pixel (0,0) and (1,1) the centre of pixel (W-1,H-1). Queries
// that land on a pixel centre (within 1e-9 px) return that logit exactly.
// Throws OutOfDomain when p is outside the closed unit square.
double bilinear_sample(const ScoreField& field, Point p);

// Normalized coordinate of pixel centre `i` on an axis of `n` pixels.
double pixel_center(int i, int n) noexcept;

// Resample to width x height by bilinear_sample at every output pixel centre.
ScoreField resample(const ScoreField& field, int width, int height);

// bit = logit > threshold (strict).
BinaryMask binarize(const ScoreField& field, double threshold = 0.0);

RleMask rle_encode(const BinaryMask& mask);
// Throws InvalidArgument when counts do not sum to width * height.
BinaryMask rle_decode(const RleMask& rle);
// Full structural check: positive dimensions, sum, no interior zero runs.
void validate_rle(const RleMask& rle);

std::uint64_t rle_area(const RleMask& rle);
// Tight bounding box of the foreground in pixel units; all-zero for an
// empty mask.
BBox rle_to_bbox(const RleMask& rle);
// Intersection-over-union computed on runs without decoding.
double rle_iou(const RleMask& a, const RleMask& b);

// |a ∩ b| / |a ∪ b|; 0 when both are empty. Throws InvalidArgument on a
// dimension mismatch.
double mask_iou(const BinaryMask& a, const BinaryMask& b);
double box_iou(const BBox& a, const BBox& b);

SizeBucket size_bucket(double area, const SizeThresholds& t = {});

}  // namespace segtk
