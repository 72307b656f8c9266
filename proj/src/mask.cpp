#include "segtk/mask.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "segtk/error.hpp"

namespace segtk {
namespace {

constexpr double kSnapTolerance = 1e-9;

void check_dims(int width, int height, const char* what) {
  if (width < 1 || height < 1) {
    throw InvalidArgument(std::string(what) + ": dimensions must be >= 1, got " +
                          std::to_string(width) + "x" + std::to_string(height));
  }
}

std::size_t pixel_count(int width, int height) {
  return static_cast<std::size_t>(width) * static_cast<std::size_t>(height);
}

// Maps a unit coordinate onto the pixel axis and splits it into the left
// sample and the fractional offset towards the next one.
struct AxisPos {
  int lo;
  int hi;
  double t;
};

AxisPos locate(double u, int n) {
  if (n == 1) return {0, 0, 0.0};
  double p = u * static_cast<double>(n - 1);
  const double nearest = std::round(p);
  if (std::abs(p - nearest) <= kSnapTolerance) p = nearest;
  int lo = static_cast<int>(std::floor(p));
  lo = std::clamp(lo, 0, n - 1);
  if (lo == n - 1) return {lo, lo, 0.0};
  return {lo, lo + 1, p - static_cast<double>(lo)};
}

}  // namespace

ScoreField::ScoreField(int width, int height, std::vector<double> logits)
    : width_(width), height_(height), logits_(std::move(logits)) {
  check_dims(width, height, "ScoreField");
  if (logits_.size() != pixel_count(width, height)) {
    throw InvalidArgument("ScoreField: expected " +
                          std::to_string(pixel_count(width, height)) +
                          " logits, got " + std::to_string(logits_.size()));
  }
  for (std::size_t i = 0; i < logits_.size(); ++i) {
    if (!std::isfinite(logits_[i])) {
      throw InvalidArgument("ScoreField: non-finite logit at index " +
                            std::to_string(i));
    }
  }
}

ScoreField::ScoreField(int width, int height, double value)
    : ScoreField(width, height,
                 std::vector<double>(width > 0 && height > 0
                                         ? pixel_count(width, height)
                                         : 0,
                                     value)) {}

void ScoreField::set(int x, int y, double v) {
  if (!std::isfinite(v)) throw InvalidArgument("ScoreField: non-finite logit");
  logits_[index(x, y)] = v;
}

BinaryMask::BinaryMask(int width, int height)
    : width_(width), height_(height) {
  check_dims(width, height, "BinaryMask");
  bits_.assign(pixel_count(width, height), 0);
}

BinaryMask::BinaryMask(int width, int height, std::vector<std::uint8_t> bits)
    : width_(width), height_(height), bits_(std::move(bits)) {
  check_dims(width, height, "BinaryMask");
  if (bits_.size() != pixel_count(width, height)) {
    throw InvalidArgument("BinaryMask: bit count does not match dimensions");
  }
  for (auto& b : bits_) b = b ? 1 : 0;
}

std::size_t BinaryMask::count() const noexcept {
  return static_cast<std::size_t>(std::count(bits_.begin(), bits_.end(), 1));
}

std::string_view to_string(SizeBucket b) {
  switch (b) {
    case SizeBucket::kSmall:
      return "small";
    case SizeBucket::kMedium:
      return "medium";
    case SizeBucket::kLarge:
      return "large";
  }
  return "unknown";
}

double pixel_center(int i, int n) noexcept {
  if (n <= 1) return 0.0;
  return static_cast<double>(i) / static_cast<double>(n - 1);
}

double bilinear_sample(const ScoreField& field, Point p) {
  if (!(p.x >= 0.0 && p.x <= 1.0 && p.y >= 0.0 && p.y <= 1.0)) {
    throw OutOfDomain("bilinear_sample: point (" + std::to_string(p.x) + ", " +
                      std::to_string(p.y) + ") outside [0,1]^2");
  }
  const AxisPos ax = locate(p.x, field.width());
  const AxisPos ay = locate(p.y, field.height());
  const double a = field.at(ax.lo, ay.lo);
  const double b = field.at(ax.hi, ay.lo);
  const double top = a + ax.t * (b - a);
  if (ay.t == 0.0) return top;
  const double c = field.at(ax.lo, ay.hi);
  const double d = field.at(ax.hi, ay.hi);
  const double bottom = c + ax.t * (d - c);
  return top + ay.t * (bottom - top);
}

ScoreField resample(const ScoreField& field, int width, int height) {
  check_dims(width, height, "resample");
  std::vector<double> out(pixel_count(width, height));
  std::vector<double> xs(static_cast<std::size_t>(width));
  for (int x = 0; x < width; ++x) xs[x] = pixel_center(x, width);
  for (int y = 0; y < height; ++y) {
    const double v = pixel_center(y, height);
    for (int x = 0; x < width; ++x) {
      out[static_cast<std::size_t>(y) * width + x] =
          bilinear_sample(field, {xs[x], v});
    }
  }
  return ScoreField(width, height, std::move(out));
}

BinaryMask binarize(const ScoreField& field, double threshold) {
  std::vector<std::uint8_t> bits(field.size());
  const auto logits = field.logits();
  for (std::size_t i = 0; i < bits.size(); ++i) {
    bits[i] = logits[i] > threshold ? 1 : 0;
  }
  return BinaryMask(field.width(), field.height(), std::move(bits));
}

RleMask rle_encode(const BinaryMask& mask) {
  RleMask rle{mask.width(), mask.height(), {}};
  std::uint8_t current = 0;
  std::uint32_t run = 0;
  for (int x = 0; x < mask.width(); ++x) {
    for (int y = 0; y < mask.height(); ++y) {
      const std::uint8_t bit = mask.at(x, y) ? 1 : 0;
      if (bit != current) {
        rle.counts.push_back(run);
        run = 0;
        current = bit;
      }
      ++run;
    }
  }
  rle.counts.push_back(run);
  return rle;
}

void validate_rle(const RleMask& rle) {
  check_dims(rle.width, rle.height, "RleMask");
  std::uint64_t total = 0;
  for (std::size_t i = 0; i < rle.counts.size(); ++i) {
    if (i > 0 && rle.counts[i] == 0) {
      throw InvalidArgument("RleMask: zero run at position " +
                            std::to_string(i));
    }
    total += rle.counts[i];
  }
  if (total != pixel_count(rle.width, rle.height)) {
    throw InvalidArgument("RleMask: counts sum to " + std::to_string(total) +
                          ", expected " +
                          std::to_string(pixel_count(rle.width, rle.height)));
  }
}

BinaryMask rle_decode(const RleMask& rle) {
  check_dims(rle.width, rle.height, "rle_decode");
  const std::uint64_t total =
      std::accumulate(rle.counts.begin(), rle.counts.end(), std::uint64_t{0});
  if (total != pixel_count(rle.width, rle.height)) {
    throw InvalidArgument("rle_decode: counts sum to " + std::to_string(total) +
                          ", expected " +
                          std::to_string(pixel_count(rle.width, rle.height)));
  }
  BinaryMask mask(rle.width, rle.height);
  std::size_t pos = 0;
  bool fg = false;
  for (const std::uint32_t run : rle.counts) {
    for (std::uint32_t k = 0; k < run; ++k, ++pos) {
      if (fg) {
        const int x = static_cast<int>(pos / rle.height);
        const int y = static_cast<int>(pos % rle.height);
        mask.set(x, y, true);
      }
    }
    fg = !fg;
  }
  return mask;
}

std::uint64_t rle_area(const RleMask& rle) {
  std::uint64_t a = 0;
  for (std::size_t i = 1; i < rle.counts.size(); i += 2) a += rle.counts[i];
  return a;
}

BBox rle_to_bbox(const RleMask& rle) {
  const std::uint64_t h = static_cast<std::uint64_t>(rle.height);
  std::uint64_t pos = 0;
  std::uint64_t xmin = UINT64_MAX, xmax = 0, ymin = UINT64_MAX, ymax = 0;
  bool any = false;
  for (std::size_t i = 0; i < rle.counts.size(); ++i) {
    const std::uint64_t n = rle.counts[i];
    if (i % 2 == 1 && n > 0) {
      const std::uint64_t first = pos;
      const std::uint64_t last = pos + n - 1;
      const std::uint64_t x0 = first / h, x1 = last / h;
      xmin = std::min(xmin, x0);
      xmax = std::max(xmax, x1);
      if (x0 == x1) {
        ymin = std::min(ymin, first % h);
        ymax = std::max(ymax, last % h);
      } else {
        ymin = 0;
        ymax = h - 1;
      }
      any = true;
    }
    pos += n;
  }
  if (!any) return {};
  return {static_cast<double>(xmin), static_cast<double>(ymin),
          static_cast<double>(xmax - xmin + 1),
          static_cast<double>(ymax - ymin + 1)};
}

double rle_iou(const RleMask& a, const RleMask& b) {
  if (a.width != b.width || a.height != b.height) {
    throw InvalidArgument("rle_iou: dimension mismatch");
  }
  std::size_t ia = 0, ib = 0;
  std::uint64_t ra = a.counts.empty() ? 0 : a.counts[0];
  std::uint64_t rb = b.counts.empty() ? 0 : b.counts[0];
  bool fa = false, fb = false;
  std::uint64_t inter = 0, uni = 0;
  // Advance both run streams in lockstep, consuming the shorter run.
  while (true) {
    while (ra == 0 && ia + 1 < a.counts.size()) {
      ra = a.counts[++ia];
      fa = !fa;
    }
    while (rb == 0 && ib + 1 < b.counts.size()) {
      rb = b.counts[++ib];
      fb = !fb;
    }
    if (ra == 0 || rb == 0) break;
    const std::uint64_t step = std::min(ra, rb);
    if (fa || fb) uni += step;
    if (fa && fb) inter += step;
    ra -= step;
    rb -= step;
  }
  if (uni == 0) return 0.0;
  return static_cast<double>(inter) / static_cast<double>(uni);
}

double mask_iou(const BinaryMask& a, const BinaryMask& b) {
  if (a.width() != b.width() || a.height() != b.height()) {
    throw InvalidArgument("mask_iou: dimension mismatch " +
                          std::to_string(a.width()) + "x" +
                          std::to_string(a.height()) + " vs " +
                          std::to_string(b.width()) + "x" +
                          std::to_string(b.height()));
  }
  const auto ba = a.bits();
  const auto bb = b.bits();
  std::size_t inter = 0, uni = 0;
  for (std::size_t i = 0; i < ba.size(); ++i) {
    inter += ba[i] & bb[i];
    uni += ba[i] | bb[i];
  }
  if (uni == 0) return 0.0;
  return static_cast<double>(inter) / static_cast<double>(uni);
}

double box_iou(const BBox& a, const BBox& b) {
  const double iw = std::min(a.x + a.w, b.x + b.w) - std::max(a.x, b.x);
  if (iw <= 0.0) return 0.0;
  const double ih = std::min(a.y + a.h, b.y + b.h) - std::max(a.y, b.y);
  if (ih <= 0.0) return 0.0;
  const double inter = iw * ih;
  const double uni = a.area() + b.area() - inter;
  if (uni <= 0.0) return 0.0;
  return inter / uni;
}

SizeBucket size_bucket(double area, const SizeThresholds& t) {
  if (area < t.small_side * t.small_side) return SizeBucket::kSmall;
  if (area <= t.large_side * t.large_side) return SizeBucket::kMedium;
  return SizeBucket::kLarge;
}

}  // namespace segtk
