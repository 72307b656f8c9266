#include <algorithm>
#include <charconv>
#include <cmath>

#include "segtk/error.hpp"
#include "segtk/ingest.hpp"

namespace segtk::ingest {
namespace {

std::string shortest(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

}  // namespace

Histogram size_histogram(const std::vector<BBox>& boxes, double bin_width) {
  if (!(bin_width > 0.0)) throw InvalidArgument("bin_width must be > 0");
  Histogram h;
  h.bin_width = bin_width;
  for (const BBox& b : boxes) {
    const double side = std::sqrt(std::max(b.area(), 0.0));
    const auto bin = static_cast<std::size_t>(std::floor(side / bin_width));
    if (bin >= h.counts.size()) h.counts.resize(bin + 1, 0);
    ++h.counts[bin];
    ++h.total;
  }
  return h;
}

double median_sqrt_area(const std::vector<BBox>& boxes) {
  if (boxes.empty()) throw InvalidArgument("empty input");
  std::vector<double> sides;
  sides.reserve(boxes.size());
  for (const BBox& b : boxes) sides.push_back(std::sqrt(std::max(b.area(), 0.0)));
  const std::size_t mid = (sides.size() - 1) / 2;
  std::nth_element(sides.begin(), sides.begin() + static_cast<std::ptrdiff_t>(mid),
                   sides.end());
  return sides[mid];
}

std::string histogram_csv(const Histogram& h) {
  std::string s = "bin_start,bin_end,count\n";
  for (std::size_t i = 0; i < h.counts.size(); ++i) {
    s += shortest(static_cast<double>(i) * h.bin_width) + "," +
         shortest(static_cast<double>(i + 1) * h.bin_width) + "," +
         std::to_string(h.counts[i]) + "\n";
  }
  return s;
}

}  // namespace segtk::ingest
