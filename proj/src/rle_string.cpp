#include <string>

#include "segtk/error.hpp"
#include "segtk/ingest.hpp"

namespace segtk::ingest {

std::string rle_string_encode(const RleMask& rle) {
  std::string s;
  const auto& counts = rle.counts;
  for (std::size_t i = 0; i < counts.size(); ++i) {
    std::int64_t x = counts[i];
    if (i > 2) x -= static_cast<std::int64_t>(counts[i - 2]);
    bool more = true;
    while (more) {
      char c = static_cast<char>(x & 0x1f);
      x >>= 5;
      more = (c & 0x10) ? x != -1 : x != 0;
      if (more) c |= 0x20;
      s.push_back(static_cast<char>(c + 48));
    }
  }
  return s;
}

RleMask rle_string_decode(std::string_view s, int width, int height) {
  if (width < 1 || height < 1) throw ParseError("", "RLE size must be positive");
  RleMask rle{width, height, {}};
  std::size_t k = 0;
  while (k < s.size()) {
    std::int64_t x = 0;
    int shift = 0;
    bool more = true;
    while (more) {
      if (k >= s.size()) {
        throw ParseError("", "RLE string truncated at byte " + std::to_string(k));
      }
      const int c = static_cast<unsigned char>(s[k]) - 48;
      if (c < 0 || c > 0x3f) {
        throw ParseError("", "invalid RLE character at byte " + std::to_string(k));
      }
      if (shift > 55) throw ParseError("", "RLE count overflows at byte " + std::to_string(k));
      x |= static_cast<std::int64_t>(c & 0x1f) << shift;
      more = (c & 0x20) != 0;
      ++k;
      shift += 5;
      if (!more && (c & 0x10)) x |= ~std::int64_t{0} << shift;
    }
    const std::size_t i = rle.counts.size();
    if (i > 2) x += static_cast<std::int64_t>(rle.counts[i - 2]);
    if (x < 0 || x > static_cast<std::int64_t>(UINT32_MAX)) {
      throw ParseError("", "RLE run " + std::to_string(i) + " out of range");
    }
    rle.counts.push_back(static_cast<std::uint32_t>(x));
  }
  try {
    validate_rle(rle);
  } catch (const InvalidArgument& e) {
    throw ParseError("", e.what());
  }
  return rle;
}

}  // namespace segtk::ingest
