#pragma once

// Data boundary: COCO dataset/results JSON, the compressed RLE string codec,
// polygon rasterization and box-size statistics.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "segtk/evalmap.hpp"
#include "segtk/fusion.hpp"
#include "segtk/mask.hpp"

namespace segtk::ingest {

// Vertices in pixel coordinates; pixel (c, r) covers [c, c+1) x [r, r+1).
using Polygon = std::vector<Point>;

struct ImageInfo {
  std::int64_t id = 0;
  int width = 0;
  int height = 0;
  std::string file_name;
};

struct Segmentation {
  std::vector<Polygon> polygons;  // used when rle is empty
  std::optional<RleMask> rle;
  bool compressed = false;  // rle came as a counts string
};

struct Annotation {
  std::int64_t id = 0;
  std::int64_t image_id = 0;
  std::int64_t category_id = 0;
  Segmentation segmentation;
  double area = 0.0;  // as stored in the file
  BBox bbox;
};

struct DatasetFile {
  std::vector<ImageInfo> images;
  std::vector<Annotation> annotations;
  std::vector<eval::Category> categories;
  // Non-fatal findings such as boxes poking outside their image.
  std::vector<std::string> warnings;
};

// Parsing functions throw ParseError naming a field path (e.g.
// "annotations[3].image_id") or a line/column for JSON syntax errors.
// Unknown fields are ignored.
DatasetFile parse_dataset(std::string_view json_text);
DatasetFile load_dataset(const std::filesystem::path& path);

// Rasterizes or decodes every annotation. Mask area is the pixel count.
std::vector<eval::GroundTruthInstance> to_ground_truth(const DatasetFile& ds);

// Detections get id = position in the file unless an "id" field is present.
std::vector<fusion::Detection> parse_results(std::string_view json_text);
std::vector<fusion::Detection> load_results(const std::filesystem::path& path);
// COCO results array: image_id, category_id, score, bbox and, when a mask is
// present, segmentation {size: [h, w], counts: "<compressed>"}.
std::string format_results(const std::vector<fusion::Detection>& dets);
void write_results(const std::filesystem::path& path,
                   const std::vector<fusion::Detection>& dets);

// COCO compressed RLE strings: LEB128-like, 5 data bits per char offset by
// 48, counts from the fourth on delta-coded against the count two before.
std::string rle_string_encode(const RleMask& rle);
// Throws ParseError on malformed input or counts that do not cover
// width x height.
RleMask rle_string_decode(std::string_view s, int width, int height);

// Even-odd scanline fill, sampling pixel centres. Throws InvalidArgument for
// fewer than 3 vertices.
BinaryMask rasterize_polygon(const Polygon& polygon, int width, int height);
// Union of the individual rasterizations.
BinaryMask rasterize_polygons(const std::vector<Polygon>& polygons, int width,
                              int height);

struct Histogram {
  double bin_width = 0.0;
  std::vector<std::size_t> counts;  // bin i covers [i*w, (i+1)*w) in sqrt-area
  std::size_t total = 0;
};

Histogram size_histogram(const std::vector<BBox>& boxes, double bin_width);
// Lower median of sqrt(w*h). Throws InvalidArgument("empty input").
double median_sqrt_area(const std::vector<BBox>& boxes);
// Columns: bin_start,bin_end,count.
std::string histogram_csv(const Histogram& h);

// Refinement inputs: box-local coarse logit grids to render.
struct CoarseInstance {
  std::int64_t image_id = 0;
  std::int64_t category_id = 0;
  double score = 0.0;
  BBox bbox;
  ScoreField coarse;
  // When set, the rendered mask is pasted into an image of this size;
  // otherwise it stays box-local at the target resolution.
  std::optional<std::pair<int, int>> image_size;  // (width, height)
};

// {"instances": [{"image_id", "category_id", "score", "bbox",
//   "coarse": {"width", "height", "logits": [...]}, "image_size": [h, w]}]}
std::vector<CoarseInstance> load_coarse_instances(const std::filesystem::path& path);
// {"fields": [{"width", "height", "logits": [...]}, ...]}
std::vector<ScoreField> load_fields(const std::filesystem::path& path);

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, std::string_view text);

}  // namespace segtk::ingest
