#pragma once

// COCO-style mask/box average precision with configurable size buckets.
//
// AP per (category, IoU threshold) uses 101-point interpolated precision.
// Size-bucketed APs follow COCO ignore semantics: ground truth outside the
// bucket is ignored, detections matched to ignored ground truth are ignored,
// and unmatched detections are kept only when their own area falls in the
// bucket. There is no crowd handling.

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "segtk/fusion.hpp"
#include "segtk/mask.hpp"

namespace segtk::eval {

struct GroundTruthInstance {
  std::int64_t id = 0;
  std::int64_t image_id = 0;
  std::int64_t category_id = 0;
  RleMask mask;
  double area = 0.0;  // foreground pixel count of `mask`
  BBox bbox;
};

struct Category {
  std::int64_t id = 0;
  std::string name;
};

enum class IouType { kMask, kBox };
enum class AreaSource { kMask, kBox };

struct EvalConfig {
  std::vector<double> iou_thresholds = default_iou_thresholds();
  int recall_points = 101;
  SizeThresholds buckets;
  int max_detections = 100;  // per image and category, like COCO
  IouType iou_on = IouType::kMask;
  AreaSource bucket_by = AreaSource::kMask;

  // 0.50, 0.55, ..., 0.95
  static std::vector<double> default_iou_thresholds();
  void validate() const;
};

// Detections x ground truths, row-major.
struct IouMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> values;

  double at(std::size_t d, std::size_t g) const { return values[d * cols + g]; }
};

// Greedy matching. Rows must already be in descending score order. Each
// detection takes the unmatched ground truth with the highest IoU >=
// threshold (lowest index on ties); non-ignored ground truth is preferred
// over ignored ground truth. Returns the matched column per row or -1.
std::vector<int> match_detections(const IouMatrix& ious, double threshold,
                                  std::span<const bool> gt_ignored = {});

struct LabeledScore {
  double score = 0.0;
  bool true_positive = false;
};

// Interpolated AP over `recall_points` evenly spaced recall levels. Labels
// are ranked by descending score; equal scores keep their input order.
// Returns -1 when n_gt == 0.
double average_precision(std::span<const LabeledScore> labels, std::size_t n_gt,
                         int recall_points = 101);

struct CategoryReport {
  std::int64_t category_id = 0;
  std::string name;
  std::size_t n_gt = 0;
  double ap = -1.0;
  double ap50 = -1.0;
  double ap75 = -1.0;
};

// Every metric lies in [0, 1] or is -1 when undefined.
struct MetricReport {
  double mAP = -1.0;
  double AP50 = -1.0;
  double AP75 = -1.0;
  double APs = -1.0;
  double APm = -1.0;
  double APl = -1.0;
  std::vector<CategoryReport> per_category;
  // Categories seen in `categories` or in detections but without ground truth.
  std::vector<std::int64_t> excluded_categories;
  std::size_t n_images = 0;
  std::size_t n_ground_truth = 0;
  std::size_t n_detections = 0;
};

// Throws InvalidArgument on duplicate detection ids, invalid masks or
// mask sizes that disagree with the image's ground truth.
MetricReport evaluate(const std::vector<GroundTruthInstance>& gts,
                      const std::vector<fusion::Detection>& dets,
                      const EvalConfig& cfg,
                      const std::vector<Category>& categories = {},
                      int threads = 1);

// One `key=value` per line.
std::string format_report_text(const MetricReport& report);
std::string format_report_json(const MetricReport& report);

}  // namespace segtk::eval
