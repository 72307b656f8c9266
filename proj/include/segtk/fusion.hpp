#pragma once

// Multi-model detection ensembling: per-model weights from validation
// scores, score reweighting, soft-NMS and optional cluster mask voting.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "segtk/mask.hpp"

namespace segtk::fusion {

struct Detection {
  std::int64_t id = 0;  // unique within its source; ordering tie-break
  std::int64_t image_id = 0;
  std::int64_t category_id = 0;
  double score = 0.0;
  BBox bbox;
  std::optional<RleMask> mask;
  std::string source_model;

  friend bool operator==(const Detection&, const Detection&) = default;
};

// Strict total order used everywhere a ranking is needed: higher score
// first, then source_model, then id.
bool ranks_before(const Detection& a, const Detection& b) noexcept;

struct ModelCandidate {
  std::string model_id;
  double validation_score = 0.0;  // mAP in percent
  std::vector<Detection> detections;
};

enum class NmsMethod { kGaussian, kLinear, kHard };
enum class WeightStrategy { kLinearInterpolation, kLinearReweight };

struct SoftNmsConfig {
  NmsMethod method = NmsMethod::kGaussian;
  double sigma = 0.5;
  double iou_threshold = 0.5;
  double score_floor = 0.001;
  bool per_category = true;
  bool use_mask_iou = false;

  void validate() const;
};

struct EnsembleConfig {
  double theta_min = 0.6;
  double theta_max = 1.0;
  WeightStrategy strategy = WeightStrategy::kLinearInterpolation;
  SoftNmsConfig nms;
  bool merge_masks = false;
  double cluster_iou = 0.5;

  void validate() const;
};

// w_i = theta_min + (theta_max - theta_min) (s_i - min S) / (max S - min S).
// When max S == min S every weight is theta_max.
std::vector<double> linear_interpolation_weights(const std::vector<double>& scores,
                                                 double theta_min,
                                                 double theta_max);

// Rank-based even spacing over [theta_min, theta_max]; tied scores share the
// mean of their rank positions. A single model gets theta_max.
std::vector<double> linear_reweight_weights(const std::vector<double>& scores,
                                            double theta_min, double theta_max);

std::vector<double> model_weights(const std::vector<ModelCandidate>& models,
                                  const EnsembleConfig& cfg);

// Scales every detection's score by its model weight (clamped to [0, 1]) and
// pools all detections, tagging each with its model id.
std::vector<Detection> apply_weights(const std::vector<ModelCandidate>& models,
                                     const std::vector<double>& weights);

// Decay factor for an overlap `iou` with an already-kept detection.
double decay_factor(double iou, const SoftNmsConfig& cfg);

// Soft-NMS within each image (and category when per_category). Detections
// scoring below score_floor, or decayed to zero, are dropped. Output is
// ordered by image_id, then ranks_before.
std::vector<Detection> soft_nms(const std::vector<Detection>& dets,
                                const SoftNmsConfig& cfg, int threads = 1);

// Greedy same-category clustering at box IoU >= cluster_iou. Each cluster
// keeps its top detection's box and score; its mask is the score-weighted
// pixel vote of the members, set where the vote exceeds half the total.
// Throws InvalidArgument if a detection has no mask.
std::vector<Detection> cluster_merge_masks(const std::vector<Detection>& dets,
                                           double cluster_iou, int threads = 1);

struct EnsembleResult {
  std::vector<double> weights;
  std::vector<Detection> detections;
};

// weights -> apply_weights -> soft_nms -> optional cluster_merge_masks.
// The output does not depend on `threads` or on model order.
EnsembleResult ensemble(const std::vector<ModelCandidate>& models,
                        const EnsembleConfig& cfg, int threads = 1);

}  // namespace segtk::fusion
