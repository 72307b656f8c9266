#include "segtk/fusion.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <set>
#include <string>
#include <utility>

#include "segtk/error.hpp"
#include "segtk/parallel.hpp"

namespace segtk::fusion {
namespace {

void check_scores(const std::vector<double>& scores, double theta_min,
                  double theta_max) {
  if (scores.empty()) throw InvalidArgument("weights: empty score list");
  for (const double s : scores) {
    if (!std::isfinite(s)) throw InvalidArgument("weights: non-finite score");
  }
  if (!(theta_min <= theta_max)) {
    throw InvalidArgument("weights: theta_min must not exceed theta_max");
  }
}

// Splits detections into groups keyed by (image, category) or by image only,
// in ascending key order.
std::vector<std::vector<Detection>> group_by(const std::vector<Detection>& dets,
                                             bool per_category) {
  std::map<std::pair<std::int64_t, std::int64_t>, std::vector<Detection>> groups;
  for (const Detection& d : dets) {
    groups[{d.image_id, per_category ? d.category_id : 0}].push_back(d);
  }
  std::vector<std::vector<Detection>> out;
  out.reserve(groups.size());
  for (auto& [key, group] : groups) out.push_back(std::move(group));
  return out;
}

void sort_output(std::vector<Detection>& dets) {
  std::sort(dets.begin(), dets.end(), [](const Detection& a, const Detection& b) {
    if (a.image_id != b.image_id) return a.image_id < b.image_id;
    return ranks_before(a, b);
  });
}

double overlap(const Detection& a, const Detection& b, bool use_mask) {
  if (!use_mask) return box_iou(a.bbox, b.bbox);
  if (!a.mask || !b.mask) {
    throw InvalidArgument("soft_nms: mask IoU requested but detection " +
                          std::to_string(a.mask ? b.id : a.id) +
                          " has no mask");
  }
  return rle_iou(*a.mask, *b.mask);
}

std::vector<Detection> soft_nms_group(std::vector<Detection> work,
                                      const SoftNmsConfig& cfg) {
  std::erase_if(work, [&](const Detection& d) { return d.score < cfg.score_floor; });
  std::vector<Detection> kept;
  kept.reserve(work.size());
  while (!work.empty()) {
    auto best = std::min_element(work.begin(), work.end(), ranks_before);
    kept.push_back(std::move(*best));
    work.erase(best);
    const Detection& top = kept.back();
    std::vector<Detection> survivors;
    survivors.reserve(work.size());
    for (Detection& d : work) {
      const double f = decay_factor(overlap(top, d, cfg.use_mask_iou), cfg);
      d.score *= f;
      if (f > 0.0 && d.score >= cfg.score_floor) survivors.push_back(std::move(d));
    }
    work = std::move(survivors);
  }
  return kept;
}

Detection merge_cluster(const std::vector<const Detection*>& members) {
  Detection out = *members.front();
  if (members.size() == 1) return out;
  const RleMask& ref = *out.mask;
  const std::size_t n = static_cast<std::size_t>(ref.width) * ref.height;
  std::vector<double> vote(n, 0.0);
  double total = 0.0;
  for (const Detection* m : members) {
    if (m->mask->width != ref.width || m->mask->height != ref.height) {
      throw InvalidArgument("cluster_merge_masks: mask size mismatch in image " +
                            std::to_string(out.image_id));
    }
    const BinaryMask bits = rle_decode(*m->mask);
    const auto raw = bits.bits();
    for (std::size_t i = 0; i < n; ++i) {
      if (raw[i]) vote[i] += m->score;
    }
    total += m->score;
  }
  if (total <= 0.0) return out;
  BinaryMask merged(ref.width, ref.height);
  for (int y = 0; y < ref.height; ++y) {
    for (int x = 0; x < ref.width; ++x) {
      if (vote[merged.index(x, y)] > 0.5 * total) merged.set(x, y, true);
    }
  }
  out.mask = rle_encode(merged);
  return out;
}

std::vector<Detection> cluster_group(std::vector<Detection> dets,
                                     double cluster_iou) {
  std::sort(dets.begin(), dets.end(), ranks_before);
  std::vector<std::vector<const Detection*>> clusters;
  for (const Detection& d : dets) {
    bool joined = false;
    for (auto& c : clusters) {
      const Detection& rep = *c.front();
      if (rep.category_id == d.category_id &&
          box_iou(rep.bbox, d.bbox) >= cluster_iou) {
        c.push_back(&d);
        joined = true;
        break;
      }
    }
    if (!joined) clusters.push_back({&d});
  }
  std::vector<Detection> out;
  out.reserve(clusters.size());
  for (const auto& c : clusters) out.push_back(merge_cluster(c));
  return out;
}

}  // namespace

bool ranks_before(const Detection& a, const Detection& b) noexcept {
  if (a.score != b.score) return a.score > b.score;
  if (a.source_model != b.source_model) return a.source_model < b.source_model;
  return a.id < b.id;
}

void SoftNmsConfig::validate() const {
  if (method == NmsMethod::kGaussian && !(sigma > 0.0)) {
    throw InvalidArgument("soft-NMS sigma must be > 0");
  }
  if (!(iou_threshold >= 0.0 && iou_threshold <= 1.0)) {
    throw InvalidArgument("soft-NMS iou_threshold must lie in [0, 1]");
  }
  if (std::isnan(score_floor)) throw InvalidArgument("score_floor is NaN");
}

void EnsembleConfig::validate() const {
  if (!(theta_min <= theta_max)) {
    throw InvalidArgument("theta_min must not exceed theta_max");
  }
  if (!(cluster_iou >= 0.0 && cluster_iou <= 1.0)) {
    throw InvalidArgument("cluster_iou must lie in [0, 1]");
  }
  nms.validate();
}

std::vector<double> linear_interpolation_weights(const std::vector<double>& scores,
                                                 double theta_min,
                                                 double theta_max) {
  check_scores(scores, theta_min, theta_max);
  const auto [lo_it, hi_it] = std::minmax_element(scores.begin(), scores.end());
  const double lo = *lo_it;
  const double hi = *hi_it;
  std::vector<double> w(scores.size(), theta_max);
  if (hi == lo) return w;
  const double slope = (theta_max - theta_min) / (hi - lo);
  for (std::size_t i = 0; i < scores.size(); ++i) {
    w[i] = theta_min + slope * (scores[i] - lo);
  }
  // Pin the endpoints; the affine expression can land an ulp off at max S.
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (scores[i] == lo) w[i] = theta_min;
    if (scores[i] == hi) w[i] = theta_max;
  }
  return w;
}

std::vector<double> linear_reweight_weights(const std::vector<double>& scores,
                                            double theta_min, double theta_max) {
  check_scores(scores, theta_min, theta_max);
  const std::size_t n = scores.size();
  if (n == 1) return {theta_max};
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  std::vector<double> w(n);
  const double step = (theta_max - theta_min) / static_cast<double>(n - 1);
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j + 1 < n && scores[order[j + 1]] == scores[order[i]]) ++j;
    const double mean_rank = 0.5 * static_cast<double>(i + j);
    for (std::size_t k = i; k <= j; ++k) {
      w[order[k]] = theta_min + step * mean_rank;
    }
    i = j + 1;
  }
  return w;
}

std::vector<double> model_weights(const std::vector<ModelCandidate>& models,
                                  const EnsembleConfig& cfg) {
  std::vector<double> scores;
  scores.reserve(models.size());
  for (const auto& m : models) scores.push_back(m.validation_score);
  switch (cfg.strategy) {
    case WeightStrategy::kLinearInterpolation:
      return linear_interpolation_weights(scores, cfg.theta_min, cfg.theta_max);
    case WeightStrategy::kLinearReweight:
      return linear_reweight_weights(scores, cfg.theta_min, cfg.theta_max);
  }
  throw InvalidArgument("unknown weight strategy");
}

std::vector<Detection> apply_weights(const std::vector<ModelCandidate>& models,
                                     const std::vector<double>& weights) {
  if (models.size() != weights.size()) {
    throw InvalidArgument("apply_weights: " + std::to_string(models.size()) +
                          " models but " + std::to_string(weights.size()) +
                          " weights");
  }
  std::vector<Detection> pooled;
  for (std::size_t m = 0; m < models.size(); ++m) {
    for (Detection d : models[m].detections) {
      d.score = std::clamp(d.score * weights[m], 0.0, 1.0);
      d.source_model = models[m].model_id;
      pooled.push_back(std::move(d));
    }
  }
  return pooled;
}

double decay_factor(double iou, const SoftNmsConfig& cfg) {
  switch (cfg.method) {
    case NmsMethod::kGaussian:
      return std::exp(-(iou * iou) / cfg.sigma);
    case NmsMethod::kLinear:
      return iou > cfg.iou_threshold ? 1.0 - iou : 1.0;
    case NmsMethod::kHard:
      return iou > cfg.iou_threshold ? 0.0 : 1.0;
  }
  return 1.0;
}

std::vector<Detection> soft_nms(const std::vector<Detection>& dets,
                                const SoftNmsConfig& cfg, int threads) {
  cfg.validate();
  auto groups = group_by(dets, cfg.per_category);
  std::vector<std::vector<Detection>> kept(groups.size());
  parallel_for(groups.size(), threads, [&](std::size_t g) {
    kept[g] = soft_nms_group(std::move(groups[g]), cfg);
  });
  std::vector<Detection> out;
  for (auto& k : kept) {
    out.insert(out.end(), std::make_move_iterator(k.begin()),
               std::make_move_iterator(k.end()));
  }
  sort_output(out);
  return out;
}

std::vector<Detection> cluster_merge_masks(const std::vector<Detection>& dets,
                                           double cluster_iou, int threads) {
  for (const Detection& d : dets) {
    if (!d.mask) {
      throw InvalidArgument("cluster_merge_masks: detection " +
                            std::to_string(d.id) + " in image " +
                            std::to_string(d.image_id) + " has no mask");
    }
  }
  auto groups = group_by(dets, /*per_category=*/false);
  std::vector<std::vector<Detection>> merged(groups.size());
  parallel_for(groups.size(), threads, [&](std::size_t g) {
    merged[g] = cluster_group(std::move(groups[g]), cluster_iou);
  });
  std::vector<Detection> out;
  for (auto& m : merged) {
    out.insert(out.end(), std::make_move_iterator(m.begin()),
               std::make_move_iterator(m.end()));
  }
  sort_output(out);
  return out;
}

EnsembleResult ensemble(const std::vector<ModelCandidate>& models,
                        const EnsembleConfig& cfg, int threads) {
  if (models.empty()) throw InvalidArgument("ensemble: no models");
  cfg.validate();
  std::set<std::string> ids;
  for (const auto& m : models) {
    if (!ids.insert(m.model_id).second) {
      throw InvalidArgument("ensemble: duplicate model id '" + m.model_id + "'");
    }
  }
  EnsembleResult result;
  result.weights = model_weights(models, cfg);
  result.detections =
      soft_nms(apply_weights(models, result.weights), cfg.nms, threads);
  if (cfg.merge_masks) {
    result.detections =
        cluster_merge_masks(result.detections, cfg.cluster_iou, threads);
  }
  return result;
}

}  // namespace segtk::fusion
