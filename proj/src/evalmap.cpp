#include "segtk/evalmap.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <memory>
#include <set>
#include <string>
#include <utility>

#include "json.hpp"

#include "segtk/error.hpp"
#include "segtk/parallel.hpp"

namespace segtk::eval {
namespace {

using fusion::Detection;

// Area ranges: index 0 is "all", then the three buckets.
constexpr int kAreaRanges = 4;

int range_of(SizeBucket b) {
  switch (b) {
    case SizeBucket::kSmall:
      return 1;
    case SizeBucket::kMedium:
      return 2;
    case SizeBucket::kLarge:
      return 3;
  }
  return 0;
}

bool in_range(int range, double area, const SizeThresholds& t) {
  return range == 0 || range_of(size_bucket(area, t)) == range;
}

struct RankedLabel {
  const Detection* det;
  bool true_positive;
};

// Per (image, category) matching outcome for every (range, threshold).
struct GroupResult {
  std::int64_t category_id = 0;
  // [range][threshold] -> labels of non-ignored detections.
  std::vector<std::vector<std::vector<RankedLabel>>> labels;
  // [range] -> non-ignored ground-truth count.
  std::vector<std::size_t> n_gt;
};

struct Group {
  std::int64_t image_id = 0;
  std::int64_t category_id = 0;
  std::vector<const GroundTruthInstance*> gts;
  std::vector<const Detection*> dets;
};

double gt_area(const GroundTruthInstance& g, const EvalConfig& cfg) {
  return cfg.bucket_by == AreaSource::kMask ? g.area : g.bbox.area();
}

double det_area(const Detection& d, const EvalConfig& cfg) {
  if (cfg.bucket_by == AreaSource::kMask && d.mask) {
    return static_cast<double>(rle_area(*d.mask));
  }
  return d.bbox.area();
}

IouMatrix compute_ious(const Group& g, const EvalConfig& cfg) {
  IouMatrix m{g.dets.size(), g.gts.size(), {}};
  m.values.resize(m.rows * m.cols);
  for (std::size_t d = 0; d < m.rows; ++d) {
    for (std::size_t k = 0; k < m.cols; ++k) {
      m.values[d * m.cols + k] =
          cfg.iou_on == IouType::kMask
              ? rle_iou(*g.dets[d]->mask, g.gts[k]->mask)
              : box_iou(g.dets[d]->bbox, g.gts[k]->bbox);
    }
  }
  return m;
}

GroupResult evaluate_group(const Group& g, const EvalConfig& cfg) {
  GroupResult r;
  r.category_id = g.category_id;
  const std::size_t n_thr = cfg.iou_thresholds.size();
  r.labels.assign(kAreaRanges, std::vector<std::vector<RankedLabel>>(n_thr));
  r.n_gt.assign(kAreaRanges, 0);

  const IouMatrix ious = compute_ious(g, cfg);
  std::vector<double> det_areas;
  for (const Detection* d : g.dets) det_areas.push_back(det_area(*d, cfg));

  for (int range = 0; range < kAreaRanges; ++range) {
    auto ignored = std::make_unique<bool[]>(g.gts.size());
    for (std::size_t k = 0; k < g.gts.size(); ++k) {
      ignored[k] = !in_range(range, gt_area(*g.gts[k], cfg), cfg.buckets);
      if (!ignored[k]) ++r.n_gt[range];
    }
    const std::span<const bool> ignored_span(ignored.get(), g.gts.size());

    for (std::size_t t = 0; t < n_thr; ++t) {
      const auto match = match_detections(ious, cfg.iou_thresholds[t], ignored_span);
      auto& out = r.labels[range][t];
      for (std::size_t d = 0; d < g.dets.size(); ++d) {
        if (match[d] >= 0) {
          if (!ignored_span[static_cast<std::size_t>(match[d])]) {
            out.push_back({g.dets[d], true});
          }
        } else if (in_range(range, det_areas[d], cfg.buckets)) {
          out.push_back({g.dets[d], false});
        }
      }
    }
  }
  return r;
}

double mean_defined(const std::vector<double>& v) {
  double sum = 0.0;
  std::size_t n = 0;
  for (const double x : v) {
    if (x >= 0.0) {
      sum += x;
      ++n;
    }
  }
  return n == 0 ? -1.0 : sum / static_cast<double>(n);
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

}  // namespace

std::vector<double> EvalConfig::default_iou_thresholds() {
  std::vector<double> t;
  for (int i = 0; i < 10; ++i) t.push_back(static_cast<double>(50 + 5 * i) / 100.0);
  return t;
}

void EvalConfig::validate() const {
  if (iou_thresholds.empty()) throw InvalidArgument("no IoU thresholds");
  for (std::size_t i = 0; i < iou_thresholds.size(); ++i) {
    const double t = iou_thresholds[i];
    if (!(t > 0.0 && t <= 1.0)) {
      throw InvalidArgument("IoU threshold " + std::to_string(t) +
                            " outside (0, 1]");
    }
    if (i > 0 && !(t > iou_thresholds[i - 1])) {
      throw InvalidArgument("IoU thresholds must be strictly increasing");
    }
  }
  if (recall_points < 2) throw InvalidArgument("recall_points must be >= 2");
  if (max_detections < 1) throw InvalidArgument("max_detections must be >= 1");
  if (!(buckets.small_side >= 0.0 && buckets.small_side <= buckets.large_side)) {
    throw InvalidArgument("bucket thresholds must satisfy 0 <= small <= large");
  }
}

std::vector<int> match_detections(const IouMatrix& ious, double threshold,
                                  std::span<const bool> gt_ignored) {
  if (!gt_ignored.empty() && gt_ignored.size() != ious.cols) {
    throw InvalidArgument("match_detections: ignore flags do not match columns");
  }
  auto is_ignored = [&](std::size_t g) {
    return !gt_ignored.empty() && gt_ignored[g];
  };
  std::vector<int> match(ious.rows, -1);
  std::vector<char> taken(ious.cols, 0);
  for (std::size_t d = 0; d < ious.rows; ++d) {
    // Two passes: regular ground truth first, ignored ground truth only when
    // nothing regular qualifies.
    for (const bool want_ignored : {false, true}) {
      int best = -1;
      double best_iou = threshold;
      for (std::size_t g = 0; g < ious.cols; ++g) {
        if (taken[g] || is_ignored(g) != want_ignored) continue;
        const double v = ious.at(d, g);
        if (v < best_iou || (best >= 0 && v == best_iou)) continue;
        best = static_cast<int>(g);
        best_iou = v;
      }
      if (best >= 0) {
        match[d] = best;
        taken[static_cast<std::size_t>(best)] = 1;
        break;
      }
    }
  }
  return match;
}

double average_precision(std::span<const LabeledScore> labels, std::size_t n_gt,
                         int recall_points) {
  if (n_gt == 0) return -1.0;
  if (recall_points < 2) throw InvalidArgument("recall_points must be >= 2");
  std::vector<LabeledScore> ranked(labels.begin(), labels.end());
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const LabeledScore& a, const LabeledScore& b) {
                     return a.score > b.score;
                   });
  const std::size_t n = ranked.size();
  std::vector<std::size_t> tp(n);
  std::vector<double> precision(n);
  std::size_t tps = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (ranked[i].true_positive) ++tps;
    tp[i] = tps;
    precision[i] = static_cast<double>(tps) / static_cast<double>(i + 1);
  }
  // Make precision non-increasing from the right: p~(r) = max_{r' >= r} p(r').
  for (std::size_t i = n; i-- > 1;) {
    precision[i - 1] = std::max(precision[i - 1], precision[i]);
  }
  const std::size_t steps = static_cast<std::size_t>(recall_points - 1);
  double sum = 0.0;
  std::size_t pos = 0;
  for (std::size_t r = 0; r <= steps; ++r) {
    // First rank whose recall tp/n_gt reaches r/steps, compared exactly.
    while (pos < n && tp[pos] * steps < r * n_gt) ++pos;
    if (pos == n) break;
    sum += precision[pos];
  }
  return sum / static_cast<double>(recall_points);
}

MetricReport evaluate(const std::vector<GroundTruthInstance>& gts,
                      const std::vector<Detection>& dets, const EvalConfig& cfg,
                      const std::vector<Category>& categories, int threads) {
  cfg.validate();

  std::map<std::int64_t, std::pair<int, int>> image_dims;
  for (const auto& g : gts) {
    try {
      validate_rle(g.mask);
    } catch (const InvalidArgument& e) {
      throw InvalidArgument("ground truth " + std::to_string(g.id) + ": " +
                            e.what());
    }
    auto [it, fresh] = image_dims.emplace(g.image_id,
                                          std::pair{g.mask.width, g.mask.height});
    if (!fresh && it->second != std::pair{g.mask.width, g.mask.height}) {
      throw InvalidArgument("ground truth masks of image " +
                            std::to_string(g.image_id) + " differ in size");
    }
  }
  std::set<std::int64_t> det_ids;
  for (const auto& d : dets) {
    if (!det_ids.insert(d.id).second) {
      throw InvalidArgument("duplicate detection id " + std::to_string(d.id));
    }
    if (!d.mask) {
      if (cfg.iou_on == IouType::kMask) {
        throw InvalidArgument("detection " + std::to_string(d.id) +
                              " has no mask");
      }
      continue;
    }
    try {
      validate_rle(*d.mask);
    } catch (const InvalidArgument& e) {
      throw InvalidArgument("detection " + std::to_string(d.id) + ": " + e.what());
    }
    const auto it = image_dims.find(d.image_id);
    if (it != image_dims.end() &&
        it->second != std::pair{d.mask->width, d.mask->height}) {
      throw InvalidArgument("detection " + std::to_string(d.id) + " mask is " +
                            std::to_string(d.mask->width) + "x" +
                            std::to_string(d.mask->height) + " but image " +
                            std::to_string(d.image_id) + " is " +
                            std::to_string(it->second.first) + "x" +
                            std::to_string(it->second.second));
    }
  }

  std::map<std::pair<std::int64_t, std::int64_t>, Group> grouped;
  for (const auto& g : gts) {
    auto& grp = grouped[{g.image_id, g.category_id}];
    grp.image_id = g.image_id;
    grp.category_id = g.category_id;
    grp.gts.push_back(&g);
  }
  for (const auto& d : dets) {
    auto& grp = grouped[{d.image_id, d.category_id}];
    grp.image_id = d.image_id;
    grp.category_id = d.category_id;
    grp.dets.push_back(&d);
  }
  std::vector<Group> groups;
  groups.reserve(grouped.size());
  for (auto& [key, grp] : grouped) {
    std::sort(grp.dets.begin(), grp.dets.end(),
              [](const Detection* a, const Detection* b) {
                return fusion::ranks_before(*a, *b);
              });
    if (grp.dets.size() > static_cast<std::size_t>(cfg.max_detections)) {
      grp.dets.resize(static_cast<std::size_t>(cfg.max_detections));
    }
    groups.push_back(std::move(grp));
  }

  std::vector<GroupResult> results(groups.size());
  parallel_for(groups.size(), threads,
               [&](std::size_t i) { results[i] = evaluate_group(groups[i], cfg); });

  // Accumulate per category, in ascending category id.
  const std::size_t n_thr = cfg.iou_thresholds.size();
  struct Accum {
    std::vector<std::vector<std::vector<RankedLabel>>> labels;
    std::vector<std::size_t> n_gt;
  };
  std::map<std::int64_t, Accum> per_cat;
  for (const auto& r : results) {
    auto& acc = per_cat[r.category_id];
    if (acc.labels.empty()) {
      acc.labels.assign(kAreaRanges, std::vector<std::vector<RankedLabel>>(n_thr));
      acc.n_gt.assign(kAreaRanges, 0);
    }
    for (int a = 0; a < kAreaRanges; ++a) {
      acc.n_gt[a] += r.n_gt[a];
      for (std::size_t t = 0; t < n_thr; ++t) {
        auto& dst = acc.labels[a][t];
        dst.insert(dst.end(), r.labels[a][t].begin(), r.labels[a][t].end());
      }
    }
  }

  std::map<std::int64_t, std::string> names;
  for (const auto& c : categories) names[c.id] = c.name;

  const auto find_threshold = [&](double v) -> int {
    for (std::size_t t = 0; t < n_thr; ++t) {
      if (std::abs(cfg.iou_thresholds[t] - v) < 1e-12) return static_cast<int>(t);
    }
    return -1;
  };
  const int t50 = find_threshold(0.5);
  const int t75 = find_threshold(0.75);

  MetricReport report;
  std::vector<std::vector<double>> range_aps(kAreaRanges);
  std::vector<double> ap50s, ap75s;
  for (auto& [cat, acc] : per_cat) {
    std::vector<double> ap_all(n_thr, -1.0);
    for (int a = 0; a < kAreaRanges; ++a) {
      for (std::size_t t = 0; t < n_thr; ++t) {
        auto& labels = acc.labels[a][t];
        std::sort(labels.begin(), labels.end(),
                  [](const RankedLabel& x, const RankedLabel& y) {
                    return fusion::ranks_before(*x.det, *y.det);
                  });
        std::vector<LabeledScore> scored;
        scored.reserve(labels.size());
        for (const auto& l : labels) scored.push_back({l.det->score, l.true_positive});
        const double ap = average_precision(scored, acc.n_gt[a], cfg.recall_points);
        range_aps[a].push_back(ap);
        if (a == 0) ap_all[t] = ap;
      }
    }
    if (acc.n_gt[0] == 0) {
      report.excluded_categories.push_back(cat);
      continue;
    }
    CategoryReport cr;
    cr.category_id = cat;
    cr.name = names.count(cat) ? names[cat] : "";
    cr.n_gt = acc.n_gt[0];
    cr.ap = mean_defined(ap_all);
    cr.ap50 = t50 >= 0 ? ap_all[static_cast<std::size_t>(t50)] : -1.0;
    cr.ap75 = t75 >= 0 ? ap_all[static_cast<std::size_t>(t75)] : -1.0;
    ap50s.push_back(cr.ap50);
    ap75s.push_back(cr.ap75);
    report.per_category.push_back(std::move(cr));
  }
  for (const auto& c : categories) {
    if (!per_cat.count(c.id)) report.excluded_categories.push_back(c.id);
  }
  std::sort(report.excluded_categories.begin(), report.excluded_categories.end());

  report.mAP = mean_defined(range_aps[0]);
  report.AP50 = mean_defined(ap50s);
  report.AP75 = mean_defined(ap75s);
  report.APs = mean_defined(range_aps[1]);
  report.APm = mean_defined(range_aps[2]);
  report.APl = mean_defined(range_aps[3]);
  report.n_images = 0;
  {
    std::set<std::int64_t> images;
    for (const auto& g : gts) images.insert(g.image_id);
    for (const auto& d : dets) images.insert(d.image_id);
    report.n_images = images.size();
  }
  report.n_ground_truth = gts.size();
  report.n_detections = dets.size();
  return report;
}

std::string format_report_text(const MetricReport& r) {
  std::string s;
  s += "mAP=" + fmt(r.mAP) + "\n";
  s += "AP50=" + fmt(r.AP50) + "\n";
  s += "AP75=" + fmt(r.AP75) + "\n";
  s += "APs=" + fmt(r.APs) + "\n";
  s += "APm=" + fmt(r.APm) + "\n";
  s += "APl=" + fmt(r.APl) + "\n";
  s += "images=" + std::to_string(r.n_images) + "\n";
  s += "ground_truth=" + std::to_string(r.n_ground_truth) + "\n";
  s += "detections=" + std::to_string(r.n_detections) + "\n";
  for (const auto& c : r.per_category) {
    const std::string key = "category." + std::to_string(c.category_id);
    if (!c.name.empty()) s += key + ".name=" + c.name + "\n";
    s += key + ".n_gt=" + std::to_string(c.n_gt) + "\n";
    s += key + ".AP=" + fmt(c.ap) + "\n";
    s += key + ".AP50=" + fmt(c.ap50) + "\n";
    s += key + ".AP75=" + fmt(c.ap75) + "\n";
  }
  std::string excluded;
  for (std::size_t i = 0; i < r.excluded_categories.size(); ++i) {
    if (i) excluded += ",";
    excluded += std::to_string(r.excluded_categories[i]);
  }
  s += "excluded_categories=" + excluded + "\n";
  return s;
}

std::string format_report_json(const MetricReport& r) {
  nlohmann::ordered_json j;
  j["mAP"] = r.mAP;
  j["AP50"] = r.AP50;
  j["AP75"] = r.AP75;
  j["APs"] = r.APs;
  j["APm"] = r.APm;
  j["APl"] = r.APl;
  j["images"] = r.n_images;
  j["ground_truth"] = r.n_ground_truth;
  j["detections"] = r.n_detections;
  auto& cats = j["per_category"] = nlohmann::ordered_json::array();
  for (const auto& c : r.per_category) {
    cats.push_back({{"category_id", c.category_id},
                    {"name", c.name},
                    {"n_gt", c.n_gt},
                    {"AP", c.ap},
                    {"AP50", c.ap50},
                    {"AP75", c.ap75}});
  }
  j["excluded_categories"] = r.excluded_categories;
  return j.dump(2) + "\n";
}

}  // namespace segtk::eval
