#include <gtest/gtest.h>

#include <random>

#include "json.hpp"
#include "oracle/ap_oracle.hpp"
#include "segtk/error.hpp"
#include "segtk/evalmap.hpp"
#include "support/scenarios.hpp"

namespace segtk::eval {
namespace {

using fusion::Detection;

TEST(AveragePrecision, HandComputed) {
  // Perfect ranking.
  const std::vector<LabeledScore> perfect = {{0.9, true}, {0.8, true}};
  EXPECT_EQ(average_precision(perfect, 2), 1.0);
  // FP first, then the only TP: precision 1/2 at every recall level.
  const std::vector<LabeledScore> late = {{0.9, false}, {0.8, true}};
  EXPECT_DOUBLE_EQ(average_precision(late, 1), 0.5);
  // Half the ground truth found: recall levels 0..0.5 -> 51 of 101 points.
  const std::vector<LabeledScore> half = {{0.9, true}};
  EXPECT_DOUBLE_EQ(average_precision(half, 2), 51.0 / 101.0);
  EXPECT_EQ(average_precision({}, 3), 0.0);
  EXPECT_EQ(average_precision(perfect, 0), -1.0);
}

TEST(AveragePrecision, EqualScoresKeepInputOrder) {
  const std::vector<LabeledScore> a = {{0.5, true}, {0.5, false}};
  const std::vector<LabeledScore> b = {{0.5, false}, {0.5, true}};
  EXPECT_EQ(average_precision(a, 1), 1.0);
  EXPECT_DOUBLE_EQ(average_precision(b, 1), 0.5);
}

TEST(Matching, HighestIouThenLowestIndex) {
  IouMatrix m{2, 3, {0.6, 0.8, 0.8,
                     0.9, 0.7, 0.4}};
  EXPECT_EQ(match_detections(m, 0.5), (std::vector<int>{1, 0}));
  EXPECT_EQ(match_detections(m, 0.85), (std::vector<int>{-1, 0}));
}

TEST(Matching, PrefersRegularGroundTruth) {
  IouMatrix m{1, 2, {0.9, 0.6}};
  const bool ignored[] = {true, false};
  EXPECT_EQ(match_detections(m, 0.5, ignored), std::vector<int>{1});
  const bool both[] = {true, true};
  EXPECT_EQ(match_detections(m, 0.5, both), std::vector<int>{0});
  const bool wrong[] = {true};
  EXPECT_THROW(match_detections(m, 0.5, wrong), InvalidArgument);
}

TEST(Evaluate, ResultsEqualGroundTruthScoreOne) {
  const auto gts = scenarios::ensemble_ground_truth();
  std::vector<oracle::Det> dets;
  for (const auto& g : gts) dets.push_back({g.image_id, g.image_id, 1, 0.9, g.mask});
  const auto r = evaluate(scenarios::to_segtk(gts), scenarios::to_segtk(dets), EvalConfig{});
  EXPECT_EQ(r.mAP, 1.0);
  EXPECT_EQ(r.AP50, 1.0);
  EXPECT_EQ(r.AP75, 1.0);
  // 36-pixel objects are small at the default thresholds.
  EXPECT_EQ(r.APs, 1.0);
  EXPECT_EQ(r.APm, -1.0);
  EXPECT_EQ(r.APl, -1.0);
  EXPECT_EQ(r.n_images, 3u);
  EXPECT_EQ(r.n_ground_truth, 3u);
  EXPECT_EQ(r.n_detections, 3u);
}

TEST(Evaluate, CategoriesWithoutGroundTruthAreExcluded) {
  const auto gts = scenarios::to_segtk(scenarios::ensemble_ground_truth());
  auto dets = scenarios::to_segtk(scenarios::ensemble_model(0));
  dets[0].category_id = 7;  // the false positive moves to an unseen category
  const auto r = evaluate(gts, dets, EvalConfig{}, {{1, "chair"}, {2, "table"}, {7, "lamp"}});
  EXPECT_EQ(r.excluded_categories, (std::vector<std::int64_t>{2, 7}));
  ASSERT_EQ(r.per_category.size(), 1u);
  EXPECT_EQ(r.per_category[0].name, "chair");
  // Without the false positive category 1 is found at 2/3 recall with precision 1.
  EXPECT_DOUBLE_EQ(r.mAP, 67.0 / 101.0);
}

TEST(Evaluate, MaxDetectionsPerImageAndCategory) {
  const auto gts = scenarios::ensemble_ground_truth();
  std::vector<oracle::Det> dets;
  std::int64_t id = 0;
  for (int img = 1; img <= 3; ++img) {
    dets.push_back({++id, img, 1, 0.9, scenarios::ensemble_false_positive()});
    dets.push_back({++id, img, 1, 0.5, scenarios::ensemble_object()});
  }
  EvalConfig cfg;
  cfg.max_detections = 1;
  EXPECT_EQ(evaluate(scenarios::to_segtk(gts), scenarios::to_segtk(dets), cfg).mAP, 0.0);
  cfg.max_detections = 2;
  EXPECT_GT(evaluate(scenarios::to_segtk(gts), scenarios::to_segtk(dets), cfg).mAP, 0.0);
}

TEST(Evaluate, BucketsByMaskOrBoxArea) {
  // A thin diagonal object: mask area 8, box area 64.
  oracle::Bitmap diag{8, 8, std::vector<std::uint8_t>(64)};
  for (int i = 0; i < 8; ++i) diag.px[i * 8 + i] = 1;
  const std::vector<oracle::Gt> gts = {{1, 1, diag}};
  const std::vector<oracle::Det> dets = {{1, 1, 1, 0.9, diag}};
  EvalConfig cfg;
  cfg.buckets = {3.0, 5.0};
  auto r = evaluate(scenarios::to_segtk(gts), scenarios::to_segtk(dets), cfg);
  EXPECT_EQ(r.APs, 1.0);
  EXPECT_EQ(r.APl, -1.0);
  cfg.bucket_by = AreaSource::kBox;
  r = evaluate(scenarios::to_segtk(gts), scenarios::to_segtk(dets), cfg);
  EXPECT_EQ(r.APs, -1.0);
  EXPECT_EQ(r.APl, 1.0);
}

TEST(Evaluate, BoxIouMode) {
  const auto gts = scenarios::to_segtk(scenarios::ensemble_ground_truth());
  auto dets = scenarios::to_segtk(scenarios::ensemble_model(0));
  for (auto& d : dets) d.mask.reset();
  EvalConfig cfg;
  cfg.iou_on = IouType::kBox;
  cfg.bucket_by = AreaSource::kBox;
  EXPECT_NEAR(evaluate(gts, dets, cfg).mAP, 67.0 * (2.0 / 3.0) / 101.0, 1e-12);
  cfg.iou_on = IouType::kMask;
  EXPECT_THROW(evaluate(gts, dets, cfg), InvalidArgument);
}

TEST(Evaluate, InputErrors) {
  const auto gts = scenarios::to_segtk(scenarios::ensemble_ground_truth());
  auto dets = scenarios::to_segtk(scenarios::ensemble_model(0));
  auto dup = dets;
  dup[1].id = dup[0].id;
  EXPECT_THROW(evaluate(gts, dup, EvalConfig{}), InvalidArgument);
  auto wrong_size = dets;
  wrong_size[0].mask = rle_encode(BinaryMask(4, 4));
  EXPECT_THROW(evaluate(gts, wrong_size, EvalConfig{}), InvalidArgument);
  auto broken = dets;
  broken[0].mask->counts = {3};
  EXPECT_THROW(evaluate(gts, broken, EvalConfig{}), InvalidArgument);
  EvalConfig cfg;
  cfg.iou_thresholds = {0.5, 0.5};
  EXPECT_THROW(evaluate(gts, dets, cfg), InvalidArgument);
  cfg = {};
  cfg.max_detections = 0;
  EXPECT_THROW(evaluate(gts, dets, cfg), InvalidArgument);
}

TEST(Evaluate, EmptyInputsGiveSentinels) {
  const auto r = evaluate({}, {}, EvalConfig{});
  EXPECT_EQ(r.mAP, -1.0);
  EXPECT_EQ(r.APs, -1.0);
  EXPECT_TRUE(r.per_category.empty());
}

TEST(Evaluate, AgreesWithBruteForceOracleProperty) {
  std::mt19937_64 rng(31);
  for (int t = 0; t < 150; ++t) {
    const auto c = scenarios::random_eval_case(rng);
    const auto want = oracle::evaluate(c.gts, c.dets, scenarios::micro_settings());
    const auto got = evaluate(scenarios::to_segtk(c.gts), scenarios::to_segtk(c.dets),
                              scenarios::micro_config());
    EXPECT_NEAR(got.mAP, want.mAP, 1e-10) << "case " << t;
    EXPECT_NEAR(got.AP50, want.AP50, 1e-10) << "case " << t;
    EXPECT_NEAR(got.AP75, want.AP75, 1e-10) << "case " << t;
    EXPECT_NEAR(got.APs, want.APs, 1e-10) << "case " << t;
    EXPECT_NEAR(got.APm, want.APm, 1e-10) << "case " << t;
    EXPECT_NEAR(got.APl, want.APl, 1e-10) << "case " << t;
  }
}

TEST(Evaluate, ThreadCountInvariant) {
  std::mt19937_64 rng(32);
  for (int t = 0; t < 30; ++t) {
    const auto c = scenarios::random_eval_case(rng);
    const auto gts = scenarios::to_segtk(c.gts);
    const auto dets = scenarios::to_segtk(c.dets);
    EXPECT_EQ(format_report_json(evaluate(gts, dets, scenarios::micro_config(), {}, 1)),
              format_report_json(evaluate(gts, dets, scenarios::micro_config(), {}, 4)));
  }
}

TEST(Report, TextAndJson) {
  MetricReport r;
  r.mAP = 0.5;
  r.APs = -1.0;
  r.per_category.push_back({3, "lamp", 2, 0.25, 0.5, 0.0});
  r.excluded_categories = {4};
  const std::string text = format_report_text(r);
  EXPECT_NE(text.find("mAP=0.500000\n"), std::string::npos);
  EXPECT_NE(text.find("APs=-1.000000\n"), std::string::npos);
  const auto j = nlohmann::json::parse(format_report_json(r));
  EXPECT_EQ(j["mAP"], 0.5);
  EXPECT_EQ(j["APs"], -1.0);
  EXPECT_EQ(j["per_category"][0]["name"], "lamp");
  EXPECT_EQ(j["excluded_categories"][0], 4);
}

}  // namespace
}  // namespace segtk::eval
