#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "oracle/render_oracle.hpp"
#include "segtk/error.hpp"
#include "segtk/refine.hpp"
#include "segtk/synthetic.hpp"
#include "support/scenarios.hpp"

namespace segtk::refine {
namespace {

ScoreField random_field(std::mt19937_64& rng, int w, int h) {
  std::normal_distribution<double> n(0.0, 2.0);
  std::vector<double> v(static_cast<std::size_t>(w) * h);
  for (auto& x : v) x = n(rng);
  return ScoreField(w, h, v);
}

class ConstantPredictor final : public PointPredictor {
 public:
  explicit ConstantPredictor(std::vector<double> out) : out_(std::move(out)) {}
  std::vector<double> predict(const ScoreField&, std::span<const Point>) const override {
    return out_;
  }
  Sharing sharing() const noexcept override { return Sharing::kShared; }
  std::unique_ptr<PointPredictor> clone() const override {
    return std::make_unique<ConstantPredictor>(out_);
  }

 private:
  std::vector<double> out_;
};

TEST(SelectMostUncertain, OrdersByAbsLogitThenIndex) {
  const ScoreField f(3, 2, {2.0, -0.5, 0.5, 0.0, -3.0, 0.25});
  EXPECT_EQ(select_most_uncertain(f, 4), (std::vector<std::size_t>{3, 5, 1, 2}));
  EXPECT_EQ(select_most_uncertain(f, 0), std::vector<std::size_t>{});
  EXPECT_THROW(select_most_uncertain(f, 7), InvalidArgument);
}

TEST(SelectMostUncertain, MatchesFullSortProperty) {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 100; ++trial) {
    // Rounded logits create many ties.
    std::vector<double> v(64);
    std::uniform_int_distribution<int> q(-4, 4);
    for (auto& x : v) x = q(rng) * 0.5;
    const ScoreField f(8, 8, v);
    std::vector<std::size_t> all(64);
    std::iota(all.begin(), all.end(), 0);
    std::stable_sort(all.begin(), all.end(), [&](std::size_t a, std::size_t b) {
      return std::fabs(v[a]) < std::fabs(v[b]);
    });
    const std::size_t n = std::uniform_int_distribution<std::size_t>(0, 64)(rng);
    all.resize(n);
    EXPECT_EQ(select_most_uncertain(f, n), all);
  }
}

TEST(SubdivisionConfig, Steps) {
  EXPECT_EQ(SubdivisionConfig{}.steps(), 5);
  EXPECT_EQ((SubdivisionConfig{28, 7, 7}.steps()), 0);
  EXPECT_THROW((SubdivisionConfig{28, 200, 7}.steps()), InvalidArgument);
  EXPECT_THROW((SubdivisionConfig{0, 224, 7}.steps()), InvalidArgument);
  EXPECT_THROW((SubdivisionConfig{28, 4, 7}.steps()), InvalidArgument);
}

TEST(Subdivision, IdentityPredictorEqualsPlainUpsample) {
  std::mt19937_64 rng(8);
  const SubdivisionConfig cfg;
  for (int i = 0; i < 5; ++i) {
    const ScoreField coarse = random_field(rng, 7, 7);
    EXPECT_EQ(subdivision_render(coarse, IdentityPredictor{}, cfg), plain_upsample(coarse, cfg));
  }
}

TEST(Subdivision, ZeroStepsReturnsInput) {
  std::mt19937_64 rng(9);
  const ScoreField coarse = random_field(rng, 7, 7);
  const ScoreField ref = random_field(rng, 7, 7);
  EXPECT_EQ(subdivision_render(coarse, OracleFieldPredictor(ref), {28, 7, 7}), coarse);
}

TEST(Subdivision, OversizedBudgetRefinesEveryPixel) {
  std::mt19937_64 rng(10);
  const ScoreField coarse = random_field(rng, 7, 7);
  const ScoreField ref = random_field(rng, 56, 56);
  const SubdivisionConfig cfg{100, 56, 7};
  EXPECT_EQ(subdivision_render(coarse, OracleFieldPredictor(ref), cfg), ref);
}

TEST(Subdivision, MatchesReferenceRenderer) {
  const auto shapes = synthetic::make_corpus(6, 11);
  for (const int k : {3, 7, 28}) {
    for (const auto& shape : shapes) {
      const ScoreField truth = synthetic::shape_field(shape, 224);
      const ScoreField coarse = resample(truth, 7, 7);
      const ScoreField got =
          subdivision_render(coarse, OracleFieldPredictor(truth), {k, 224, 7});

      const oracle::Grid ref{224, {truth.logits().begin(), truth.logits().end()}};
      oracle::Grid c{7, {coarse.logits().begin(), coarse.logits().end()}};
      const oracle::Grid want =
          oracle::render(c, ref, 224, static_cast<std::size_t>(k) * k);
      EXPECT_EQ(binarize(got).bits().size(), want.v.size());
      const auto bits = binarize(got).bits();
      EXPECT_TRUE(std::equal(bits.begin(), bits.end(), oracle::positive(want).begin()))
          << synthetic::describe(shape) << " k=" << k;
    }
  }
}

TEST(Subdivision, PredictorContractViolations) {
  const ScoreField coarse(7, 7, -1.0);
  EXPECT_THROW(subdivision_step(coarse, ConstantPredictor({1.0}), 4), Error);
  EXPECT_THROW(subdivision_step(coarse, ConstantPredictor({NAN}), 1), InvalidArgument);
  EXPECT_THROW(subdivision_step(coarse, IdentityPredictor{}, 14 * 14 + 1), InvalidArgument);
  EXPECT_THROW(subdivision_render(ScoreField(8, 8, 0.0), IdentityPredictor{}, {}),
               InvalidArgument);
}

TEST(Subdivision, MoreBudgetNeverHurtsOnCorpus) {
  const auto shapes = synthetic::make_corpus(9, 12);
  for (const auto& shape : shapes) {
    const ScoreField truth = synthetic::shape_field(shape, 112);
    const BinaryMask gt = binarize(truth);
    const ScoreField coarse = resample(truth, 7, 7);
    double prev = mask_iou(binarize(plain_upsample(coarse, {1, 112, 7})), gt);
    for (const int k : {2, 4, 8, 16, 32}) {
      const double iou =
          mask_iou(binarize(subdivision_render(coarse, OracleFieldPredictor(truth), {k, 112, 7})), gt);
      EXPECT_GE(iou + 1e-12, prev) << synthetic::describe(shape) << " k=" << k;
      prev = iou;
    }
  }
}

TEST(BiasedSampling, DeterministicAndInRange) {
  std::mt19937_64 rng(13);
  const ScoreField f = random_field(rng, 14, 14);
  TrainSampleConfig cfg;
  cfg.rng_seed = 99;
  const auto a = biased_point_sample(f, cfg);
  const auto b = biased_point_sample(f, cfg);
  ASSERT_EQ(a.size(), 24u);
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].x, b[i].x);
    EXPECT_EQ(a[i].y, b[i].y);
    EXPECT_GE(a[i].x, 0.0);
    EXPECT_LE(a[i].x, 1.0);
  }
  cfg.rng_seed = 100;
  EXPECT_NE(biased_point_sample(f, cfg)[0].x, a[0].x);
}

TEST(BiasedSampling, ImportantPointsAreTheMostUncertain) {
  // Field is 0 on the left column band and strongly positive elsewhere.
  std::vector<double> v(16 * 16);
  for (int y = 0; y < 16; ++y) {
    for (int x = 0; x < 16; ++x) v[y * 16 + x] = std::abs(x - 8) * 4.0;
  }
  const ScoreField f(16, 16, v);
  TrainSampleConfig cfg{40, 3, 1.0, 5};
  const auto pts = biased_point_sample(f, cfg);
  double mean_dist = 0.0;
  for (const auto& p : pts) mean_dist += std::abs(p.x - 8.0 / 15.0);
  // Uniform points would average about 0.25 away from the zero line.
  EXPECT_LT(mean_dist / pts.size(), 0.15);
}

TEST(BiasedSampling, RejectsBadConfig) {
  const ScoreField f(4, 4, 0.0);
  EXPECT_THROW(biased_point_sample(f, {0, 3, 0.75, 0}), InvalidArgument);
  EXPECT_THROW(biased_point_sample(f, {4, 0, 0.75, 0}), InvalidArgument);
  EXPECT_THROW(biased_point_sample(f, {4, 3, 1.5, 0}), InvalidArgument);
}

TEST(FlipFuse, MirrorIsInvolutionAndFuseAverages) {
  std::mt19937_64 rng(14);
  const ScoreField f = random_field(rng, 5, 3);
  EXPECT_EQ(mirror_horizontal(mirror_horizontal(f)), f);
  // A prediction made on the flipped image that agrees perfectly fuses to itself.
  EXPECT_EQ(flip_fuse(f, mirror_horizontal(f)), f);
  const ScoreField g = random_field(rng, 5, 3);
  const ScoreField fused = flip_fuse(f, g);
  const ScoreField back = mirror_horizontal(g);
  for (std::size_t i = 0; i < f.size(); ++i) EXPECT_EQ(fused[i], 0.5 * (f[i] + back[i]));
  EXPECT_THROW(flip_fuse(f, ScoreField(3, 5, 0.0)), InvalidArgument);
}

TEST(Paste, PositiveFieldFillsBoxPixels) {
  const ScoreField inside(4, 4, 1.0);
  const BinaryMask m = paste_into_image(inside, {2, 1, 3, 2}, 8, 6);
  EXPECT_EQ(m.count(), 6u);
  EXPECT_TRUE(m.at(2, 1));
  EXPECT_TRUE(m.at(4, 2));
  EXPECT_FALSE(m.at(5, 2));
  EXPECT_EQ(paste_into_image(inside, {6, 4, 10, 10}, 8, 6).count(), 4u);
  EXPECT_EQ(paste_into_image(inside, {0, 0, 0, 3}, 8, 6).count(), 0u);
}

}  // namespace
}  // namespace segtk::refine
