#pragma once

// Coarse-to-fine mask rendering by adaptive subdivision.
//
// A coarse logit grid is repeatedly upsampled x2 (align-corners bilinear).
// After every upsample only the most uncertain pixels, those whose logit is
// closest to 0, are sent to a PointPredictor for a refined value; the rest
// keep their interpolated logit. The predictor stands in for a learned
// point head.

#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <vector>

#include "segtk/mask.hpp"

namespace segtk::refine {

// -|logit|: largest (0) at probability 0.5.
inline double uncertainty(double logit) noexcept {
  return logit < 0.0 ? logit : -logit;
}

// Indices of the n most uncertain pixels, most uncertain first. Ties go to
// the lowest row-major index. Throws InvalidArgument if n > field.size().
std::vector<std::size_t> select_most_uncertain(const ScoreField& field,
                                               std::size_t n);

// Query interface for refined logits at box-normalized points.
//
// `current` is the field the points were selected on (already upsampled for
// this step). Implementations must return exactly one finite logit per point.
//
// Concurrency: predict() is const. An implementation reports kShared when a
// single instance may serve concurrent renders; otherwise callers obtain a
// private copy per worker with clone().
class PointPredictor {
 public:
  enum class Sharing { kShared, kClonePerWorker };

  virtual ~PointPredictor() = default;

  virtual std::vector<double> predict(const ScoreField& current,
                                      std::span<const Point> points) const = 0;
  virtual Sharing sharing() const noexcept = 0;
  virtual std::unique_ptr<PointPredictor> clone() const = 0;
};

// Answers from a high-resolution reference field. Immutable, kShared.
class OracleFieldPredictor final : public PointPredictor {
 public:
  explicit OracleFieldPredictor(ScoreField reference)
      : reference_(std::move(reference)) {}

  std::vector<double> predict(const ScoreField& current,
                              std::span<const Point> points) const override;
  Sharing sharing() const noexcept override { return Sharing::kShared; }
  std::unique_ptr<PointPredictor> clone() const override;

  const ScoreField& reference() const noexcept { return reference_; }

 private:
  ScoreField reference_;
};

// Echoes the interpolated value, so refinement is a no-op. Stateless, kShared.
class IdentityPredictor final : public PointPredictor {
 public:
  std::vector<double> predict(const ScoreField& current,
                              std::span<const Point> points) const override;
  Sharing sharing() const noexcept override { return Sharing::kShared; }
  std::unique_ptr<PointPredictor> clone() const override;
};

struct SubdivisionConfig {
  // Points re-predicted per step are subdivision_k^2 (clamped to the step's
  // pixel count). 28 is the usual default, 70 the "more points" setting.
  int subdivision_k = 28;
  int target_side = 224;
  int start_side = 7;

  // Number of x2 steps from start_side to target_side. Throws
  // InvalidArgument unless target_side == start_side * 2^m and k >= 1.
  int steps() const;
};

// x2 align-corners bilinear upsample.
ScoreField upsample2x(const ScoreField& field);

// Repeated upsample2x from start_side to target_side with no refinement.
// This is the baseline rendering.
ScoreField plain_upsample(const ScoreField& coarse, const SubdivisionConfig& cfg);

// One refinement step: upsample x2, select n_points most uncertain pixels of
// the upsampled grid, overwrite them with the predictor's answers at their
// pixel-centre coordinates.
ScoreField subdivision_step(const ScoreField& field,
                            const PointPredictor& predictor,
                            std::size_t n_points);

ScoreField subdivision_render(const ScoreField& coarse,
                              const PointPredictor& predictor,
                              const SubdivisionConfig& cfg);

// Training-time point sampling biased towards uncertain regions.
// n_points is a raw count: 14 originally, 26 for the coarse head and 24 for
// the point head in the more-points setting.
struct TrainSampleConfig {
  int n_points = 24;
  int oversample_k = 3;
  double importance_beta = 0.75;
  std::uint64_t rng_seed = 0;

  void validate() const;
};

// Draws oversample_k * n_points uniform points, keeps the
// floor(beta * n_points) most uncertain ones and fills the rest with fresh
// uniform points. Deterministic for a fixed seed.
std::vector<Point> biased_point_sample(const ScoreField& field,
                                       const TrainSampleConfig& cfg);

ScoreField mirror_horizontal(const ScoreField& field);

// Mirrors the prediction made on the flipped input back and averages it
// with the direct prediction.
ScoreField flip_fuse(const ScoreField& field,
                     const ScoreField& field_from_flipped_input);

// Places a box-local field onto an image canvas: image pixel centres inside
// `box` sample the field bilinearly and are set when the logit is > 0.
BinaryMask paste_into_image(const ScoreField& box_field, const BBox& box,
                            int image_width, int image_height);

}  // namespace segtk::refine
