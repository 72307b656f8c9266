#include "segtk/refine.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <string>

#include "segtk/error.hpp"

namespace segtk::refine {
namespace {

// Orders pixel indices by descending uncertainty, then ascending index.
struct MoreUncertain {
  std::span<const double> logits;
  bool operator()(std::size_t a, std::size_t b) const {
    const double ua = uncertainty(logits[a]);
    const double ub = uncertainty(logits[b]);
    if (ua != ub) return ua > ub;
    return a < b;
  }
};

}  // namespace

std::vector<std::size_t> select_most_uncertain(const ScoreField& field,
                                               std::size_t n) {
  if (n > field.size()) {
    throw InvalidArgument("select_most_uncertain: n=" + std::to_string(n) +
                          " exceeds pixel count " +
                          std::to_string(field.size()));
  }
  std::vector<std::size_t> idx(field.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  const MoreUncertain cmp{field.logits()};
  if (n < idx.size()) {
    std::nth_element(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(n),
                     idx.end(), cmp);
    idx.resize(n);
  }
  std::sort(idx.begin(), idx.end(), cmp);
  return idx;
}

std::vector<double> OracleFieldPredictor::predict(
    const ScoreField& /*current*/, std::span<const Point> points) const {
  std::vector<double> out;
  out.reserve(points.size());
  for (const Point& p : points) out.push_back(bilinear_sample(reference_, p));
  return out;
}

std::unique_ptr<PointPredictor> OracleFieldPredictor::clone() const {
  return std::make_unique<OracleFieldPredictor>(reference_);
}

std::vector<double> IdentityPredictor::predict(
    const ScoreField& current, std::span<const Point> points) const {
  std::vector<double> out;
  out.reserve(points.size());
  for (const Point& p : points) out.push_back(bilinear_sample(current, p));
  return out;
}

std::unique_ptr<PointPredictor> IdentityPredictor::clone() const {
  return std::make_unique<IdentityPredictor>();
}

int SubdivisionConfig::steps() const {
  if (subdivision_k < 1) {
    throw InvalidArgument("subdivision_k must be >= 1, got " +
                          std::to_string(subdivision_k));
  }
  if (start_side < 1 || target_side < start_side) {
    throw InvalidArgument("need 1 <= start_side <= target_side, got " +
                          std::to_string(start_side) + " and " +
                          std::to_string(target_side));
  }
  int side = start_side;
  int m = 0;
  while (side < target_side) {
    side *= 2;
    ++m;
  }
  if (side != target_side) {
    throw InvalidArgument("target_side " + std::to_string(target_side) +
                          " is not start_side " + std::to_string(start_side) +
                          " times a power of two");
  }
  return m;
}

ScoreField upsample2x(const ScoreField& field) {
  return resample(field, 2 * field.width(), 2 * field.height());
}

namespace {

void check_coarse(const ScoreField& coarse, const SubdivisionConfig& cfg) {
  if (coarse.width() != cfg.start_side || coarse.height() != cfg.start_side) {
    throw InvalidArgument(
        "coarse field is " + std::to_string(coarse.width()) + "x" +
        std::to_string(coarse.height()) + ", expected start_side " +
        std::to_string(cfg.start_side));
  }
}

}  // namespace

ScoreField plain_upsample(const ScoreField& coarse,
                          const SubdivisionConfig& cfg) {
  const int m = cfg.steps();
  check_coarse(coarse, cfg);
  ScoreField f = coarse;
  for (int i = 0; i < m; ++i) f = upsample2x(f);
  return f;
}

ScoreField subdivision_step(const ScoreField& field,
                            const PointPredictor& predictor,
                            std::size_t n_points) {
  const ScoreField up = upsample2x(field);
  if (n_points > up.size()) {
    throw InvalidArgument("subdivision_step: " + std::to_string(n_points) +
                          " points requested on a grid of " +
                          std::to_string(up.size()));
  }
  if (n_points == 0) return up;

  const auto selected = select_most_uncertain(up, n_points);
  std::vector<Point> points;
  points.reserve(selected.size());
  const int w = up.width();
  const int h = up.height();
  for (const std::size_t i : selected) {
    const int x = static_cast<int>(i % static_cast<std::size_t>(w));
    const int y = static_cast<int>(i / static_cast<std::size_t>(w));
    points.push_back({pixel_center(x, w), pixel_center(y, h)});
  }
  const std::vector<double> refined = predictor.predict(up, points);
  if (refined.size() != points.size()) {
    throw Error("point predictor returned " + std::to_string(refined.size()) +
                " values for " + std::to_string(points.size()) + " points");
  }
  std::vector<double> logits(up.logits().begin(), up.logits().end());
  for (std::size_t k = 0; k < selected.size(); ++k) {
    logits[selected[k]] = refined[k];
  }
  // The constructor rejects non-finite predictor output.
  return ScoreField(w, h, std::move(logits));
}

ScoreField subdivision_render(const ScoreField& coarse,
                              const PointPredictor& predictor,
                              const SubdivisionConfig& cfg) {
  const int m = cfg.steps();
  check_coarse(coarse, cfg);
  const std::size_t budget = static_cast<std::size_t>(cfg.subdivision_k) *
                             static_cast<std::size_t>(cfg.subdivision_k);
  ScoreField f = coarse;
  for (int i = 0; i < m; ++i) {
    const std::size_t grid = 4 * f.size();
    f = subdivision_step(f, predictor, std::min(budget, grid));
  }
  return f;
}

void TrainSampleConfig::validate() const {
  if (n_points < 1) throw InvalidArgument("n_points must be >= 1");
  if (oversample_k < 1) throw InvalidArgument("oversample_k must be >= 1");
  if (!(importance_beta >= 0.0 && importance_beta <= 1.0)) {
    throw InvalidArgument("importance_beta must lie in [0, 1]");
  }
}

std::vector<Point> biased_point_sample(const ScoreField& field,
                                       const TrainSampleConfig& cfg) {
  cfg.validate();
  std::mt19937_64 rng(cfg.rng_seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  auto draw = [&] {
    const double x = unit(rng);
    const double y = unit(rng);
    return Point{x, y};
  };

  const std::size_t n = static_cast<std::size_t>(cfg.n_points);
  const std::size_t pool_size = n * static_cast<std::size_t>(cfg.oversample_k);
  const std::size_t n_important = static_cast<std::size_t>(
      std::floor(cfg.importance_beta * static_cast<double>(n)));

  std::vector<Point> pool(pool_size);
  std::vector<double> score(pool_size);
  for (std::size_t i = 0; i < pool_size; ++i) {
    pool[i] = draw();
    score[i] = uncertainty(bilinear_sample(field, pool[i]));
  }
  std::vector<std::size_t> order(pool_size);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return score[a] > score[b]; });

  std::vector<Point> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n_important; ++i) out.push_back(pool[order[i]]);
  while (out.size() < n) out.push_back(draw());
  return out;
}

ScoreField mirror_horizontal(const ScoreField& field) {
  const int w = field.width();
  const int h = field.height();
  std::vector<double> out(field.size());
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      out[field.index(x, y)] = field.at(w - 1 - x, y);
    }
  }
  return ScoreField(w, h, std::move(out));
}

ScoreField flip_fuse(const ScoreField& field,
                     const ScoreField& field_from_flipped_input) {
  if (field.width() != field_from_flipped_input.width() ||
      field.height() != field_from_flipped_input.height()) {
    throw InvalidArgument("flip_fuse: dimension mismatch");
  }
  const ScoreField back = mirror_horizontal(field_from_flipped_input);
  std::vector<double> out(field.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = 0.5 * (field[i] + back[i]);
  }
  return ScoreField(field.width(), field.height(), std::move(out));
}

BinaryMask paste_into_image(const ScoreField& box_field, const BBox& box,
                            int image_width, int image_height) {
  BinaryMask out(image_width, image_height);
  if (box.w <= 0.0 || box.h <= 0.0) return out;
  const int x0 = std::max(0, static_cast<int>(std::floor(box.x)));
  const int y0 = std::max(0, static_cast<int>(std::floor(box.y)));
  const int x1 = std::min(image_width, static_cast<int>(std::ceil(box.x + box.w)));
  const int y1 = std::min(image_height, static_cast<int>(std::ceil(box.y + box.h)));
  for (int y = y0; y < y1; ++y) {
    const double cy = y + 0.5;
    if (cy < box.y || cy >= box.y + box.h) continue;
    const double v = std::clamp((cy - box.y) / box.h, 0.0, 1.0);
    for (int x = x0; x < x1; ++x) {
      const double cx = x + 0.5;
      if (cx < box.x || cx >= box.x + box.w) continue;
      const double u = std::clamp((cx - box.x) / box.w, 0.0, 1.0);
      if (bilinear_sample(box_field, {u, v}) > 0.0) out.set(x, y, true);
    }
  }
  return out;
}

}  // namespace segtk::refine
