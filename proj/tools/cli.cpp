#include "cli.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <filesystem>
#include <map>
#include <memory>
#include <numeric>
#include <ostream>
#include <random>
#include <set>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"
#include "segtk/error.hpp"
#include "segtk/evalmap.hpp"
#include "segtk/fusion.hpp"
#include "segtk/ingest.hpp"
#include "segtk/parallel.hpp"
#include "segtk/refine.hpp"
#include "segtk/synthetic.hpp"

namespace segtk::cli {
namespace {

namespace fs = std::filesystem;
using ordered_json = nlohmann::ordered_json;

std::string shortest(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

void require_file(const std::string& path, const char* what) {
  if (!fs::is_regular_file(path)) {
    throw IoError(std::string(what) + " '" + path + "' does not exist");
  }
}

struct RefineOptions {
  std::string input;
  std::string oracle;
  int synthetic = 0;
  std::string predictor = "auto";
  std::string output;
  refine::SubdivisionConfig cfg;
  std::uint64_t seed = 0;
  int threads = 0;
};

struct EnsembleOptions {
  std::vector<std::string> models;  // PATH:SCORE
  std::string output;
  fusion::EnsembleConfig cfg;
  std::string strategy = "linear_interpolation";
  std::string nms_method = "gaussian";
  bool class_agnostic = false;
  int threads = 0;
};

struct EvalOptions {
  std::string gt;
  std::string results;
  std::string json_out;
  std::string text_out;
  eval::EvalConfig cfg;
  std::string iou_type = "mask";
  std::string bucket_by = "mask";
  int threads = 0;
};

struct StatsOptions {
  std::string gt;
  std::string output;
  double bin_width = 50.0;
  std::size_t sample_n = 0;
  std::uint64_t seed = 0;
};

// Resolved configuration written next to every output.
void write_sidecar(const CLI::App& app, const std::string& output) {
  ingest::write_text_file(output + ".config.toml", app.config_to_str(true, false));
}

// ---------------------------------------------------------------- refine

struct RenderedInstance {
  fusion::Detection det;
  double iou_rendered = -1.0;
  double iou_bilinear = -1.0;
};

int cmd_refine(const RefineOptions& opt, const CLI::App& app, std::ostream& out) {
  const auto& cfg = opt.cfg;
  cfg.steps();
  if (opt.synthetic > 0 && !opt.input.empty()) {
    throw InvalidArgument("--input and --synthetic are mutually exclusive");
  }
  if (opt.synthetic <= 0 && opt.input.empty()) {
    throw InvalidArgument("one of --input or --synthetic is required");
  }

  std::vector<ingest::CoarseInstance> instances;
  std::vector<ScoreField> references;
  if (opt.synthetic > 0) {
    const auto shapes = synthetic::make_corpus(opt.synthetic, opt.seed);
    for (std::size_t i = 0; i < shapes.size(); ++i) {
      ScoreField truth = synthetic::shape_field(shapes[i], cfg.target_side);
      ingest::CoarseInstance c;
      c.image_id = static_cast<std::int64_t>(i) + 1;
      c.category_id = static_cast<std::int64_t>(shapes[i].kind) + 1;
      c.score = 1.0;
      c.bbox = {0.0, 0.0, static_cast<double>(cfg.target_side),
                static_cast<double>(cfg.target_side)};
      c.coarse = resample(truth, cfg.start_side, cfg.start_side);
      instances.push_back(std::move(c));
      references.push_back(std::move(truth));
    }
  } else {
    require_file(opt.input, "input");
    instances = ingest::load_coarse_instances(opt.input);
    if (!opt.oracle.empty()) {
      require_file(opt.oracle, "oracle field file");
      references = ingest::load_fields(opt.oracle);
      if (references.size() != instances.size()) {
        throw InvalidArgument("oracle file has " + std::to_string(references.size()) +
                              " fields for " + std::to_string(instances.size()) +
                              " instances");
      }
    }
  }

  std::string predictor = opt.predictor;
  if (predictor == "auto") predictor = references.empty() ? "identity" : "oracle";
  if (predictor == "oracle" && references.empty()) {
    throw InvalidArgument("--predictor oracle needs --oracle or --synthetic");
  }

  std::vector<RenderedInstance> rendered(instances.size());
  parallel_for(instances.size(), opt.threads, [&](std::size_t i) {
    const auto& inst = instances[i];
    std::unique_ptr<refine::PointPredictor> pred;
    if (predictor == "oracle") {
      pred = std::make_unique<refine::OracleFieldPredictor>(references[i]);
    } else {
      pred = std::make_unique<refine::IdentityPredictor>();
    }
    const ScoreField field = refine::subdivision_render(inst.coarse, *pred, cfg);
    RenderedInstance& r = rendered[i];
    r.det.id = static_cast<std::int64_t>(i) + 1;
    r.det.image_id = inst.image_id;
    r.det.category_id = inst.category_id;
    r.det.score = inst.score;
    r.det.bbox = inst.bbox;
    if (inst.image_size) {
      r.det.mask = rle_encode(refine::paste_into_image(
          field, inst.bbox, inst.image_size->first, inst.image_size->second));
    } else {
      r.det.mask = rle_encode(binarize(field));
    }
    if (!references.empty() && references[i].width() == cfg.target_side &&
        references[i].height() == cfg.target_side) {
      const BinaryMask truth = binarize(references[i]);
      r.iou_rendered = mask_iou(binarize(field), truth);
      r.iou_bilinear = mask_iou(binarize(refine::plain_upsample(inst.coarse, cfg)), truth);
    }
  });

  std::vector<fusion::Detection> dets;
  ordered_json summary;
  summary["instances"] = rendered.size();
  summary["predictor"] = predictor;
  summary["subdivision_k"] = cfg.subdivision_k;
  summary["target_side"] = cfg.target_side;
  double sum_r = 0.0, sum_b = 0.0;
  std::size_t scored = 0;
  auto& per = summary["per_instance"] = ordered_json::array();
  for (const auto& r : rendered) {
    dets.push_back(r.det);
    if (r.iou_rendered >= 0.0) {
      sum_r += r.iou_rendered;
      sum_b += r.iou_bilinear;
      ++scored;
      per.push_back({{"image_id", r.det.image_id},
                     {"iou_rendered", r.iou_rendered},
                     {"iou_bilinear", r.iou_bilinear}});
    }
  }
  ingest::write_results(opt.output, dets);
  if (scored > 0) {
    const double mr = sum_r / static_cast<double>(scored);
    const double mb = sum_b / static_cast<double>(scored);
    summary["mean_iou_rendered"] = mr;
    summary["mean_iou_bilinear"] = mb;
    out << "mean_iou_rendered=" << shortest(mr) << "\n";
    out << "mean_iou_bilinear=" << shortest(mb) << "\n";
  }
  ingest::write_text_file(opt.output + ".summary.json", summary.dump(2) + "\n");
  write_sidecar(app, opt.output);
  out << "rendered " << rendered.size() << " instances -> " << opt.output << "\n";
  return kOk;
}

// -------------------------------------------------------------- ensemble

fusion::WeightStrategy parse_strategy(const std::string& s) {
  if (s == "linear_interpolation") return fusion::WeightStrategy::kLinearInterpolation;
  if (s == "linear_reweight") return fusion::WeightStrategy::kLinearReweight;
  throw InvalidArgument("unknown strategy '" + s + "'");
}

fusion::NmsMethod parse_nms(const std::string& s) {
  if (s == "gaussian") return fusion::NmsMethod::kGaussian;
  if (s == "linear") return fusion::NmsMethod::kLinear;
  if (s == "hard") return fusion::NmsMethod::kHard;
  throw InvalidArgument("unknown NMS method '" + s + "'");
}

std::pair<std::string, double> split_model(const std::string& spec) {
  const auto colon = spec.rfind(':');
  if (colon == std::string::npos || colon == 0 || colon + 1 == spec.size()) {
    throw InvalidArgument("--model expects PATH:SCORE, got '" + spec + "'");
  }
  const std::string num = spec.substr(colon + 1);
  double score = 0.0;
  const auto res = std::from_chars(num.data(), num.data() + num.size(), score);
  if (res.ec != std::errc() || res.ptr != num.data() + num.size()) {
    throw InvalidArgument("invalid score in --model '" + spec + "'");
  }
  return {spec.substr(0, colon), score};
}

int cmd_ensemble(const EnsembleOptions& opt, const CLI::App& app, std::ostream& out,
                 std::ostream& err) {
  fusion::EnsembleConfig cfg = opt.cfg;
  cfg.strategy = parse_strategy(opt.strategy);
  cfg.nms.method = parse_nms(opt.nms_method);
  cfg.nms.per_category = !opt.class_agnostic;
  cfg.validate();

  std::vector<fusion::ModelCandidate> models;
  for (const auto& spec : opt.models) {
    auto [path, score] = split_model(spec);
    require_file(path, "results file");
    fusion::ModelCandidate m;
    m.model_id = path;
    m.validation_score = score;
    m.detections = ingest::load_results(path);
    models.push_back(std::move(m));
  }

  std::vector<std::set<std::int64_t>> image_sets;
  for (const auto& m : models) {
    std::set<std::int64_t> ids;
    for (const auto& d : m.detections) ids.insert(d.image_id);
    image_sets.push_back(std::move(ids));
  }
  for (std::size_t i = 1; i < image_sets.size(); ++i) {
    if (image_sets[i] != image_sets[0]) {
      err << "warning: image ids in '" << models[i].model_id << "' differ from '"
          << models[0].model_id << "'\n";
    }
  }

  const auto result = fusion::ensemble(models, cfg, opt.threads);
  for (std::size_t i = 0; i < models.size(); ++i) {
    out << "weight " << models[i].model_id << " score="
        << shortest(models[i].validation_score) << " w=" << shortest(result.weights[i])
        << "\n";
  }
  ingest::write_results(opt.output, result.detections);
  write_sidecar(app, opt.output);
  out << "fused " << result.detections.size() << " detections -> " << opt.output << "\n";
  return kOk;
}

// ------------------------------------------------------------------ eval

int cmd_eval(const EvalOptions& opt, const CLI::App& app, std::ostream& out) {
  eval::EvalConfig cfg = opt.cfg;
  if (opt.iou_type == "mask") {
    cfg.iou_on = eval::IouType::kMask;
  } else if (opt.iou_type == "bbox") {
    cfg.iou_on = eval::IouType::kBox;
  } else {
    throw InvalidArgument("unknown --iou-type '" + opt.iou_type + "'");
  }
  if (opt.bucket_by == "mask") {
    cfg.bucket_by = eval::AreaSource::kMask;
  } else if (opt.bucket_by == "box") {
    cfg.bucket_by = eval::AreaSource::kBox;
  } else {
    throw InvalidArgument("unknown --bucket-by '" + opt.bucket_by + "'");
  }
  require_file(opt.gt, "ground truth");
  require_file(opt.results, "results file");
  const auto ds = ingest::load_dataset(opt.gt);
  const auto gts = ingest::to_ground_truth(ds);
  const auto dets = ingest::load_results(opt.results);
  const auto report = eval::evaluate(gts, dets, cfg, ds.categories, opt.threads);

  const std::string text = eval::format_report_text(report);
  out << text;
  if (!opt.text_out.empty()) ingest::write_text_file(opt.text_out, text);
  if (!opt.json_out.empty()) {
    ingest::write_text_file(opt.json_out, eval::format_report_json(report));
  }
  const std::string primary = !opt.json_out.empty() ? opt.json_out : opt.text_out;
  if (!primary.empty()) write_sidecar(app, primary);
  return kOk;
}

// ----------------------------------------------------------------- stats

int cmd_stats(const StatsOptions& opt, const CLI::App& app, std::ostream& out) {
  require_file(opt.gt, "ground truth");
  const auto ds = ingest::load_dataset(opt.gt);

  std::vector<std::int64_t> image_ids;
  for (const auto& img : ds.images) image_ids.push_back(img.id);
  std::sort(image_ids.begin(), image_ids.end());
  if (opt.sample_n > 0 && opt.sample_n < image_ids.size()) {
    std::mt19937_64 rng(opt.seed);
    std::shuffle(image_ids.begin(), image_ids.end(), rng);
    image_ids.resize(opt.sample_n);
  }
  const std::set<std::int64_t> chosen(image_ids.begin(), image_ids.end());

  std::vector<BBox> boxes;
  for (const auto& a : ds.annotations) {
    if (chosen.count(a.image_id)) boxes.push_back(a.bbox);
  }
  const auto hist = ingest::size_histogram(boxes, opt.bin_width);
  ingest::write_text_file(opt.output, ingest::histogram_csv(hist));
  write_sidecar(app, opt.output);
  out << "images=" << chosen.size() << "\n";
  out << "boxes=" << hist.total << "\n";
  if (!boxes.empty()) {
    out << "median_sqrt_area=" << shortest(ingest::median_sqrt_area(boxes)) << "\n";
  } else {
    out << "median_sqrt_area=none\n";
  }
  return kOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"segtk: instance-mask rendering, ensembling and evaluation"};
  app.name("segtk");
  app.set_config("--config", "", "TOML/INI file; command-line flags take precedence");
  app.require_subcommand(1, 1);

  RefineOptions ro;
  auto* refine_cmd = app.add_subcommand("refine", "Render coarse masks by adaptive subdivision");
  refine_cmd->add_option("--input", ro.input, "Coarse instances JSON");
  refine_cmd->add_option("--oracle", ro.oracle, "Reference fields JSON, one per instance");
  refine_cmd->add_option("--synthetic", ro.synthetic, "Render N synthetic shapes instead of --input");
  refine_cmd->add_option("--predictor", ro.predictor, "auto | oracle | identity")
      ->capture_default_str()
      ->check(CLI::IsMember({"auto", "oracle", "identity"}));
  refine_cmd->add_option("--subdivision-k", ro.cfg.subdivision_k, "Points per step = k^2")
      ->capture_default_str();
  refine_cmd->add_option("--target-side", ro.cfg.target_side)->capture_default_str();
  refine_cmd->add_option("--start-side", ro.cfg.start_side)->capture_default_str();
  refine_cmd->add_option("--seed", ro.seed, "Synthetic corpus seed")->capture_default_str();
  refine_cmd->add_option("--threads", ro.threads, "0 = all cores")->capture_default_str();
  refine_cmd->add_option("-o,--output", ro.output, "Results JSON")->required();

  EnsembleOptions eo;
  auto* ens_cmd = app.add_subcommand("ensemble", "Fuse several models' results");
  ens_cmd->add_option("--model", eo.models, "PATH:VALIDATION_SCORE, repeatable")->required();
  ens_cmd->add_option("--theta-min", eo.cfg.theta_min)->capture_default_str();
  ens_cmd->add_option("--theta-max", eo.cfg.theta_max)->capture_default_str();
  ens_cmd->add_option("--strategy", eo.strategy, "linear_interpolation | linear_reweight")
      ->capture_default_str();
  ens_cmd->add_option("--nms-method", eo.nms_method, "gaussian | linear | hard")
      ->capture_default_str();
  ens_cmd->add_option("--sigma", eo.cfg.nms.sigma)->capture_default_str();
  ens_cmd->add_option("--nms-iou", eo.cfg.nms.iou_threshold)->capture_default_str();
  ens_cmd->add_option("--score-floor", eo.cfg.nms.score_floor)->capture_default_str();
  ens_cmd->add_flag("--class-agnostic", eo.class_agnostic, "NMS across categories");
  ens_cmd->add_flag("--mask-iou", eo.cfg.nms.use_mask_iou, "NMS overlap on masks");
  ens_cmd->add_flag("--merge-masks", eo.cfg.merge_masks, "Cluster-vote masks after NMS");
  ens_cmd->add_option("--cluster-iou", eo.cfg.cluster_iou)->capture_default_str();
  ens_cmd->add_option("--threads", eo.threads, "0 = all cores")->capture_default_str();
  ens_cmd->add_option("-o,--output", eo.output, "Fused results JSON")->required();

  EvalOptions vo;
  auto* eval_cmd = app.add_subcommand("eval", "Mask/box AP report");
  eval_cmd->add_option("--gt", vo.gt, "COCO dataset JSON")->required();
  eval_cmd->add_option("--results", vo.results, "COCO results JSON")->required();
  eval_cmd->add_option("--json", vo.json_out, "Write the report as JSON");
  eval_cmd->add_option("--text", vo.text_out, "Write the key=value report");
  eval_cmd->add_option("--iou-type", vo.iou_type, "mask | bbox")->capture_default_str();
  eval_cmd->add_option("--bucket-by", vo.bucket_by, "mask | box")->capture_default_str();
  eval_cmd->add_option("--small-side", vo.cfg.buckets.small_side)->capture_default_str();
  eval_cmd->add_option("--large-side", vo.cfg.buckets.large_side)->capture_default_str();
  eval_cmd->add_option("--max-dets", vo.cfg.max_detections)->capture_default_str();
  eval_cmd->add_option("--threads", vo.threads, "0 = all cores")->capture_default_str();

  StatsOptions so;
  auto* stats_cmd = app.add_subcommand("stats", "Histogram of sqrt box areas");
  stats_cmd->add_option("--gt", so.gt, "COCO dataset JSON")->required();
  stats_cmd->add_option("--bin-width", so.bin_width)->capture_default_str();
  stats_cmd->add_option("--sample-n", so.sample_n, "Images to sample, 0 = all")
      ->capture_default_str();
  stats_cmd->add_option("--seed", so.seed)->capture_default_str();
  stats_cmd->add_option("-o,--output", so.output, "CSV path")->required();

  std::vector<std::string> storage;
  storage.reserve(args.size() + 1);
  storage.push_back("segtk");
  storage.insert(storage.end(), args.begin(), args.end());
  std::vector<char*> argv;
  for (auto& s : storage) argv.push_back(s.data());

  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return kUsageError;
  }

  try {
    if (*refine_cmd) return cmd_refine(ro, app, out);
    if (*ens_cmd) return cmd_ensemble(eo, app, out, err);
    if (*eval_cmd) return cmd_eval(vo, app, out);
    if (*stats_cmd) return cmd_stats(so, app, out);
  } catch (const IoError& e) {
    err << "error: " << e.what() << "\n";
    return kUsageError;
  } catch (const ParseError& e) {
    err << "error: " << e.what() << "\n";
    return kUsageError;
  } catch (const InvalidArgument& e) {
    err << "error: " << e.what() << "\n";
    return kUsageError;
  } catch (const std::exception& e) {
    err << "internal error: " << e.what() << "\n";
    return kInternalError;
  }
  return kUsageError;
}

}  // namespace segtk::cli
