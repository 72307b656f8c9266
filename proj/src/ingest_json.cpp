#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>

#include "json.hpp"

#include "segtk/error.hpp"
#include "segtk/ingest.hpp"

namespace segtk::ingest {
namespace {

using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;

json parse_json(std::string_view text) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    std::size_t line = 1, column = 1;
    const std::size_t stop = std::min<std::size_t>(e.byte > 0 ? e.byte - 1 : 0,
                                                   text.size());
    for (std::size_t i = 0; i < stop; ++i) {
      if (text[i] == '\n') {
        ++line;
        column = 1;
      } else {
        ++column;
      }
    }
    throw ParseError("line " + std::to_string(line) + ", column " +
                         std::to_string(column),
                     "invalid JSON");
  }
}

std::string at(const std::string& path, std::string_view key) {
  return path.empty() ? std::string(key) : path + "." + std::string(key);
}

std::string at(const std::string& path, std::size_t index) {
  return path + "[" + std::to_string(index) + "]";
}

const json& require(const json& obj, std::string_view key, const std::string& path) {
  if (!obj.is_object()) throw ParseError(path, "expected an object");
  const auto it = obj.find(key);
  if (it == obj.end()) throw ParseError(at(path, key), "missing field");
  return *it;
}

std::int64_t as_int(const json& j, const std::string& path) {
  if (j.is_number_integer()) return j.get<std::int64_t>();
  if (j.is_number_float()) {
    const double v = j.get<double>();
    if (std::isfinite(v) && v == std::floor(v) && std::abs(v) < 9.0e15) {
      return static_cast<std::int64_t>(v);
    }
  }
  throw ParseError(path, "expected an integer");
}

double as_double(const json& j, const std::string& path) {
  if (!j.is_number()) throw ParseError(path, "expected a number");
  const double v = j.get<double>();
  if (!std::isfinite(v)) throw ParseError(path, "expected a finite number");
  return v;
}

const json& as_array(const json& j, const std::string& path) {
  if (!j.is_array()) throw ParseError(path, "expected an array");
  return j;
}

BBox as_bbox(const json& j, const std::string& path) {
  as_array(j, path);
  if (j.size() != 4) throw ParseError(path, "bbox needs 4 numbers");
  BBox b{as_double(j[0], at(path, 0)), as_double(j[1], at(path, 1)),
         as_double(j[2], at(path, 2)), as_double(j[3], at(path, 3))};
  if (b.w < 0.0 || b.h < 0.0) throw ParseError(path, "negative bbox size");
  return b;
}

int as_dim(const json& j, const std::string& path) {
  const std::int64_t v = as_int(j, path);
  if (v < 1 || v > (1 << 24)) throw ParseError(path, "dimension out of range");
  return static_cast<int>(v);
}

// {"size": [h, w], "counts": "..." | [...]}
RleMask parse_rle(const json& j, const std::string& path, bool* compressed) {
  const json& size = as_array(require(j, "size", path), at(path, "size"));
  if (size.size() != 2) throw ParseError(at(path, "size"), "expected [height, width]");
  const int height = as_dim(size[0], at(at(path, "size"), 0));
  const int width = as_dim(size[1], at(at(path, "size"), 1));
  const json& counts = require(j, "counts", path);
  if (counts.is_string()) {
    if (compressed) *compressed = true;
    try {
      return rle_string_decode(counts.get<std::string>(), width, height);
    } catch (const ParseError& e) {
      throw ParseError(at(path, "counts"), e.message());
    }
  }
  as_array(counts, at(path, "counts"));
  RleMask rle{width, height, {}};
  for (std::size_t i = 0; i < counts.size(); ++i) {
    const std::int64_t c = as_int(counts[i], at(at(path, "counts"), i));
    if (c < 0 || c > UINT32_MAX) throw ParseError(at(at(path, "counts"), i), "bad run length");
    rle.counts.push_back(static_cast<std::uint32_t>(c));
  }
  try {
    validate_rle(rle);
  } catch (const InvalidArgument& e) {
    throw ParseError(at(path, "counts"), e.what());
  }
  if (compressed) *compressed = false;
  return rle;
}

Segmentation parse_segmentation(const json& j, const std::string& path) {
  Segmentation seg;
  if (j.is_object()) {
    seg.rle = parse_rle(j, path, &seg.compressed);
    return seg;
  }
  as_array(j, path);
  for (std::size_t p = 0; p < j.size(); ++p) {
    const std::string ppath = at(path, p);
    const json& flat = as_array(j[p], ppath);
    if (flat.size() % 2 != 0) throw ParseError(ppath, "odd number of coordinates");
    Polygon poly;
    for (std::size_t k = 0; k < flat.size(); k += 2) {
      poly.push_back({as_double(flat[k], at(ppath, k)),
                      as_double(flat[k + 1], at(ppath, k + 1))});
    }
    seg.polygons.push_back(std::move(poly));
  }
  return seg;
}

ScoreField parse_field(const json& j, const std::string& path) {
  const int width = as_dim(require(j, "width", path), at(path, "width"));
  const int height = as_dim(require(j, "height", path), at(path, "height"));
  const json& logits = as_array(require(j, "logits", path), at(path, "logits"));
  std::vector<double> values;
  values.reserve(logits.size());
  for (std::size_t i = 0; i < logits.size(); ++i) {
    values.push_back(as_double(logits[i], at(at(path, "logits"), i)));
  }
  try {
    return ScoreField(width, height, std::move(values));
  } catch (const InvalidArgument& e) {
    throw ParseError(path, e.what());
  }
}

// Runs a parser over a file's contents, prefixing errors with the path.
template <typename Parse>
auto parse_file(const std::filesystem::path& path, Parse&& parse) {
  const std::string text = read_text_file(path);
  try {
    return parse(text);
  } catch (const ParseError& e) {
    throw ParseError(path.string() + (e.where().empty() ? "" : ": " + e.where()),
                     e.message());
  }
}

}  // namespace

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  if (in.bad()) throw IoError("cannot read '" + path.string() + "'");
  return ss.str();
}

void write_text_file(const std::filesystem::path& path, std::string_view text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) throw IoError("cannot write '" + path.string() + "'");
}

DatasetFile parse_dataset(std::string_view json_text) {
  const json root = parse_json(json_text);
  if (!root.is_object()) throw ParseError("", "dataset must be a JSON object");
  DatasetFile ds;

  const json& images = as_array(require(root, "images", ""), "images");
  std::map<std::int64_t, std::size_t> image_index;
  for (std::size_t i = 0; i < images.size(); ++i) {
    const std::string path = at("images", i);
    ImageInfo img;
    img.id = as_int(require(images[i], "id", path), at(path, "id"));
    img.width = as_dim(require(images[i], "width", path), at(path, "width"));
    img.height = as_dim(require(images[i], "height", path), at(path, "height"));
    if (const auto it = images[i].find("file_name");
        it != images[i].end() && it->is_string()) {
      img.file_name = it->get<std::string>();
    }
    if (!image_index.emplace(img.id, ds.images.size()).second) {
      throw ParseError(at(path, "id"), "duplicate image id " + std::to_string(img.id));
    }
    ds.images.push_back(std::move(img));
  }

  std::set<std::int64_t> category_ids;
  if (const auto it = root.find("categories"); it != root.end()) {
    as_array(*it, "categories");
    for (std::size_t i = 0; i < it->size(); ++i) {
      const std::string path = at("categories", i);
      eval::Category c;
      c.id = as_int(require((*it)[i], "id", path), at(path, "id"));
      if (const auto n = (*it)[i].find("name"); n != (*it)[i].end() && n->is_string()) {
        c.name = n->get<std::string>();
      }
      if (!category_ids.insert(c.id).second) {
        throw ParseError(at(path, "id"), "duplicate category id " + std::to_string(c.id));
      }
      ds.categories.push_back(std::move(c));
    }
  }

  const json& anns = as_array(require(root, "annotations", ""), "annotations");
  std::set<std::int64_t> ann_ids;
  for (std::size_t i = 0; i < anns.size(); ++i) {
    const std::string path = at("annotations", i);
    const json& a = anns[i];
    Annotation ann;
    ann.id = as_int(require(a, "id", path), at(path, "id"));
    if (!ann_ids.insert(ann.id).second) {
      throw ParseError(at(path, "id"), "duplicate annotation id " + std::to_string(ann.id));
    }
    ann.image_id = as_int(require(a, "image_id", path), at(path, "image_id"));
    const auto img_it = image_index.find(ann.image_id);
    if (img_it == image_index.end()) {
      throw ParseError(at(path, "image_id"),
                       "references missing image id " + std::to_string(ann.image_id));
    }
    ann.category_id = as_int(require(a, "category_id", path), at(path, "category_id"));
    if (!category_ids.empty() && !category_ids.count(ann.category_id)) {
      throw ParseError(at(path, "category_id"),
                       "references missing category id " +
                           std::to_string(ann.category_id));
    }
    ann.segmentation =
        parse_segmentation(require(a, "segmentation", path), at(path, "segmentation"));
    const ImageInfo& img = ds.images[img_it->second];
    if (ann.segmentation.rle &&
        (ann.segmentation.rle->width != img.width ||
         ann.segmentation.rle->height != img.height)) {
      throw ParseError(at(path, "segmentation.size"),
                       "does not match image " + std::to_string(img.id) + " size");
    }
    if (const auto it = a.find("area"); it != a.end()) {
      ann.area = as_double(*it, at(path, "area"));
    }
    if (const auto it = a.find("bbox"); it != a.end()) {
      ann.bbox = as_bbox(*it, at(path, "bbox"));
    } else if (ann.segmentation.rle) {
      ann.bbox = rle_to_bbox(*ann.segmentation.rle);
    }
    const BBox& b = ann.bbox;
    if (b.x < 0.0 || b.y < 0.0 || b.x + b.w > img.width || b.y + b.h > img.height) {
      ds.warnings.push_back(at(path, "bbox") + ": extends outside image " +
                            std::to_string(img.id));
    }
    ds.annotations.push_back(std::move(ann));
  }
  return ds;
}

DatasetFile load_dataset(const std::filesystem::path& path) {
  return parse_file(path, parse_dataset);
}

std::vector<eval::GroundTruthInstance> to_ground_truth(const DatasetFile& ds) {
  std::map<std::int64_t, const ImageInfo*> images;
  for (const auto& img : ds.images) images[img.id] = &img;
  std::vector<eval::GroundTruthInstance> out;
  out.reserve(ds.annotations.size());
  for (std::size_t i = 0; i < ds.annotations.size(); ++i) {
    const Annotation& a = ds.annotations[i];
    const auto it = images.find(a.image_id);
    if (it == images.end()) {
      throw ParseError(at("annotations", i) + ".image_id",
                       "references missing image id " + std::to_string(a.image_id));
    }
    const ImageInfo& img = *it->second;
    eval::GroundTruthInstance g;
    g.id = a.id;
    g.image_id = a.image_id;
    g.category_id = a.category_id;
    if (a.segmentation.rle) {
      g.mask = *a.segmentation.rle;
    } else {
      try {
        g.mask = rle_encode(rasterize_polygons(a.segmentation.polygons, img.width,
                                               img.height));
      } catch (const InvalidArgument& e) {
        throw ParseError(at("annotations", i) + ".segmentation", e.what());
      }
    }
    g.area = static_cast<double>(rle_area(g.mask));
    g.bbox = a.bbox;
    out.push_back(std::move(g));
  }
  return out;
}

std::vector<fusion::Detection> parse_results(std::string_view json_text) {
  const json root = parse_json(json_text);
  as_array(root, "results");
  std::vector<fusion::Detection> out;
  out.reserve(root.size());
  for (std::size_t i = 0; i < root.size(); ++i) {
    const std::string path = at("", i);
    const json& r = root[i];
    fusion::Detection d;
    d.id = static_cast<std::int64_t>(i) + 1;
    if (const auto it = r.find("id"); it != r.end()) d.id = as_int(*it, at(path, "id"));
    d.image_id = as_int(require(r, "image_id", path), at(path, "image_id"));
    d.category_id = as_int(require(r, "category_id", path), at(path, "category_id"));
    d.score = as_double(require(r, "score", path), at(path, "score"));
    if (d.score < 0.0 || d.score > 1.0) {
      throw ParseError(at(path, "score"), "score outside [0, 1]");
    }
    const auto seg = r.find("segmentation");
    if (seg != r.end()) d.mask = parse_rle(*seg, at(path, "segmentation"), nullptr);
    if (const auto it = r.find("bbox"); it != r.end()) {
      d.bbox = as_bbox(*it, at(path, "bbox"));
    } else if (d.mask) {
      d.bbox = rle_to_bbox(*d.mask);
    } else {
      throw ParseError(path, "result needs a bbox or a segmentation");
    }
    out.push_back(std::move(d));
  }
  return out;
}

std::vector<fusion::Detection> load_results(const std::filesystem::path& path) {
  return parse_file(path, parse_results);
}

std::string format_results(const std::vector<fusion::Detection>& dets) {
  ordered_json out = ordered_json::array();
  for (const auto& d : dets) {
    ordered_json r;
    r["image_id"] = d.image_id;
    r["category_id"] = d.category_id;
    r["bbox"] = {d.bbox.x, d.bbox.y, d.bbox.w, d.bbox.h};
    r["score"] = d.score;
    if (d.mask) {
      r["segmentation"] = {{"size", {d.mask->height, d.mask->width}},
                           {"counts", rle_string_encode(*d.mask)}};
    }
    out.push_back(std::move(r));
  }
  return out.dump() + "\n";
}

void write_results(const std::filesystem::path& path,
                   const std::vector<fusion::Detection>& dets) {
  write_text_file(path, format_results(dets));
}

std::vector<CoarseInstance> load_coarse_instances(const std::filesystem::path& path) {
  return parse_file(path, [](std::string_view text) {
    const json root = parse_json(text);
    const json& insts = as_array(require(root, "instances", ""), "instances");
    std::vector<CoarseInstance> out;
    for (std::size_t i = 0; i < insts.size(); ++i) {
      const std::string p = at("instances", i);
      const json& j = insts[i];
      CoarseInstance c;
      c.image_id = as_int(require(j, "image_id", p), at(p, "image_id"));
      c.category_id = as_int(require(j, "category_id", p), at(p, "category_id"));
      c.score = as_double(require(j, "score", p), at(p, "score"));
      if (c.score < 0.0 || c.score > 1.0) throw ParseError(at(p, "score"), "score outside [0, 1]");
      c.bbox = as_bbox(require(j, "bbox", p), at(p, "bbox"));
      c.coarse = parse_field(require(j, "coarse", p), at(p, "coarse"));
      if (const auto it = j.find("image_size"); it != j.end()) {
        const json& size = as_array(*it, at(p, "image_size"));
        if (size.size() != 2) throw ParseError(at(p, "image_size"), "expected [height, width]");
        const int h = as_dim(size[0], at(at(p, "image_size"), 0));
        const int w = as_dim(size[1], at(at(p, "image_size"), 1));
        c.image_size = std::pair{w, h};
      }
      out.push_back(std::move(c));
    }
    return out;
  });
}

std::vector<ScoreField> load_fields(const std::filesystem::path& path) {
  return parse_file(path, [](std::string_view text) {
    const json root = parse_json(text);
    const json& fields = as_array(require(root, "fields", ""), "fields");
    std::vector<ScoreField> out;
    for (std::size_t i = 0; i < fields.size(); ++i) {
      out.push_back(parse_field(fields[i], at("fields", i)));
    }
    return out;
  });
}

}  // namespace segtk::ingest
