#include "densedet/dataio.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include "densedet/error.hpp"
#include "densedet/random.hpp"

namespace densedet {

using nlohmann::json;

namespace {

[[noreturn]] void schema_error(const std::string& path, const std::string& what) {
  fail_input("schema error at " + path + ": " + what);
}

const json& require(const json& obj, const std::string& path, const char* key) {
  const auto it = obj.find(key);
  if (it == obj.end()) schema_error(path + "." + key, "missing required field");
  return *it;
}

std::int64_t as_int(const json& v, const std::string& path) {
  if (v.is_number_integer()) return v.get<std::int64_t>();
  if (v.is_number_float()) {
    const double d = v.get<double>();
    if (std::floor(d) == d && std::isfinite(d)) return static_cast<std::int64_t>(d);
  }
  schema_error(path, "expected an integer");
}

double as_number(const json& v, const std::string& path) {
  if (!v.is_number()) schema_error(path, "expected a number");
  const double d = v.get<double>();
  if (!std::isfinite(d)) schema_error(path, "expected a finite number");
  return d;
}

bool as_flag(const json& v, const std::string& path) {
  if (v.is_boolean()) return v.get<bool>();
  const auto i = as_int(v, path);
  if (i != 0 && i != 1) schema_error(path, "expected 0 or 1");
  return i == 1;
}

const json& require_array(const json& root, const char* key) {
  const json& v = require(root, "$", key);
  if (!v.is_array()) schema_error(std::string("$.") + key, "expected an array");
  return v;
}

std::string at_index(const char* section, std::size_t i) {
  return std::string("$.") + section + "[" + std::to_string(i) + "]";
}

void read_bbox(const json& v, const std::string& path, double out[4]) {
  if (!v.is_array() || v.size() != 4) schema_error(path, "expected an array of 4 numbers");
  for (int k = 0; k < 4; ++k) out[k] = as_number(v[k], path + "[" + std::to_string(k) + "]");
}

}  // namespace

std::optional<std::int64_t> CocoDataset::category_id(std::string_view name) const {
  for (const auto& c : categories)
    if (c.name == name) return c.id;
  return std::nullopt;
}

CocoDataset parse_coco(std::string_view text) {
  json root;
  try {
    root = json::parse(text.begin(), text.end());
  } catch (const json::parse_error& e) {
    fail_input("malformed JSON at byte " + std::to_string(e.byte) + ": " + e.what());
  }
  if (!root.is_object()) schema_error("$", "expected an object");

  CocoDataset ds;
  for (auto it = root.begin(); it != root.end(); ++it)
    if (it.key() != "images" && it.key() != "annotations" && it.key() != "categories")
      ds.top_level[it.key()] = it.value();

  const json& images = require_array(root, "images");
  for (std::size_t i = 0; i < images.size(); ++i) {
    const std::string path = at_index("images", i);
    const json& r = images[i];
    if (!r.is_object()) schema_error(path, "expected an object");
    CocoImage img;
    img.id = as_int(require(r, path, "id"), path + ".id");
    img.width = static_cast<int>(as_int(require(r, path, "width"), path + ".width"));
    img.height = static_cast<int>(as_int(require(r, path, "height"), path + ".height"));
    if (const auto f = r.find("file_name"); f != r.end()) {
      if (!f->is_string()) schema_error(path + ".file_name", "expected a string");
      img.file_name = f->get<std::string>();
    }
    img.extra = r;
    ds.images.push_back(std::move(img));
  }

  const json& cats = require_array(root, "categories");
  for (std::size_t i = 0; i < cats.size(); ++i) {
    const std::string path = at_index("categories", i);
    const json& r = cats[i];
    if (!r.is_object()) schema_error(path, "expected an object");
    CocoCategory c;
    c.id = as_int(require(r, path, "id"), path + ".id");
    const json& name = require(r, path, "name");
    if (!name.is_string()) schema_error(path + ".name", "expected a string");
    c.name = name.get<std::string>();
    c.extra = r;
    ds.categories.push_back(std::move(c));
  }

  const json& anns = require_array(root, "annotations");
  for (std::size_t i = 0; i < anns.size(); ++i) {
    const std::string path = at_index("annotations", i);
    const json& r = anns[i];
    if (!r.is_object()) schema_error(path, "expected an object");
    CocoAnnotation a;
    a.id = as_int(require(r, path, "id"), path + ".id");
    a.image_id = as_int(require(r, path, "image_id"), path + ".image_id");
    a.category_id = as_int(require(r, path, "category_id"), path + ".category_id");
    read_bbox(require(r, path, "bbox"), path + ".bbox", a.bbox);
    if (const auto f = r.find("iscrowd"); f != r.end()) a.iscrowd = as_flag(*f, path + ".iscrowd");
    if (const auto f = r.find("area"); f != r.end()) {
      a.area = as_number(*f, path + ".area");
      if (*a.area < 0.0) schema_error(path + ".area", "expected a non-negative area");
    }
    a.extra = r;
    ds.annotations.push_back(std::move(a));
  }

  std::unordered_set<std::int64_t> image_ids, cat_ids, ann_ids;
  for (const auto& img : ds.images)
    if (!image_ids.insert(img.id).second) fail_input("integrity error: duplicate image id " + std::to_string(img.id));
  for (const auto& c : ds.categories)
    if (!cat_ids.insert(c.id).second) fail_input("integrity error: duplicate category id " + std::to_string(c.id));
  for (const auto& a : ds.annotations) {
    if (!ann_ids.insert(a.id).second) fail_input("integrity error: duplicate annotation id " + std::to_string(a.id));
    if (!image_ids.count(a.image_id))
      fail_input("integrity error: annotation " + std::to_string(a.id) + " references missing image_id " +
                 std::to_string(a.image_id));
    if (!cat_ids.count(a.category_id))
      fail_input("integrity error: annotation " + std::to_string(a.id) + " references missing category_id " +
                 std::to_string(a.category_id));
  }
  return ds;
}

std::string serialize_coco(const CocoDataset& ds) {
  json root = ds.top_level.is_object() ? ds.top_level : json::object();
  json images = json::array();
  for (const auto& img : ds.images) {
    json r = img.extra.is_object() ? img.extra : json::object();
    r["id"] = img.id;
    r["width"] = img.width;
    r["height"] = img.height;
    r["file_name"] = img.file_name;
    images.push_back(std::move(r));
  }
  json anns = json::array();
  for (const auto& a : ds.annotations) {
    json r = a.extra.is_object() ? a.extra : json::object();
    r["id"] = a.id;
    r["image_id"] = a.image_id;
    r["category_id"] = a.category_id;
    r["bbox"] = {a.bbox[0], a.bbox[1], a.bbox[2], a.bbox[3]};
    r["iscrowd"] = a.iscrowd ? 1 : 0;
    if (a.area) r["area"] = *a.area;
    anns.push_back(std::move(r));
  }
  json cats = json::array();
  for (const auto& c : ds.categories) {
    json r = c.extra.is_object() ? c.extra : json::object();
    r["id"] = c.id;
    r["name"] = c.name;
    cats.push_back(std::move(r));
  }
  root["images"] = std::move(images);
  root["annotations"] = std::move(anns);
  root["categories"] = std::move(cats);
  return root.dump(1) + "\n";
}

std::vector<GroundTruthBox> ground_truth(const CocoDataset& ds, std::int64_t category_id) {
  std::vector<GroundTruthBox> out;
  for (const auto& a : ds.annotations) {
    if (a.category_id != category_id) continue;
    const Box b = a.box();
    out.push_back(GroundTruthBox{a.image_id, b, a.category_id, a.iscrowd, a.area ? *a.area : b.area()});
  }
  return out;
}

void SubsetSpec::validate() const {
  if (category_name.empty()) fail_input("subset category name must not be empty");
  if (min_instances < 1) fail_input("subset min_instances must be >= 1");
}

CocoDataset extract_person_subset(const CocoDataset& ds, const SubsetSpec& spec) {
  spec.validate();
  const auto cat = ds.category_id(spec.category_name);
  if (!cat) fail_input("unknown category '" + spec.category_name + "'");

  std::unordered_map<std::int64_t, int> per_image;
  for (const auto& a : ds.annotations)
    if (a.category_id == *cat) ++per_image[a.image_id];

  std::vector<std::size_t> qualifying;
  for (std::size_t i = 0; i < ds.images.size(); ++i) {
    const auto it = per_image.find(ds.images[i].id);
    if (it != per_image.end() && it->second >= spec.min_instances) qualifying.push_back(i);
  }

  if (spec.max_images && qualifying.size() > *spec.max_images) {
    // Partial Fisher-Yates over positions, then restore dataset order.
    Rng rng(spec.seed);
    std::vector<std::size_t> pool = qualifying;
    for (std::size_t i = 0; i < *spec.max_images; ++i) {
      const std::size_t j = i + static_cast<std::size_t>(rng.below(pool.size() - i));
      std::swap(pool[i], pool[j]);
    }
    pool.resize(*spec.max_images);
    std::sort(pool.begin(), pool.end());
    qualifying = std::move(pool);
  }

  CocoDataset out;
  out.top_level = ds.top_level;
  std::unordered_set<std::int64_t> kept;
  for (std::size_t i : qualifying) {
    out.images.push_back(ds.images[i]);
    kept.insert(ds.images[i].id);
  }
  for (const auto& a : ds.annotations)
    if (a.category_id == *cat && kept.count(a.image_id)) out.annotations.push_back(a);
  for (const auto& c : ds.categories)
    if (c.id == *cat) out.categories.push_back(c);
  return out;
}

std::string write_detections(std::span<const Detection> dets) {
  json arr = json::array();
  for (const auto& d : dets) {
    arr.push_back({{"image_id", d.image_id},
                   {"category_id", d.category_id},
                   {"bbox", {d.box.x1, d.box.y1, d.box.width(), d.box.height()}},
                   {"score", d.score}});
  }
  return arr.dump() + "\n";
}

std::vector<Detection> read_detections(std::string_view text) {
  json root;
  try {
    root = json::parse(text.begin(), text.end());
  } catch (const json::parse_error& e) {
    fail_input("malformed JSON at byte " + std::to_string(e.byte) + ": " + e.what());
  }
  if (!root.is_array()) schema_error("$", "detections must be a JSON array");
  std::vector<Detection> out;
  out.reserve(root.size());
  for (std::size_t i = 0; i < root.size(); ++i) {
    const std::string path = "$[" + std::to_string(i) + "]";
    const json& r = root[i];
    if (!r.is_object()) schema_error(path, "expected an object");
    Detection d;
    d.image_id = as_int(require(r, path, "image_id"), path + ".image_id");
    d.category_id = as_int(require(r, path, "category_id"), path + ".category_id");
    double bb[4];
    read_bbox(require(r, path, "bbox"), path + ".bbox", bb);
    if (bb[2] < 0.0 || bb[3] < 0.0) schema_error(path + ".bbox", "negative width or height");
    d.box = box_from_xywh(bb[0], bb[1], bb[2], bb[3]);
    d.score = as_number(require(r, path, "score"), path + ".score");
    if (d.score < 0.0 || d.score > 1.0) schema_error(path + ".score", "score must lie in [0, 1]");
    out.push_back(d);
  }
  return out;
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail_io("cannot read " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  if (in.bad()) fail_io("error while reading " + path);
  return ss.str();
}

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail_io("cannot write " + path);
  out << text;
  if (!out) fail_io("error while writing " + path);
}

}  // namespace densedet
