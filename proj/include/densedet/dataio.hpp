#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "densedet/metrics.hpp"

namespace densedet {

// Records keep every field they were parsed from in `extra`, so a dataset can
// be written back in the full annotation schema.
struct CocoImage {
  std::int64_t id = 0;
  int width = 0;
  int height = 0;
  std::string file_name;
  nlohmann::json extra = nlohmann::json::object();
};

struct CocoAnnotation {
  std::int64_t id = 0;
  std::int64_t image_id = 0;
  std::int64_t category_id = 0;
  double bbox[4] = {0, 0, 0, 0};  // x, y, w, h
  bool iscrowd = false;
  std::optional<double> area;
  nlohmann::json extra = nlohmann::json::object();

  Box box() const { return box_from_xywh(bbox[0], bbox[1], bbox[2], bbox[3]); }
};

struct CocoCategory {
  std::int64_t id = 0;
  std::string name;
  nlohmann::json extra = nlohmann::json::object();
};

struct CocoDataset {
  std::vector<CocoImage> images;
  std::vector<CocoAnnotation> annotations;
  std::vector<CocoCategory> categories;
  nlohmann::json top_level = nlohmann::json::object();  // info, licenses, ...

  std::optional<std::int64_t> category_id(std::string_view name) const;
};

// Throws Error(Input) naming the byte offset, the JSON path, or the
// offending annotation id.
CocoDataset parse_coco(std::string_view text);
std::string serialize_coco(const CocoDataset& ds);

// Ground truth of one category in evaluation form.
std::vector<GroundTruthBox> ground_truth(const CocoDataset& ds, std::int64_t category_id);

struct SubsetSpec {
  std::string category_name = "person";
  int min_instances = 1;
  std::optional<std::size_t> max_images;
  std::uint64_t seed = 0;

  void validate() const;
};

// Images holding at least min_instances annotations of the category, those
// annotations, and the category itself. With max_images set, a seeded uniform
// sample of the qualifying images is kept (original order preserved).
CocoDataset extract_person_subset(const CocoDataset& ds, const SubsetSpec& spec);

// COCO results array: [{image_id, category_id, bbox: [x,y,w,h], score}].
std::string write_detections(std::span<const Detection> dets);
std::vector<Detection> read_detections(std::string_view text);

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& text);

}  // namespace densedet
