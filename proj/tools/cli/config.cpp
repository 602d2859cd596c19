#include "config.hpp"

#include <exception>
#include <set>

#include "densedet/error.hpp"

namespace densedet::cli {

using nlohmann::json;

namespace {

class Section {
 public:
  Section(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) fail_input("config " + path_ + ": expected an object");
  }

  ~Section() noexcept(false) {
    if (std::uncaught_exceptions()) return;
    for (auto it = j_.begin(); it != j_.end(); ++it)
      if (!seen_.count(it.key())) fail_input("config: unknown key " + path_ + "." + it.key());
  }

  const json* find(const char* key) {
    seen_.insert(key);
    const auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }

  std::string at(const char* key) const { return path_ + "." + key; }

  template <typename T>
  void get(const char* key, T& out) {
    if (const json* v = find(key)) {
      try {
        if constexpr (std::is_same_v<T, bool>) {
          if (!v->is_boolean()) throw std::invalid_argument("expected a boolean");
        } else if constexpr (std::is_arithmetic_v<T>) {
          if (!v->is_number()) throw std::invalid_argument("expected a number");
          if constexpr (std::is_integral_v<T>)
            if (!v->is_number_integer()) throw std::invalid_argument("expected an integer");
          if constexpr (std::is_unsigned_v<T>)
            if (v->is_number_integer() && v->get<long long>() < 0) throw std::invalid_argument("expected a non-negative integer");
        }
        out = v->get<T>();
      } catch (const std::exception& e) {
        fail_input("config " + at(key) + ": " + e.what());
      }
    }
  }

  template <typename F>
  void section(const char* key, F&& body) {
    if (const json* v = find(key)) {
      Section s(*v, at(key));
      body(s);
    }
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

void read_proposals(Section& s, ProposalParams& p) {
  s.get("pre_nms_top_k", p.pre_nms_top_k);
  s.get("post_nms_top_k", p.post_nms_top_k);
  s.get("nms_threshold", p.nms_threshold);
}

}  // namespace

CliConfig parse_config(const json& j) {
  CliConfig c;
  {
    Section root(j, "$");
    TrainConfig& t = c.train;
    root.get("epochs", t.epochs);
    root.get("learning_rate", t.learning_rate);
    root.get("embedding_lr_scale", t.embedding_lr_scale);
    root.get("seed", t.seed);
    root.get("with_dense_head", t.with_dense_head);
    root.get("lambda_obj", t.lambda_obj);
    root.get("lambda_box", t.lambda_box);
    root.get("lambda_cse", t.lambda_cse);
    root.get("eval_every", t.eval_every);
    root.get("smooth_l1_beta", t.smooth_l1_beta);
    root.get("dense_roi_size", t.dense_roi_size);
    root.get("dense_sampling", t.dense_sampling);
    root.get("dense_match_iou", t.dense_match_iou);
    std::string score = t.score == ScoreKind::Dot ? "dot" : "neg_sq_dist";
    root.get("score", score);
    if (score == "dot")
      t.score = ScoreKind::Dot;
    else if (score == "neg_sq_dist")
      t.score = ScoreKind::NegSquaredDistance;
    else
      fail_input("config $.score: expected 'neg_sq_dist' or 'dot'");
    root.get("paired_seeds", c.paired_seeds);

    root.section("backbone", [&](Section& s) {
      s.get("channels", t.backbone.channels);
      s.get("strides", t.backbone.strides);
      s.get("embed_dim", t.backbone.embed_dim);
      s.get("embed_hidden", t.backbone.embed_hidden);
      s.get("fuse_embed_hidden", t.backbone.fuse_embed_hidden);
    });
    root.section("anchors", [&](Section& s) {
      s.get("base_size", t.anchors.base_size);
      s.get("scales", t.anchors.scales);
      s.get("ratios", t.anchors.ratios);
      s.get("stride", t.anchors.stride);
    });
    root.section("matcher", [&](Section& s) {
      s.get("positive", t.matcher.positive);
      s.get("negative", t.matcher.negative);
    });
    root.section("train_proposals", [&](Section& s) { read_proposals(s, t.train_proposals); });
    root.section("eval_proposals", [&](Section& s) { read_proposals(s, t.eval_proposals); });
    root.section("data", [&](Section& s) {
      s.get("train_scenes", c.data.train_scenes);
      s.get("val_scenes", c.data.val_scenes);
      s.get("image_size", c.data.image_size);
      s.get("vertices", c.data.vertices);
      s.get("seed", c.data.seed);
    });
    root.section("subset", [&](Section& s) {
      s.get("category", c.subset.category_name);
      s.get("min_instances", c.subset.min_instances);
      std::size_t max_images = 0;
      if (s.find("max_images")) {
        s.get("max_images", max_images);
        c.subset.max_images = max_images;
      }
      s.get("seed", c.subset.seed);
    });
    root.section("metrics", [&](Section& s) {
      double lo = 0.5, hi = 0.95, step = 0.05;
      s.get("iou_min", lo);
      s.get("iou_max", hi);
      s.get("iou_step", step);
      c.metrics.iou_thresholds = EvalOptions::iou_sweep(lo, hi, step);
      s.get("max_dets", c.metrics.max_dets_per_image);
    });
  }

  c.train.backbone.image_size = c.data.image_size;
  c.train.backbone.anchors_per_cell = static_cast<int>(c.train.anchors.anchors_per_cell());
  if (c.paired_seeds.empty()) fail_input("config $.paired_seeds must not be empty");
  c.train.validate();
  c.subset.validate();
  if (c.data.train_scenes < 1 || c.data.val_scenes < 1) fail_input("config $.data: scene counts must be >= 1");
  if (c.data.vertices < 8 || c.data.image_size < 32) fail_input("config $.data: needs vertices >= 8, image_size >= 32");
  return c;
}

CliConfig load_config(const std::string& path) {
  const std::string text = read_text_file(path);
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    fail_input("config " + path + ": malformed JSON at byte " + std::to_string(e.byte));
  }
  return parse_config(j);
}

json default_config_json() {
  const CliConfig c;
  json j = to_json(c.train);
  j.erase("backbone");
  j["backbone"] = {{"channels", c.train.backbone.channels},
                   {"strides", c.train.backbone.strides},
                   {"embed_dim", c.train.backbone.embed_dim},
                   {"embed_hidden", c.train.backbone.embed_hidden},
                   {"fuse_embed_hidden", c.train.backbone.fuse_embed_hidden}};
  j["paired_seeds"] = c.paired_seeds;
  j["data"] = {{"train_scenes", c.data.train_scenes},
               {"val_scenes", c.data.val_scenes},
               {"image_size", c.data.image_size},
               {"vertices", c.data.vertices},
               {"seed", c.data.seed}};
  j["subset"] = {{"category", c.subset.category_name}, {"min_instances", c.subset.min_instances}, {"seed", c.subset.seed}};
  j["metrics"] = {{"iou_min", 0.5}, {"iou_max", 0.95}, {"iou_step", 0.05}, {"max_dets", c.metrics.max_dets_per_image}};
  return j;
}

}  // namespace densedet::cli
