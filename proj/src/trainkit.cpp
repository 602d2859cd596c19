#include "densedet/trainkit.hpp"

#include <algorithm>
#include <chrono>
#include <cstring>
#include <cmath>
#include <numeric>
#include <sstream>

#include "densedet/error.hpp"
#include "densedet/random.hpp"
#include "densedet/roi_align.hpp"

namespace densedet {

double smooth_l1(double x, double beta) {
  const double a = std::abs(x);
  return a < beta ? 0.5 * x * x / beta : a - 0.5 * beta;
}

double smooth_l1_grad(double x, double beta) {
  if (std::abs(x) < beta) return x / beta;
  return x > 0.0 ? 1.0 : -1.0;
}

double bce_with_logit(double logit, double target) {
  return std::max(logit, 0.0) - logit * target + std::log1p(std::exp(-std::abs(logit)));
}

double bce_with_logit_grad(double logit, double target) {
  const double p = logit >= 0.0 ? 1.0 / (1.0 + std::exp(-logit)) : std::exp(logit) / (1.0 + std::exp(logit));
  return p - target;
}

namespace {

double sigmoid(double z) { return z >= 0.0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z)); }

struct Fnv {
  std::uint64_t h = 1469598103934665603ull;
  void byte(unsigned char b) {
    h ^= b;
    h *= 1099511628211ull;
  }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) byte(static_cast<unsigned char>(v >> (8 * i)));
  }
};

}  // namespace

void TrainConfig::validate() const {
  if (epochs < 1) fail_input("epochs must be >= 1");
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) fail_input("learning_rate must be > 0");
  if (!(embedding_lr_scale > 0.0) || !std::isfinite(embedding_lr_scale)) fail_input("embedding_lr_scale must be > 0");
  if (lambda_obj < 0.0 || lambda_box < 0.0 || lambda_cse < 0.0) fail_input("loss weights must be >= 0");
  if (eval_every < 1) fail_input("eval_every must be >= 1");
  if (!(smooth_l1_beta > 0.0)) fail_input("smooth_l1_beta must be > 0");
  if (dense_roi_size < 1 || dense_sampling < 1) fail_input("dense head ROI parameters must be >= 1");
  if (!(dense_match_iou > 0.0 && dense_match_iou <= 1.0)) fail_input("dense_match_iou must lie in (0, 1]");
  backbone.validate();
  anchors.validate();
  if (static_cast<int>(anchors.anchors_per_cell()) != backbone.anchors_per_cell)
    fail_input("anchor spec yields " + std::to_string(anchors.anchors_per_cell()) +
               " anchors per cell but the backbone predicts " + std::to_string(backbone.anchors_per_cell));
  if (anchors.stride != backbone.total_stride()) fail_input("anchor stride must equal the backbone stride");
}

bool RunReport::same_outcome(const RunReport& o) const {
  return to_json(config) == to_json(o.config) && losses == o.losses && evaluations == o.evaluations &&
         final_summary == o.final_summary &&
         (mean_geodesic_error == o.mean_geodesic_error ||
          (std::isnan(mean_geodesic_error) && std::isnan(o.mean_geodesic_error)));
}

std::vector<SyntheticScene> make_scenes(const DataConfig& data, bool validation) {
  const int n = validation ? data.val_scenes : data.train_scenes;
  if (n < 1) fail_input("scene counts must be >= 1");
  std::vector<SyntheticScene> out;
  out.reserve(n);
  const std::uint64_t base = data.seed * 100000ull + (validation ? 50000ull : 0ull);
  for (int i = 0; i < n; ++i) out.push_back(generate_synthetic_scene(base + i, data.vertices, data.image_size));
  return out;
}

ToyDetector::ToyDetector(const TrainConfig& config, int vertices)
    : config_(config),
      backbone_(config.backbone, config.seed),
      embedding_(EmbeddingMatrix::random(vertices, config.backbone.embed_dim, config.seed ^ 0x5eedE5Eull)) {
  config_.validate();
  const int fs = config_.backbone.feature_size();
  anchors_ = generate_anchors(config_.anchors, fs, fs);
}

namespace {

// Channel-major head layout -> anchor index: anchor (cell * A + a) reads
// channel a at plane offset `cell`.
struct HeadIndex {
  int anchors_per_cell;
  std::size_t plane;
  std::size_t objectness(std::size_t anchor) const {
    return (anchor % anchors_per_cell) * plane + anchor / anchors_per_cell;
  }
  std::size_t delta(std::size_t anchor, int k) const {
    return (4 * (anchor % anchors_per_cell) + k) * plane + anchor / anchors_per_cell;
  }
};

struct Roi {
  Box box;
  int instance;
};

PixelEmbeddingField as_field(RoiFeatures f) {
  PixelEmbeddingField out;
  out.dim = f.channels;
  out.size = f.size;
  out.values = std::move(f.values);
  return out;
}

// Correspondences of `instance` whose pixel centre falls inside the ROI,
// mapped to ROI grid cells.
std::vector<CorrespondenceSample> roi_samples(const SyntheticScene& scene, const Roi& roi, int grid) {
  std::vector<CorrespondenceSample> out;
  const double w = roi.box.width(), h = roi.box.height();
  if (!(w > 0.0) || !(h > 0.0)) return out;
  for (const auto& p : scene.correspondences) {
    if (p.instance != roi.instance) continue;
    const double x = p.sample.col + 0.5, y = p.sample.row + 0.5;
    if (x < roi.box.x1 || x >= roi.box.x2 || y < roi.box.y1 || y >= roi.box.y2) continue;
    CorrespondenceSample s = p.sample;
    s.col = std::min(grid - 1, static_cast<int>((x - roi.box.x1) / w * grid));
    s.row = std::min(grid - 1, static_cast<int>((y - roi.box.y1) / h * grid));
    out.push_back(s);
  }
  return out;
}

std::vector<ScoredBox> scored_anchors(const ToyDetector& det, const BackboneOutputs& out, double image_size) {
  const auto& cfg = det.config();
  const HeadIndex hi{cfg.backbone.anchors_per_cell, out.objectness.shape.plane()};
  const ImageBounds bounds{image_size, image_size};
  std::vector<ScoredBox> sb;
  sb.reserve(det.anchors().size());
  for (std::size_t i = 0; i < det.anchors().size(); ++i) {
    const BoxDelta d{out.deltas.values[hi.delta(i, 0)], out.deltas.values[hi.delta(i, 1)],
                     out.deltas.values[hi.delta(i, 2)], out.deltas.values[hi.delta(i, 3)]};
    if (!d.finite()) continue;
    sb.push_back(ScoredBox{decode_box(det.anchors()[i], d, bounds), sigmoid(out.objectness.values[hi.objectness(i)])});
  }
  return sb;
}

}  // namespace

SceneLoss ToyDetector::scene_loss(const SyntheticScene& scene, bool want_grads) const {
  BackboneCache cache;
  const BackboneOutputs out = backbone_.forward(scene.image, &cache);
  const HeadIndex hi{config_.backbone.anchors_per_cell, out.objectness.shape.plane()};
  const auto labels = assign_anchor_labels(anchors_, scene.gt_boxes, config_.matcher);

  SceneLoss r;
  std::vector<double> g_obj(out.objectness.values.size(), 0.0);
  std::vector<double> g_delta(out.deltas.values.size(), 0.0);
  std::vector<double> g_embed;

  // Objectness: positives and negatives each contribute half.
  const std::size_t n_pos = labels.count(AnchorLabel::Positive);
  const std::size_t n_neg = labels.count(AnchorLabel::Negative);
  const double w_pos = n_pos ? (n_neg ? 0.5 : 1.0) / static_cast<double>(n_pos) : 0.0;
  const double w_neg = n_neg ? (n_pos ? 0.5 : 1.0) / static_cast<double>(n_neg) : 0.0;
  for (std::size_t i = 0; i < anchors_.size(); ++i) {
    const AnchorLabel l = labels.labels[i];
    if (l == AnchorLabel::Ignore) continue;
    const double target = l == AnchorLabel::Positive ? 1.0 : 0.0;
    const double w = l == AnchorLabel::Positive ? w_pos : w_neg;
    const double z = out.objectness.values[hi.objectness(i)];
    r.objectness += w * bce_with_logit(z, target);
    g_obj[hi.objectness(i)] = config_.lambda_obj * w * bce_with_logit_grad(z, target);
  }

  // Box regression on positives.
  if (n_pos) {
    const double inv = 1.0 / static_cast<double>(n_pos);
    const double beta = config_.smooth_l1_beta;
    for (std::size_t i = 0; i < anchors_.size(); ++i) {
      if (labels.labels[i] != AnchorLabel::Positive) continue;
      const BoxDelta t = encode_box(anchors_[i], scene.gt_boxes[*labels.matched_gt[i]]);
      const double target[4] = {t.tx, t.ty, t.tw, t.th};
      for (int k = 0; k < 4; ++k) {
        const double diff = out.deltas.values[hi.delta(i, k)] - target[k];
        r.box += inv * smooth_l1(diff, beta);
        g_delta[hi.delta(i, k)] = config_.lambda_box * inv * smooth_l1_grad(diff, beta);
      }
    }
  }

  Fnv branch;
  for (const auto& m : cache.active)
    for (char c : m) branch.byte(static_cast<unsigned char>(c));
  for (char c : cache.embed_hidden_active) branch.byte(static_cast<unsigned char>(c));

  EmbeddingMatrix grad_E(embedding_.vertices, embedding_.dim);
  if (config_.with_dense_head && !scene.correspondences.empty() && config_.lambda_cse > 0.0) {
    // ROIs: proposals matched to a ground-truth box.
    std::vector<Roi> rois;
    for (const auto& p : select_proposals(scored_anchors(*this, out, scene.size), config_.train_proposals)) {
      std::size_t best = 0;
      double best_iou = -1.0;
      for (std::size_t g = 0; g < scene.gt_boxes.size(); ++g) {
        const double v = iou(p.box, scene.gt_boxes[g]);
        if (v > best_iou) {
          best_iou = v;
          best = g;
        }
      }
      if (best_iou >= config_.dense_match_iou) rois.push_back({p.box, static_cast<int>(best)});
    }

    const RoiAlignParams rp{config_.dense_roi_size, config_.dense_sampling};
    std::vector<std::vector<CorrespondenceSample>> samples;
    std::size_t total = 0;
    for (const auto& roi : rois) {
      samples.push_back(roi_samples(scene, roi, rp.out_size));
      total += samples.back().size();
      branch.u64(samples.back().size());
      for (double c : {roi.box.x1, roi.box.y1, roi.box.x2, roi.box.y2}) {
        std::uint64_t bits;
        std::memcpy(&bits, &c, sizeof bits);
        branch.u64(bits);
      }
    }
    if (total) {
      const double inv = 1.0 / static_cast<double>(total);
      FeatureMap grad_map(out.embedding.shape);
      for (std::size_t k = 0; k < rois.size(); ++k) {
        if (samples[k].empty()) continue;
        const PixelEmbeddingField field = as_field(roi_align(out.embedding, rois[k].box, rp));
        PixelEmbeddingField grad_field(field.dim, field.size);
        r.cse += inv * cse_loss_accumulate(embedding_, field, samples[k], config_.lambda_cse * inv, grad_E,
                                           grad_field, config_.score);
        RoiFeatures gf(field.dim, field.size);
        gf.values = std::move(grad_field.values);
        roi_align_backward_accumulate(gf, rois[k].box, rp, grad_map);
      }
      g_embed = std::move(grad_map.values);
    }
  }

  r.total = config_.lambda_obj * r.objectness + config_.lambda_box * r.box + config_.lambda_cse * r.cse;
  r.branch = branch.h;
  if (want_grads) {
    r.grad_backbone = backbone_.backward(cache, g_obj, g_delta, g_embed).params;
    r.grad_embedding = std::move(grad_E.values);
  }
  return r;
}

void ToyDetector::sgd_step(const SceneLoss& loss) {
  const double lr = config_.learning_rate;
  auto p = backbone_.params();
  for (std::size_t i = 0; i < p.size(); ++i) p[i] -= lr * loss.grad_backbone[i];
  if (!loss.grad_embedding.empty())
    for (std::size_t i = 0; i < embedding_.values.size(); ++i)
      embedding_.values[i] -= lr * config_.embedding_lr_scale * loss.grad_embedding[i];
}

std::vector<Detection> ToyDetector::detect(const SyntheticScene& scene, std::int64_t image_id) const {
  const BackboneOutputs out = backbone_.forward(scene.image);
  const auto kept = select_proposals(scored_anchors(*this, out, scene.size), config_.eval_proposals);
  std::vector<Detection> dets;
  dets.reserve(kept.size());
  for (const auto& k : kept) dets.push_back(Detection{image_id, k.box, k.score, 1});
  return dets;
}

std::pair<double, std::size_t> ToyDetector::geodesic_error(const SyntheticScene& scene) const {
  const BackboneOutputs out = backbone_.forward(scene.image);
  const RoiAlignParams rp{config_.dense_roi_size, config_.dense_sampling};
  std::vector<std::vector<double>> dist(scene.mesh.vertex_count());
  double sum = 0.0;
  std::size_t n = 0;
  for (std::size_t g = 0; g < scene.gt_boxes.size(); ++g) {
    const Roi roi{scene.gt_boxes[g], static_cast<int>(g)};
    const auto samples = roi_samples(scene, roi, rp.out_size);
    if (samples.empty()) continue;
    const PixelEmbeddingField field = as_field(roi_align(out.embedding, roi.box, rp));
    for (const auto& s : samples) {
      if (dist[s.gt_vertex].empty()) dist[s.gt_vertex] = geodesic_distances(scene.mesh, s.gt_vertex);
      const auto post = vertex_posterior(embedding_, field.pixel(s.row, s.col), config_.score);
      sum += expected_geodesic_error(post, dist[s.gt_vertex]);
      ++n;
    }
  }
  return {sum, n};
}

ApSummary evaluate_detector(const ToyDetector& det, std::span<const SyntheticScene> scenes) {
  std::vector<Detection> dets;
  std::vector<GroundTruthBox> gts;
  for (std::size_t i = 0; i < scenes.size(); ++i) {
    const auto id = static_cast<std::int64_t>(i);
    const auto d = det.detect(scenes[i], id);
    dets.insert(dets.end(), d.begin(), d.end());
    for (const Box& b : scenes[i].gt_boxes) gts.push_back(GroundTruthBox{id, b, 1, false, b.area()});
  }
  return coco_summary(dets, gts);
}

TrainOutcome train_toy_detector(const TrainConfig& config, std::span<const SyntheticScene> train,
                                std::span<const SyntheticScene> validation) {
  config.validate();
  if (train.empty() || validation.empty()) fail_input("training needs non-empty train and validation splits");
  const int vertices = train.front().mesh.vertex_count();
  for (const auto& s : train)
    if (s.size != config.backbone.image_size) fail_input("scene size does not match backbone.image_size");
  for (const auto& s : validation)
    if (s.size != config.backbone.image_size) fail_input("scene size does not match backbone.image_size");

  const auto start = std::chrono::steady_clock::now();
  ToyDetector det(config, vertices);
  RunReport report;
  report.config = config;
  Rng order_rng(config.seed * 0x9E3779B97F4A7C15ull + 1);
  std::vector<std::size_t> order(train.size());

  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[order_rng.below(i)]);

    EpochLoss el;
    el.epoch = epoch;
    for (std::size_t idx : order) {
      const SceneLoss l = det.scene_loss(train[idx]);
      if (!std::isfinite(l.total))
        throw Error(ErrorKind::Divergence, "training diverged (non-finite loss) at epoch " + std::to_string(epoch));
      el.total += l.total;
      el.objectness += l.objectness;
      el.box += l.box;
      el.cse += l.cse;
      det.sgd_step(l);
      const auto finite = [](double v) { return std::isfinite(v); };
      if (!std::all_of(det.backbone().params().begin(), det.backbone().params().end(), finite) ||
          !std::all_of(det.embedding().values.begin(), det.embedding().values.end(), finite))
        throw Error(ErrorKind::Divergence, "training diverged (non-finite weights) at epoch " + std::to_string(epoch));
    }
    const double inv = 1.0 / static_cast<double>(train.size());
    el.total *= inv;
    el.objectness *= inv;
    el.box *= inv;
    el.cse *= inv;
    report.losses.push_back(el);

    if (epoch % config.eval_every == 0 || epoch == config.epochs)
      report.evaluations.push_back(EvalPoint{epoch, evaluate_detector(det, validation)});
  }
  report.final_summary = report.evaluations.back().summary;

  if (config.with_dense_head) {
    double sum = 0.0;
    std::size_t n = 0;
    for (const auto& s : validation) {
      const auto [es, en] = det.geodesic_error(s);
      sum += es;
      n += en;
    }
    report.mean_geodesic_error = n ? sum / static_cast<double>(n) : -1.0;
  }
  report.wall_time_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return TrainOutcome{std::move(report), std::move(det.backbone()), std::move(det.embedding())};
}

RunComparison compare_summaries(const ApSummary& a, const ApSummary& b) {
  auto d = [](double x, double y) { return (x < 0.0 || y < 0.0) ? std::nan("") : y - x; };
  return RunComparison{a, b,
                       ApSummary{d(a.ap, b.ap), d(a.ap50, b.ap50), d(a.ap75, b.ap75), d(a.ap_small, b.ap_small),
                                 d(a.ap_medium, b.ap_medium), d(a.ap_large, b.ap_large), d(a.ar, b.ar)}};
}

RunComparison compare_runs(const RunReport& a, const RunReport& b) {
  return compare_summaries(a.final_summary, b.final_summary);
}

nlohmann::json to_json(const ApSummary& s) {
  return {{"AP", s.ap},   {"AP50", s.ap50},       {"AP75", s.ap75}, {"APs", s.ap_small},
          {"APm", s.ap_medium}, {"APl", s.ap_large}, {"AR", s.ar}};
}

nlohmann::json to_json(const TrainConfig& c) {
  nlohmann::json j;
  j["epochs"] = c.epochs;
  j["learning_rate"] = c.learning_rate;
  j["embedding_lr_scale"] = c.embedding_lr_scale;
  j["seed"] = c.seed;
  j["with_dense_head"] = c.with_dense_head;
  j["lambda_obj"] = c.lambda_obj;
  j["lambda_box"] = c.lambda_box;
  j["lambda_cse"] = c.lambda_cse;
  j["eval_every"] = c.eval_every;
  j["smooth_l1_beta"] = c.smooth_l1_beta;
  j["dense_roi_size"] = c.dense_roi_size;
  j["dense_sampling"] = c.dense_sampling;
  j["dense_match_iou"] = c.dense_match_iou;
  j["score"] = c.score == ScoreKind::Dot ? "dot" : "neg_sq_dist";
  j["backbone"] = {{"image_size", c.backbone.image_size},
                   {"channels", c.backbone.channels},
                   {"strides", c.backbone.strides},
                   {"embed_dim", c.backbone.embed_dim},
                   {"embed_hidden", c.backbone.embed_hidden},
                   {"fuse_embed_hidden", c.backbone.fuse_embed_hidden}};
  j["anchors"] = {{"base_size", c.anchors.base_size},
                  {"scales", c.anchors.scales},
                  {"ratios", c.anchors.ratios},
                  {"stride", c.anchors.stride}};
  j["matcher"] = {{"positive", c.matcher.positive}, {"negative", c.matcher.negative}};
  auto prop = [](const ProposalParams& p) {
    return nlohmann::json{{"pre_nms_top_k", p.pre_nms_top_k},
                          {"post_nms_top_k", p.post_nms_top_k},
                          {"nms_threshold", p.nms_threshold}};
  };
  j["train_proposals"] = prop(c.train_proposals);
  j["eval_proposals"] = prop(c.eval_proposals);
  return j;
}

nlohmann::json to_json(const RunReport& r) {
  nlohmann::json j;
  j["config"] = to_json(r.config);
  j["losses"] = nlohmann::json::array();
  for (const auto& l : r.losses)
    j["losses"].push_back(
        {{"epoch", l.epoch}, {"total", l.total}, {"obj", l.objectness}, {"box", l.box}, {"cse", l.cse}});
  j["evaluations"] = nlohmann::json::array();
  for (const auto& e : r.evaluations) j["evaluations"].push_back({{"epoch", e.epoch}, {"summary", to_json(e.summary)}});
  j["final_summary"] = to_json(r.final_summary);
  if (r.mean_geodesic_error >= 0.0)
    j["mean_geodesic_error"] = r.mean_geodesic_error;
  else
    j["mean_geodesic_error"] = nullptr;
  j["wall_time_seconds"] = r.wall_time_seconds;
  return j;
}

std::string loss_csv(const RunReport& r) {
  std::ostringstream out;
  out.precision(17);
  out << "epoch,loss_total,loss_obj,loss_box,loss_cse\n";
  for (const auto& l : r.losses) out << l.epoch << ',' << l.total << ',' << l.objectness << ',' << l.box << ',' << l.cse << '\n';
  return out.str();
}

}  // namespace densedet
