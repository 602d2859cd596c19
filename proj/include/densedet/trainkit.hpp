#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "densedet/backbone.hpp"
#include "densedet/geometry.hpp"
#include "densedet/metrics.hpp"
#include "densedet/proposals.hpp"
#include "densedet/surface_embedding.hpp"
#include "densedet/synthetic.hpp"

namespace densedet {

// Quadratic below beta, linear above; continuous with a continuous first
// derivative at |x| = beta.
double smooth_l1(double x, double beta);
double smooth_l1_grad(double x, double beta);

// Binary cross-entropy on a logit, computed without overflow.
double bce_with_logit(double logit, double target);
double bce_with_logit_grad(double logit, double target);

struct DataConfig {
  int train_scenes = 48;
  int val_scenes = 24;
  int image_size = 32;
  int vertices = 64;
  std::uint64_t seed = 2024;
};

struct TrainConfig {
  int epochs = 100;
  double learning_rate = 0.003;
  double embedding_lr_scale = 256.0;  // multiplies learning_rate for the vertex embeddings E
  std::uint64_t seed = 1;
  bool with_dense_head = true;
  double lambda_obj = 1.0;
  double lambda_box = 1.0;
  double lambda_cse = 1.0;
  int eval_every = 10;

  BackboneConfig backbone{32, {8, 16, 16}, {1, 2, 2}, 9, 16, 16};
  AnchorSpec anchors{4.0, {2.0, 3.0, 4.0}, {0.5, 1.0, 2.0}, 4};
  MatcherThresholds matcher{};
  double smooth_l1_beta = 1.0 / 9.0;
  int dense_roi_size = 14;   // P for the dense head
  int dense_sampling = 2;
  double dense_match_iou = 0.5;  // proposal-to-gt IoU for a dense-head ROI
  ProposalParams train_proposals{256, 32, 0.7};
  ProposalParams eval_proposals{1000, 100, 0.5};
  ScoreKind score = ScoreKind::NegSquaredDistance;

  void validate() const;
};

struct EpochLoss {
  int epoch = 0;  // 1-based
  double total = 0.0;
  double objectness = 0.0;
  double box = 0.0;
  double cse = 0.0;

  bool operator==(const EpochLoss&) const = default;
};

struct EvalPoint {
  int epoch = 0;
  ApSummary summary;
  bool operator==(const EvalPoint&) const = default;
};

struct RunReport {
  TrainConfig config;
  std::vector<EpochLoss> losses;  // one per epoch
  std::vector<EvalPoint> evaluations;
  ApSummary final_summary;
  double mean_geodesic_error = -1.0;  // -1 when the dense head is off
  double wall_time_seconds = 0.0;

  // Everything except wall time.
  bool same_outcome(const RunReport& other) const;
};

struct TrainOutcome {
  RunReport report;
  TinyBackbone backbone;
  EmbeddingMatrix embedding;
};

std::vector<SyntheticScene> make_scenes(const DataConfig& data, bool validation);

// Per-scene loss and gradients for the current weights.
struct SceneLoss {
  double total = 0.0;
  double objectness = 0.0;
  double box = 0.0;
  double cse = 0.0;
  std::vector<double> grad_backbone;
  std::vector<double> grad_embedding;
  std::uint64_t branch = 0;  // hash of ReLU masks and the dense-head ROI set
};

class ToyDetector {
 public:
  ToyDetector(const TrainConfig& config, int vertices);

  const TrainConfig& config() const { return config_; }
  TinyBackbone& backbone() { return backbone_; }
  const TinyBackbone& backbone() const { return backbone_; }
  EmbeddingMatrix& embedding() { return embedding_; }
  const EmbeddingMatrix& embedding() const { return embedding_; }
  const std::vector<Box>& anchors() const { return anchors_; }

  SceneLoss scene_loss(const SyntheticScene& scene, bool want_grads = true) const;
  std::vector<Detection> detect(const SyntheticScene& scene, std::int64_t image_id) const;
  // Mean expected geodesic error over the scene's correspondences, using the
  // ground-truth boxes as ROIs. Returns {sum, count}.
  std::pair<double, std::size_t> geodesic_error(const SyntheticScene& scene) const;

  void sgd_step(const SceneLoss& loss);

 private:
  TrainConfig config_;
  TinyBackbone backbone_;
  EmbeddingMatrix embedding_;
  std::vector<Box> anchors_;
};

ApSummary evaluate_detector(const ToyDetector& det, std::span<const SyntheticScene> scenes);

// Plain SGD, one update per scene, scene order reshuffled each epoch from the
// run seed. Throws Error(Divergence) on a non-finite loss.
TrainOutcome train_toy_detector(const TrainConfig& config, std::span<const SyntheticScene> train,
                                std::span<const SyntheticScene> validation);

struct RunComparison {
  ApSummary a;
  ApSummary b;
  ApSummary delta;  // b - a field-wise; NaN where either side is undefined
};

RunComparison compare_summaries(const ApSummary& a, const ApSummary& b);
RunComparison compare_runs(const RunReport& a, const RunReport& b);

nlohmann::json to_json(const TrainConfig& c);
nlohmann::json to_json(const ApSummary& s);
nlohmann::json to_json(const RunReport& r);
// "epoch,loss_total,loss_obj,loss_box,loss_cse" CSV.
std::string loss_csv(const RunReport& r);

// Finite-difference audit of every manual gradient in the library.
struct AuditCheck {
  std::string name;
  double max_rel_error = 0.0;
  double threshold = 0.0;
  std::size_t checked = 0;
  std::size_t skipped = 0;
  bool passed() const { return max_rel_error < threshold; }
};

struct AuditOptions {
  std::uint64_t seed = 0;
  int seeds = 100;             // independent random instances per check
  std::string corrupt_check;   // test hook: perturbs this check's analytic gradient
};

std::vector<AuditCheck> run_gradient_audit(const AuditOptions& options);

}  // namespace densedet
