#pragma once

#include <cstdint>
#include <limits>
#include <span>
#include <vector>

#include "densedet/geometry.hpp"

namespace densedet {

struct Detection {
  std::int64_t image_id = 0;
  Box box;
  double score = 0.0;
  std::int64_t category_id = 1;
};

struct GroundTruthBox {
  std::int64_t image_id = 0;
  Box box;
  std::int64_t category_id = 1;
  bool iscrowd = false;
  double area = 0.0;  // COCO-supplied area when present, else box area
};

enum class MatchFlag : unsigned char { TruePositive, FalsePositive, Ignored };

// Inclusive area interval in square pixels.
struct AreaRange {
  double lo = 0.0;
  double hi = 1e10;

  bool contains(double area) const { return area >= lo && area <= hi; }
};

inline constexpr AreaRange kAreaAll{0.0, 1e10};
inline constexpr AreaRange kAreaSmall{0.0, 32.0 * 32.0};
inline constexpr AreaRange kAreaMedium{32.0 * 32.0, 96.0 * 96.0};
inline constexpr AreaRange kAreaLarge{96.0 * 96.0, 1e10};

struct MatchResult {
  std::vector<MatchFlag> det_flags;  // parallel to the input detections
  std::vector<bool> gt_matched;      // parallel to the input ground truth
};

// COCO greedy matching, per image. Detections are visited by descending
// score (ties by input index); each takes the unmatched ground truth of
// highest IoU >= iou_thr, preferring regular boxes over ignored ones.
// Crowd regions use intersection over detection area and may absorb any
// number of detections. Ground truth outside `range` (and crowd) is ignored;
// detections matched to ignored boxes, or unmatched and outside `range`,
// are flagged Ignored.
MatchResult match_detections(std::span<const Detection> dets, std::span<const GroundTruthBox> gts,
                             double iou_thr, AreaRange range = kAreaAll);

// 101-point interpolated AP over flags already sorted by descending score.
// Ignored entries are skipped. Returns 0 when total_gt is 0.
double average_precision(std::span<const MatchFlag> flags_by_score, std::size_t total_gt);

inline constexpr double kNoGroundTruth = -1.0;

struct ApSummary {
  double ap = kNoGroundTruth;
  double ap50 = kNoGroundTruth;
  double ap75 = kNoGroundTruth;
  double ap_small = kNoGroundTruth;
  double ap_medium = kNoGroundTruth;
  double ap_large = kNoGroundTruth;
  double ar = kNoGroundTruth;

  // Fields from published percentages, e.g. {47.9, 80.9, ...}.
  static ApSummary from_percent(double ap, double ap50, double ap75, double aps, double apm, double apl,
                                double ar = kNoGroundTruth * 100.0);
  bool operator==(const ApSummary&) const = default;
};

struct EvalOptions {
  std::vector<double> iou_thresholds = default_iou_thresholds();
  std::size_t max_dets_per_image = 100;

  // start, start+step, ..., up to and including stop; each value is rounded
  // to 1e-6 so that decimal thresholds compare exactly.
  static std::vector<double> iou_sweep(double start, double stop, double step);
  static std::vector<double> default_iou_thresholds() { return iou_sweep(0.5, 0.95, 0.05); }
};

// Detailed per-threshold output behind an ApSummary.
struct EvalBreakdown {
  std::vector<double> iou_thresholds;
  std::vector<double> ap_all;     // per threshold, area all
  std::vector<double> recall_all; // per threshold, area all
  std::size_t gt_count = 0;       // non-ignored, area all
};

// Single-category COCO summary. Fields whose ground-truth set is empty are
// kNoGroundTruth.
ApSummary coco_summary(std::span<const Detection> dets, std::span<const GroundTruthBox> gts,
                       const EvalOptions& options = {}, EvalBreakdown* breakdown = nullptr);

struct RocPoint {
  double threshold = 0.0;  // +inf for the origin, -inf for an appended (1,1)
  double fpr = 0.0;
  double tpr = 0.0;
};

struct RocCurve {
  std::vector<RocPoint> points;
  double auc = 0.0;
  double best_accuracy = 0.0;
  double best_accuracy_threshold = 0.0;
  std::size_t positives = 0;  // detections labelled TP
  std::size_t negatives = 0;  // detections labelled FP
};

// Pooled over all images. TPR and FPR are both relative to the detection
// set: TP count / all TP detections and FP count / all FP detections.
RocCurve roc_auc(std::span<const Detection> dets, std::span<const GroundTruthBox> gts, double iou_thr);

double trapezoid_auc(std::span<const RocPoint> points);

}  // namespace densedet
