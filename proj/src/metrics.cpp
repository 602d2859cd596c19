#include "densedet/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include "densedet/error.hpp"

namespace densedet {

namespace {

struct ImageGroup {
  std::vector<std::size_t> dets;
  std::vector<std::size_t> gts;
};

std::map<std::int64_t, ImageGroup> group_by_image(std::span<const Detection> dets,
                                                  std::span<const GroundTruthBox> gts) {
  std::map<std::int64_t, ImageGroup> groups;
  for (std::size_t i = 0; i < dets.size(); ++i) groups[dets[i].image_id].dets.push_back(i);
  for (std::size_t i = 0; i < gts.size(); ++i) groups[gts[i].image_id].gts.push_back(i);
  return groups;
}

void sort_by_score(std::vector<std::size_t>& idx, std::span<const Detection> dets) {
  std::stable_sort(idx.begin(), idx.end(),
                   [&](std::size_t a, std::size_t b) { return dets[a].score > dets[b].score; });
}

double match_iou(const Box& det, const GroundTruthBox& gt) {
  if (!gt.iscrowd) return iou(det, gt.box);
  const double a = det.area();
  return a > 0.0 ? intersection_area(det, gt.box) / a : 0.0;
}

// Matches one image's detections (already in score order) against its ground
// truth. Writes flags/matched through the global index vectors.
void match_image(std::span<const Detection> dets, std::span<const GroundTruthBox> gts,
                 const std::vector<std::size_t>& det_idx, const std::vector<std::size_t>& gt_idx,
                 double iou_thr, AreaRange range, MatchResult& out) {
  // Regular ground truth first, ignored after, original order otherwise.
  std::vector<std::pair<char, std::size_t>> order;
  order.reserve(gt_idx.size());
  for (std::size_t g : gt_idx) order.emplace_back(gts[g].iscrowd || !range.contains(gts[g].area), g);
  std::stable_sort(order.begin(), order.end(),
                   [](const auto& a, const auto& b) { return a.first < b.first; });

  for (std::size_t d : det_idx) {
    double best = std::min(iou_thr, 1.0 - 1e-10);
    long m = -1;
    for (std::size_t k = 0; k < order.size(); ++k) {
      const auto [ignored, g] = order[k];
      if (out.gt_matched[g] && !gts[g].iscrowd) continue;
      if (m > -1 && !order[m].first && ignored) break;
      const double v = match_iou(dets[d].box, gts[g]);
      if (v < best) continue;
      best = v;
      m = static_cast<long>(k);
    }
    if (m == -1) {
      out.det_flags[d] = range.contains(dets[d].box.area()) ? MatchFlag::FalsePositive : MatchFlag::Ignored;
      continue;
    }
    out.gt_matched[order[m].second] = true;
    out.det_flags[d] = order[m].first ? MatchFlag::Ignored : MatchFlag::TruePositive;
  }
}

}  // namespace

MatchResult match_detections(std::span<const Detection> dets, std::span<const GroundTruthBox> gts,
                             double iou_thr, AreaRange range) {
  if (!(iou_thr > 0.0 && iou_thr <= 1.0)) fail_input("match IoU threshold must lie in (0, 1]");
  MatchResult out;
  out.det_flags.assign(dets.size(), MatchFlag::FalsePositive);
  out.gt_matched.assign(gts.size(), false);
  for (auto& [image, group] : group_by_image(dets, gts)) {
    sort_by_score(group.dets, dets);
    match_image(dets, gts, group.dets, group.gts, iou_thr, range, out);
  }
  return out;
}

double average_precision(std::span<const MatchFlag> flags_by_score, std::size_t total_gt) {
  if (total_gt == 0) return 0.0;
  std::vector<double> precision;
  std::vector<double> recall;
  std::size_t tp = 0, fp = 0;
  for (MatchFlag f : flags_by_score) {
    if (f == MatchFlag::Ignored) continue;
    (f == MatchFlag::TruePositive ? tp : fp) += 1;
    precision.push_back(static_cast<double>(tp) / static_cast<double>(tp + fp));
    recall.push_back(static_cast<double>(tp) / static_cast<double>(total_gt));
  }
  for (std::size_t i = precision.size(); i-- > 1;) precision[i - 1] = std::max(precision[i - 1], precision[i]);

  double sum = 0.0;
  for (int r = 0; r <= 100; ++r) {
    const double level = r == 100 ? 1.0 : r * 0.01;
    const auto it = std::lower_bound(recall.begin(), recall.end(), level);
    if (it != recall.end()) sum += precision[static_cast<std::size_t>(it - recall.begin())];
  }
  return sum / 101.0;
}

ApSummary ApSummary::from_percent(double ap, double ap50, double ap75, double aps, double apm, double apl,
                                  double ar) {
  auto f = [](double v) { return v < 0.0 ? kNoGroundTruth : v / 100.0; };
  return ApSummary{f(ap), f(ap50), f(ap75), f(aps), f(apm), f(apl), f(ar)};
}

std::vector<double> EvalOptions::iou_sweep(double start, double stop, double step) {
  if (!(step > 0.0) || !(start > 0.0) || !(stop <= 1.0) || stop < start)
    fail_input("IoU sweep needs 0 < start <= stop <= 1 and a positive step");
  std::vector<double> out;
  for (int i = 0;; ++i) {
    const double v = std::round((start + i * step) * 1e6) / 1e6;
    if (v > stop + 1e-9) break;
    out.push_back(v);
  }
  return out;
}

namespace {

struct ThresholdResult {
  double ap = kNoGroundTruth;
  double recall = kNoGroundTruth;
  std::size_t npig = 0;
};

ThresholdResult evaluate_at(std::span<const Detection> dets, std::span<const GroundTruthBox> gts,
                            const std::map<std::int64_t, ImageGroup>& groups, double thr, AreaRange range) {
  MatchResult m;
  m.det_flags.assign(dets.size(), MatchFlag::Ignored);
  m.gt_matched.assign(gts.size(), false);
  std::vector<std::size_t> concat;
  for (const auto& [image, group] : groups) {
    match_image(dets, gts, group.dets, group.gts, thr, range, m);
    concat.insert(concat.end(), group.dets.begin(), group.dets.end());
  }
  std::stable_sort(concat.begin(), concat.end(),
                   [&](std::size_t a, std::size_t b) { return dets[a].score > dets[b].score; });

  ThresholdResult r;
  for (const auto& g : gts)
    if (!g.iscrowd && range.contains(g.area)) ++r.npig;
  if (r.npig == 0) return r;

  std::vector<MatchFlag> flags;
  flags.reserve(concat.size());
  std::size_t tp = 0;
  for (std::size_t d : concat) {
    flags.push_back(m.det_flags[d]);
    if (m.det_flags[d] == MatchFlag::TruePositive) ++tp;
  }
  r.ap = average_precision(flags, r.npig);
  r.recall = static_cast<double>(tp) / static_cast<double>(r.npig);
  return r;
}

double mean_defined(const std::vector<double>& v) {
  double sum = 0.0;
  std::size_t n = 0;
  for (double x : v) {
    if (x < 0.0) continue;
    sum += x;
    ++n;
  }
  return n ? sum / static_cast<double>(n) : kNoGroundTruth;
}

}  // namespace

ApSummary coco_summary(std::span<const Detection> dets, std::span<const GroundTruthBox> gts,
                       const EvalOptions& options, EvalBreakdown* breakdown) {
  if (options.iou_thresholds.empty()) fail_input("coco_summary needs at least one IoU threshold");
  if (options.max_dets_per_image < 1) fail_input("max detections per image must be >= 1");
  for (std::size_t i = 1; i < gts.size(); ++i)
    if (gts[i].category_id != gts[0].category_id) fail_input("coco_summary evaluates a single category");

  auto groups = group_by_image(dets, gts);
  for (auto& [image, group] : groups) {
    sort_by_score(group.dets, dets);
    if (group.dets.size() > options.max_dets_per_image) group.dets.resize(options.max_dets_per_image);
  }

  auto sweep = [&](AreaRange range, std::vector<double>* ap_out, std::vector<double>* rec_out) {
    std::vector<double> aps, recalls;
    for (double thr : options.iou_thresholds) {
      const auto r = evaluate_at(dets, gts, groups, thr, range);
      aps.push_back(r.ap);
      recalls.push_back(r.recall);
    }
    if (ap_out) *ap_out = aps;
    if (rec_out) *rec_out = recalls;
    return std::pair{mean_defined(aps), mean_defined(recalls)};
  };

  ApSummary s;
  std::vector<double> ap_all, rec_all;
  std::tie(s.ap, s.ar) = sweep(kAreaAll, &ap_all, &rec_all);
  s.ap50 = evaluate_at(dets, gts, groups, 0.5, kAreaAll).ap;
  s.ap75 = evaluate_at(dets, gts, groups, 0.75, kAreaAll).ap;
  s.ap_small = sweep(kAreaSmall, nullptr, nullptr).first;
  s.ap_medium = sweep(kAreaMedium, nullptr, nullptr).first;
  s.ap_large = sweep(kAreaLarge, nullptr, nullptr).first;

  if (breakdown) {
    breakdown->iou_thresholds = options.iou_thresholds;
    breakdown->ap_all = ap_all;
    breakdown->recall_all = rec_all;
    breakdown->gt_count = 0;
    for (const auto& g : gts)
      if (!g.iscrowd) ++breakdown->gt_count;
  }
  return s;
}

double trapezoid_auc(std::span<const RocPoint> points) {
  double auc = 0.0;
  for (std::size_t i = 1; i < points.size(); ++i)
    auc += (points[i].fpr - points[i - 1].fpr) * 0.5 * (points[i].tpr + points[i - 1].tpr);
  return auc;
}

RocCurve roc_auc(std::span<const Detection> dets, std::span<const GroundTruthBox> gts, double iou_thr) {
  std::size_t regular = 0;
  for (const auto& g : gts)
    if (!g.iscrowd) ++regular;
  if (regular == 0) fail_input("roc_auc needs at least one non-crowd ground-truth box");
  if (dets.empty()) fail_input("roc_auc needs at least one detection");

  const auto match = match_detections(dets, gts, iou_thr);
  std::vector<std::size_t> order;
  for (std::size_t i = 0; i < dets.size(); ++i)
    if (match.det_flags[i] != MatchFlag::Ignored) order.push_back(i);
  sort_by_score(order, dets);

  RocCurve c;
  for (std::size_t i : order) (match.det_flags[i] == MatchFlag::TruePositive ? c.positives : c.negatives) += 1;
  const double np = static_cast<double>(c.positives);
  const double nn = static_cast<double>(c.negatives);
  const double total = np + nn;

  c.points.push_back({std::numeric_limits<double>::infinity(), 0.0, 0.0});
  c.best_accuracy = total > 0.0 ? nn / total : 0.0;
  c.best_accuracy_threshold = std::numeric_limits<double>::infinity();
  std::size_t tp = 0, fp = 0;
  for (std::size_t k = 0; k < order.size();) {
    const double score = dets[order[k]].score;
    for (; k < order.size() && dets[order[k]].score == score; ++k)
      (match.det_flags[order[k]] == MatchFlag::TruePositive ? tp : fp) += 1;
    c.points.push_back({score, nn > 0.0 ? fp / nn : 0.0, np > 0.0 ? tp / np : 0.0});
    const double acc = (static_cast<double>(tp) + (nn - static_cast<double>(fp))) / total;
    if (acc > c.best_accuracy) {
      c.best_accuracy = acc;
      c.best_accuracy_threshold = score;
    }
  }
  if (c.points.back().fpr != 1.0 || c.points.back().tpr != 1.0)
    c.points.push_back({-std::numeric_limits<double>::infinity(), 1.0, 1.0});
  c.auc = trapezoid_auc(c.points);
  return c;
}

}  // namespace densedet
