#include "densedet/proposals.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "densedet/error.hpp"
#include "densedet/kernels.hpp"

namespace densedet {

bool ScoredBox::valid() const {
  return box.valid() && std::isfinite(score) && score >= 0.0 && score <= 1.0;
}

std::size_t AnchorLabels::count(AnchorLabel l) const {
  return static_cast<std::size_t>(std::count(labels.begin(), labels.end(), l));
}

std::vector<std::size_t> score_order(std::span<const ScoredBox> candidates) {
  std::vector<std::size_t> order(candidates.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return candidates[a].score > candidates[b].score;
  });
  return order;
}

std::vector<std::size_t> nms(std::span<const ScoredBox> candidates, double iou_threshold) {
  if (!(iou_threshold > 0.0 && iou_threshold <= 1.0)) fail_input("nms threshold must lie in (0, 1]");
  for (std::size_t i = 0; i < candidates.size(); ++i)
    if (!candidates[i].valid()) fail_input("nms candidate " + std::to_string(i) + " is invalid");

  const auto order = score_order(candidates);
  std::vector<char> removed(candidates.size(), 0);
  std::vector<std::size_t> keep;
  for (std::size_t oi = 0; oi < order.size(); ++oi) {
    const std::size_t i = order[oi];
    if (removed[i]) continue;
    keep.push_back(i);
    const Box& kept = candidates[i].box;
    for (std::size_t oj = oi + 1; oj < order.size(); ++oj) {
      const std::size_t j = order[oj];
      if (!removed[j] && iou(kept, candidates[j].box) > iou_threshold) removed[j] = 1;
    }
  }
  return keep;
}

AnchorLabels assign_anchor_labels(std::span<const Box> anchors, std::span<const Box> gts,
                                  const MatcherThresholds& thr) {
  if (!(thr.positive >= thr.negative)) fail_input("positive threshold must be >= negative threshold");
  if (!(thr.positive > 0.0 && thr.positive < 1.0) || !(thr.negative > 0.0 && thr.negative < 1.0))
    fail_input("matcher thresholds must lie in (0, 1)");

  const std::size_t na = anchors.size();
  const std::size_t ng = gts.size();
  AnchorLabels out;
  out.labels.assign(na, AnchorLabel::Negative);
  out.matched_gt.assign(na, std::nullopt);
  if (ng == 0 || na == 0) return out;

  const auto table = kernels::omp::iou_matrix(anchors, gts);

  std::vector<double> best_for_gt(ng, -1.0);
  for (std::size_t a = 0; a < na; ++a)
    for (std::size_t g = 0; g < ng; ++g) best_for_gt[g] = std::max(best_for_gt[g], table[a * ng + g]);

  for (std::size_t a = 0; a < na; ++a) {
    const double* row = table.data() + a * ng;
    std::size_t arg = 0;
    bool is_best_for_some_gt = false;
    for (std::size_t g = 0; g < ng; ++g) {
      if (row[g] > row[arg]) arg = g;
      if (best_for_gt[g] > 0.0 && row[g] == best_for_gt[g]) is_best_for_some_gt = true;
    }
    const double best = row[arg];
    if (best >= thr.positive || is_best_for_some_gt) {
      out.labels[a] = AnchorLabel::Positive;
      out.matched_gt[a] = arg;
    } else if (best < thr.negative) {
      out.labels[a] = AnchorLabel::Negative;
    } else {
      out.labels[a] = AnchorLabel::Ignore;
    }
  }
  return out;
}

std::vector<ScoredBox> select_proposals(std::span<const ScoredBox> scored, const ProposalParams& params) {
  if (params.pre_nms_top_k < 1 || params.post_nms_top_k < 1) fail_input("proposal top-k values must be >= 1");
  const auto order = score_order(scored);
  const std::size_t take = std::min(params.pre_nms_top_k, order.size());
  std::vector<ScoredBox> top;
  top.reserve(take);
  for (std::size_t i = 0; i < take; ++i) top.push_back(scored[order[i]]);

  const auto keep = nms(top, params.nms_threshold);
  std::vector<ScoredBox> out;
  out.reserve(std::min(keep.size(), params.post_nms_top_k));
  for (std::size_t i = 0; i < keep.size() && out.size() < params.post_nms_top_k; ++i) out.push_back(top[keep[i]]);
  return out;
}

}  // namespace densedet
