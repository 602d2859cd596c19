#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "densedet/geometry.hpp"

namespace densedet {

struct ScoredBox {
  Box box;
  double score = 0.0;  // in [0, 1]

  bool valid() const;
};

enum class AnchorLabel : unsigned char { Negative = 0, Positive = 1, Ignore = 2 };

struct AnchorLabels {
  std::vector<AnchorLabel> labels;
  std::vector<std::optional<std::size_t>> matched_gt;  // set iff Positive

  std::size_t count(AnchorLabel l) const;
};

struct MatcherThresholds {
  double positive = 0.7;
  double negative = 0.3;
};

// Indices sorted by descending score; equal scores keep ascending index.
std::vector<std::size_t> score_order(std::span<const ScoredBox> candidates);

// Greedy suppression. A candidate is removed when its IoU with an already
// kept box is strictly greater than `iou_threshold`. Returns kept indices in
// keep order.
std::vector<std::size_t> nms(std::span<const ScoredBox> candidates, double iou_threshold);

// Positive: IoU >= positive threshold with some gt, or the (possibly tied)
// best anchor for some gt it overlaps. Negative: best IoU < negative threshold.
// Everything else is ignored. matched_gt is the anchor's best gt (lowest index
// on ties).
AnchorLabels assign_anchor_labels(std::span<const Box> anchors, std::span<const Box> gts,
                                  const MatcherThresholds& thr = {});

struct ProposalParams {
  std::size_t pre_nms_top_k = 2000;
  std::size_t post_nms_top_k = 1000;
  double nms_threshold = 0.7;
};

// Top pre_nms_top_k by score, NMS, then at most post_nms_top_k survivors.
std::vector<ScoredBox> select_proposals(std::span<const ScoredBox> scored, const ProposalParams& params);

}  // namespace densedet
