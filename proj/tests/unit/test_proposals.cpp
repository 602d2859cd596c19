#include <algorithm>
#include <cmath>

#include "doctest.h"

#include "densedet/error.hpp"
#include "densedet/proposals.hpp"
#include "support.hpp"

using namespace densedet;
using testsupport::brute_nms;
using testsupport::random_candidates;

TEST_CASE("nms equals the brute-force suppressor on random instances") {
  Rng rng(2718);
  for (int inst = 0; inst < 500; ++inst) {
    const auto c = random_candidates(rng, rng.below(101));
    const double thr = 0.1 + 0.8 * rng.uniform();
    REQUIRE(nms(c, thr) == brute_nms(c, thr));
  }
}

TEST_CASE("nms threshold is strict and ties go to the lower index") {
  // IoU of these two is exactly 0.5.
  std::vector<ScoredBox> c{{{0, 0, 10, 10}, 0.9}, {{0, 0, 10, 5}, 0.8}};
  CHECK(nms(c, 0.5) == std::vector<std::size_t>{0, 1});
  CHECK(nms(c, 0.49) == std::vector<std::size_t>{0});

  std::vector<ScoredBox> tie{{{0, 0, 10, 10}, 0.5}, {{0, 0, 10, 10}, 0.5}, {{50, 50, 60, 60}, 0.5}};
  CHECK(nms(tie, 0.5) == std::vector<std::size_t>{0, 2});
  CHECK(nms(std::vector<ScoredBox>{}, 0.5).empty());
  CHECK_THROWS_AS(nms(c, 0.0), Error);
  std::vector<ScoredBox> bad{{{0, 0, 10, 10}, NAN}};
  CHECK_THROWS_AS(nms(bad, 0.5), Error);
}

TEST_CASE("nms properties: kept boxes are pairwise below threshold, every dropped box is covered") {
  Rng rng(99);
  for (int inst = 0; inst < 100; ++inst) {
    const auto c = random_candidates(rng, 60);
    const auto keep = nms(c, 0.5);
    for (std::size_t a = 0; a < keep.size(); ++a)
      for (std::size_t b = a + 1; b < keep.size(); ++b) CHECK(iou(c[keep[a]].box, c[keep[b]].box) <= 0.5);
    for (std::size_t i = 0; i < c.size(); ++i) {
      if (std::find(keep.begin(), keep.end(), i) != keep.end()) continue;
      bool covered = false;
      for (std::size_t k : keep) covered = covered || (iou(c[k].box, c[i].box) > 0.5 && c[k].score >= c[i].score);
      CHECK(covered);
    }
  }
}

TEST_CASE("anchor labels follow the brute-force rule") {
  Rng rng(5);
  for (int inst = 0; inst < 200; ++inst) {
    std::vector<Box> anchors, gts;
    for (int i = 0; i < 40; ++i) anchors.push_back(testsupport::random_box(rng, 64.0, 2.0));
    const int ng = static_cast<int>(rng.below(4));
    for (int i = 0; i < ng; ++i) gts.push_back(testsupport::random_box(rng, 64.0, 4.0));
    if (ng > 0 && rng.uniform() < 0.3) anchors[3] = gts[0];

    const auto labels = assign_anchor_labels(anchors, gts);
    REQUIRE(labels.labels.size() == anchors.size());
    for (std::size_t a = 0; a < anchors.size(); ++a) {
      double best = 0.0;
      std::size_t arg = 0;
      bool best_for_gt = false;
      for (std::size_t g = 0; g < gts.size(); ++g) {
        const double v = iou(anchors[a], gts[g]);
        if (v > best) best = v, arg = g;
        double col = 0.0;
        for (const auto& other : anchors) col = std::max(col, iou(other, gts[g]));
        if (col > 0.0 && v == col) best_for_gt = true;
      }
      AnchorLabel want = AnchorLabel::Ignore;
      if (best >= 0.7 || best_for_gt)
        want = AnchorLabel::Positive;
      else if (best < 0.3)
        want = AnchorLabel::Negative;
      CHECK(labels.labels[a] == want);
      if (want == AnchorLabel::Positive) CHECK(*labels.matched_gt[a] == arg);
    }
  }
}

TEST_CASE("anchor labels: every gt gets an anchor, ties all positive") {
  const std::vector<Box> anchors{{0, 0, 10, 10}, {20, 0, 30, 10}, {100, 100, 110, 110}};
  const std::vector<Box> gts{{5, 0, 25, 10}};  // overlaps anchors 0 and 1 equally
  const auto labels = assign_anchor_labels(anchors, gts);
  CHECK(labels.labels[0] == AnchorLabel::Positive);
  CHECK(labels.labels[1] == AnchorLabel::Positive);
  CHECK(labels.labels[2] == AnchorLabel::Negative);
  CHECK(labels.count(AnchorLabel::Positive) == 2);

  const auto none = assign_anchor_labels(anchors, std::vector<Box>{});
  CHECK(none.count(AnchorLabel::Negative) == 3);
  CHECK_THROWS_AS(assign_anchor_labels(anchors, gts, {0.3, 0.7}), Error);
}

TEST_CASE("select_proposals: top-k, nms, post-k") {
  std::vector<ScoredBox> c{
      {{0, 0, 10, 10}, 0.1}, {{0, 0, 10, 10}, 0.9}, {{1, 0, 11, 10}, 0.8}, {{40, 40, 50, 50}, 0.7}, {{80, 80, 90, 90}, 0.6},
  };
  const auto all = select_proposals(c, {10, 10, 0.5});
  REQUIRE(all.size() == 3);
  CHECK(all[0].score == 0.9);
  CHECK(all[1].score == 0.7);
  CHECK(all[2].score == 0.6);

  const auto post = select_proposals(c, {10, 2, 0.5});
  CHECK(post.size() == 2);

  // Only the two best survive the pre-NMS cut, and they overlap.
  const auto pre = select_proposals(c, {2, 10, 0.5});
  REQUIRE(pre.size() == 1);
  CHECK(pre[0].score == 0.9);
  CHECK_THROWS_AS(select_proposals(c, {0, 10, 0.5}), Error);
}
