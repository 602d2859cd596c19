#include <algorithm>
#include <cmath>

#include "doctest.h"
#include "json.hpp"

#include "densedet/dataio.hpp"
#include "densedet/error.hpp"
#include "densedet/metrics.hpp"
#include "densedet/report.hpp"
#include "support.hpp"

using namespace densedet;
using testsupport::mann_whitney;
using testsupport::fixture;

namespace {

struct Loaded {
  std::vector<GroundTruthBox> gts;
  std::vector<Detection> dets;
};

Loaded load_pair(const std::string& gt, const std::string& dets) {
  const CocoDataset ds = parse_coco(read_text_file(fixture(gt)));
  Loaded l;
  l.gts = ground_truth(ds, 1);
  for (const auto& d : read_detections(read_text_file(fixture(dets))))
    if (d.category_id == 1) l.dets.push_back(d);
  return l;
}

}  // namespace

TEST_CASE("hand-traced fixture") {
  const Loaded l = load_pair("eval_gt.json", "eval_dets.json");
  REQUIRE(l.gts.size() == 10);
  REQUIRE(l.dets.size() == 10);
  EvalBreakdown br;
  const ApSummary s = coco_summary(l.dets, l.gts, {}, &br);

  const std::vector<double> per_t{73.875, 73.875, 73.875, 51.875, 51.875, 51.875, 51.875, 34.0, 34.0, 34.0};
  REQUIRE(br.ap_all.size() == 10);
  for (std::size_t i = 0; i < 10; ++i) CHECK(br.ap_all[i] == per_t[i] / 101.0);
  CHECK(br.gt_count == 9);

  double ap = 0.0;
  for (double v : per_t) ap += v / 101.0;
  CHECK(s.ap == ap / 10.0);
  CHECK(s.ap50 == 73.875 / 101.0);
  CHECK(s.ap75 == 51.875 / 101.0);
  CHECK(s.ap_small == doctest::Approx((3 * 56 + 7 * 50.5) / 1010.0).epsilon(1e-14));
  CHECK(s.ap_medium == doctest::Approx((3 * 76 + 4 * 51 + 3 * 13) / 1010.0).epsilon(1e-14));
  CHECK(s.ap_large == doctest::Approx((3 * 101 + 7 * 51) / 1010.0).epsilon(1e-14));
  CHECK(s.ar == doctest::Approx(53.0 / 90.0).epsilon(1e-14));
  CHECK(render_evaluation(s) == "AP AP50 AP75 APs APm APl\n52.6 73.1 51.4 51.6 46.6 65.3\nAR 58.9\n");
}

TEST_CASE("perfect detector scores 100 everywhere") {
  const Loaded l = load_pair("eval_gt.json", "perfect_dets.json");
  const ApSummary s = coco_summary(l.dets, l.gts);
  CHECK(summary_row(s) == "100.0 100.0 100.0 100.0 100.0 100.0");
  CHECK(s.ar == 1.0);
}

TEST_CASE("one ground truth, a false positive ranked above the true positive: AP is one half") {
  const std::vector<GroundTruthBox> gts{{1, {0, 0, 10, 10}, 1, false, 100}};
  const std::vector<Detection> dets{{1, {50, 50, 60, 60}, 0.9}, {1, {0, 0, 10, 10}, 0.8}};
  const ApSummary s = coco_summary(dets, gts);
  CHECK(s.ap == 0.5);
  CHECK(s.ap50 == 0.5);
  CHECK(s.ar == 1.0);
  CHECK(s.ap_medium == kNoGroundTruth);
  CHECK(s.ap_large == kNoGroundTruth);
  CHECK(summary_row(s) == "50.0 50.0 50.0 50.0 — —");

  const std::vector<MatchFlag> flags{MatchFlag::FalsePositive, MatchFlag::TruePositive};
  CHECK(average_precision(flags, 1) == 0.5);
}

TEST_CASE("coco_summary agrees with pycocotools on random cases") {
  const auto cases = nlohmann::json::parse(read_text_file(fixture("reference_cases.json")));
  REQUIRE(cases.size() >= 50);
  for (std::size_t ci = 0; ci < cases.size(); ++ci) {
    const auto& c = cases[ci];
    INFO("case " << ci);
    const CocoDataset ds = parse_coco(c.at("gt").dump());
    const auto gts = ground_truth(ds, 1);
    const auto dets = read_detections(c.at("dets").dump());
    const ApSummary s = coco_summary(dets, gts);
    const std::vector<double> got{s.ap, s.ap50, s.ap75, s.ap_small, s.ap_medium, s.ap_large, s.ar};
    for (std::size_t k = 0; k < 7; ++k) {
      CAPTURE(k);
      CHECK(got[k] == doctest::Approx(c.at("stats")[k].get<double>()).epsilon(1e-12));
    }
  }
}

TEST_CASE("matching: crowd absorbs many detections, a taken box is not reused") {
  const std::vector<GroundTruthBox> gts{{1, {0, 0, 100, 100}, 1, true, 10000}, {1, {200, 200, 210, 210}, 1, false, 100}};
  const std::vector<Detection> dets{
      {1, {10, 10, 20, 20}, 0.9}, {1, {30, 30, 40, 40}, 0.8}, {1, {200, 200, 210, 210}, 0.7}, {1, {200, 200, 210, 210}, 0.6}};
  const auto m = match_detections(dets, gts, 0.5);
  CHECK(m.det_flags[0] == MatchFlag::Ignored);
  CHECK(m.det_flags[1] == MatchFlag::Ignored);
  CHECK(m.det_flags[2] == MatchFlag::TruePositive);
  CHECK(m.det_flags[3] == MatchFlag::FalsePositive);
  CHECK(m.gt_matched[1]);

  // A regular box is preferred over an ignored one even at lower IoU.
  const std::vector<GroundTruthBox> mixed{{1, {0, 0, 10, 10}, 1, false, 100}, {1, {0, 0, 10, 12}, 1, false, 5000}};
  const std::vector<Detection> one{{1, {0, 0, 10, 12}, 0.9}};
  const auto mm = match_detections(one, mixed, 0.5, kAreaSmall);
  CHECK(mm.det_flags[0] == MatchFlag::TruePositive);
  CHECK(mm.gt_matched[0]);

  CHECK_THROWS_AS(match_detections(one, mixed, 0.0), Error);
}

TEST_CASE("max detections per image keeps the best-scored") {
  const std::vector<GroundTruthBox> gts{{1, {0, 0, 10, 10}, 1, false, 100}};
  std::vector<Detection> dets;
  for (int i = 0; i < 5; ++i) dets.push_back({1, {50.0 + i, 50, 60.0 + i, 60}, 0.9 - 0.01 * i});
  dets.push_back({1, {0, 0, 10, 10}, 0.1});
  EvalOptions opt;
  opt.max_dets_per_image = 5;
  CHECK(coco_summary(dets, gts, opt).ar == 0.0);
  opt.max_dets_per_image = 6;
  CHECK(coco_summary(dets, gts, opt).ar == 1.0);
}

TEST_CASE("evaluation inputs are validated") {
  std::vector<GroundTruthBox> gts{{1, {0, 0, 10, 10}, 1, false, 100}, {1, {0, 0, 10, 10}, 2, false, 100}};
  CHECK_THROWS_AS(coco_summary(std::vector<Detection>{}, gts), Error);
  EvalOptions empty;
  empty.iou_thresholds.clear();
  CHECK_THROWS_AS(coco_summary(std::vector<Detection>{}, std::vector<GroundTruthBox>{}, empty), Error);
  const ApSummary none = coco_summary(std::vector<Detection>{}, std::vector<GroundTruthBox>{});
  CHECK(none.ap == kNoGroundTruth);
  CHECK(summary_row(none) == "— — — — — —");
}

TEST_CASE("iou sweep") {
  const auto t = EvalOptions::iou_sweep(0.5, 0.95, 0.05);
  REQUIRE(t.size() == 10);
  CHECK(t[1] == 0.55);
  CHECK(t[9] == 0.95);
  CHECK(EvalOptions::iou_sweep(0.5, 0.5, 0.05) == std::vector<double>{0.5});
  CHECK_THROWS_AS(EvalOptions::iou_sweep(0.5, 0.4, 0.05), Error);
  CHECK_THROWS_AS(EvalOptions::iou_sweep(0.5, 0.9, 0.0), Error);
}

TEST_CASE("roc: perfect separation, label shuffle, rank-sum oracle") {
  const Loaded sep = load_pair("roc_gt.json", "roc_separated_dets.json");
  const RocCurve a = roc_auc(sep.dets, sep.gts, 0.5);
  CHECK(a.auc == 1.0);
  CHECK(a.positives == 40);
  CHECK(a.negatives == 40);
  CHECK(a.best_accuracy == 1.0);

  const Loaded shuf = load_pair("roc_gt.json", "roc_shuffled_dets.json");
  const RocCurve b = roc_auc(shuf.dets, shuf.gts, 0.5);
  CHECK(std::abs(b.auc - 0.5) <= 0.05);

  for (const char* name : {"roc_shuffled_dets.json", "roc_curve_dets.json", "roc_separated_dets.json"}) {
    const Loaded l = load_pair("roc_gt.json", name);
    const RocCurve c = roc_auc(l.dets, l.gts, 0.5);
    const auto m = match_detections(l.dets, l.gts, 0.5);
    std::vector<double> pos, neg;
    for (std::size_t i = 0; i < l.dets.size(); ++i)
      (m.det_flags[i] == MatchFlag::TruePositive ? pos : neg).push_back(l.dets[i].score);
    CHECK(std::abs(c.auc - mann_whitney(pos, neg)) <= 1e-12);
    CHECK(std::abs(c.auc - trapezoid_auc(c.points)) <= 1e-12);
    CHECK(c.points.front().fpr == 0.0);
    CHECK(c.points.back().tpr == 1.0);
    for (std::size_t i = 1; i < c.points.size(); ++i) {
      CHECK(c.points[i].fpr >= c.points[i - 1].fpr);
      CHECK(c.points[i].tpr >= c.points[i - 1].tpr);
    }
  }
}

TEST_CASE("trapezoid area by independent summation") {
  Rng rng(6);
  for (int inst = 0; inst < 200; ++inst) {
    std::vector<RocPoint> pts{{INFINITY, 0, 0}};
    double x = 0, y = 0;
    const int n = 1 + rng.below(30);
    for (int i = 0; i < n; ++i) {
      x = std::min(1.0, x + rng.uniform(0, 2.0 / n));
      y = std::min(1.0, y + rng.uniform(0, 2.0 / n));
      pts.push_back({0.0, x, y});
    }
    pts.push_back({-INFINITY, 1, 1});
    // Rectangle below each segment plus the triangle above it.
    double want = 0.0;
    for (std::size_t i = 1; i < pts.size(); ++i) {
      const double w = pts[i].fpr - pts[i - 1].fpr;
      want += w * std::min(pts[i].tpr, pts[i - 1].tpr) + 0.5 * w * std::abs(pts[i].tpr - pts[i - 1].tpr);
    }
    CHECK(std::abs(trapezoid_auc(pts) - want) <= 1e-12);
  }
}

TEST_CASE("roc input errors") {
  const std::vector<Detection> dets{{1, {0, 0, 10, 10}, 0.9}};
  CHECK_THROWS_AS(roc_auc(dets, std::vector<GroundTruthBox>{}, 0.5), Error);
  const std::vector<GroundTruthBox> crowd_only{{1, {0, 0, 10, 10}, 1, true, 100}};
  CHECK_THROWS_AS(roc_auc(dets, crowd_only, 0.5), Error);
}
