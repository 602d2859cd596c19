#include <cmath>
#include <filesystem>
#include <numbers>

#include "doctest.h"

#include "densedet/error.hpp"
#include "densedet/synthetic.hpp"
#include "support.hpp"

using namespace densedet;

TEST_CASE("vertex_for_angle against an angle sweep") {
  for (int V : {8, 13, 64}) {
    for (int k = 0; k < 3600; ++k) {
      const double theta = 2 * std::numbers::pi * k / 3600.0;
      // Nearest vertex by circular angular distance.
      int best = 0;
      double best_d = 1e9;
      for (int v = 0; v < V; ++v) {
        double d = std::abs(theta - 2 * std::numbers::pi * v / V);
        d = std::min(d, 2 * std::numbers::pi - d);
        if (d < best_d - 1e-12) best_d = d, best = v;
      }
      const int got = vertex_for_angle(theta, V);
      if (got != best) {
        // Only exact midpoints may disagree.
        const double half = std::numbers::pi / V;
        CHECK(std::abs(best_d - half) < 1e-9);
      }
    }
  }
  CHECK(vertex_for_angle(2 * std::numbers::pi - 1e-9, 8) == 0);
}

TEST_CASE("ellipse angle parameter") {
  const Ellipse e{10, 20, 4, 2};
  CHECK(e.angle_of(14, 20) == doctest::Approx(0.0));
  CHECK(e.angle_of(10, 22) == doctest::Approx(std::numbers::pi / 2));
  CHECK(e.angle_of(6, 20) == doctest::Approx(std::numbers::pi));
  CHECK(e.angle_of(10, 18) == doctest::Approx(3 * std::numbers::pi / 2));
  CHECK(e.bounding_box() == Box{6, 18, 14, 22});
}

TEST_CASE("synthetic scenes: deterministic and well formed") {
  for (std::uint64_t seed = 0; seed < 40; ++seed) {
    const SyntheticScene a = generate_synthetic_scene(seed, 16, 32);
    const SyntheticScene b = generate_synthetic_scene(seed, 16, 32);
    CHECK(a.image == b.image);
    REQUIRE(a.gt_boxes.size() == a.ellipses.size());
    CHECK(a.gt_boxes.size() >= 1);
    CHECK(a.gt_boxes.size() <= 3);
    CHECK(a.image.size() == 32u * 32u);
    CHECK(a.mesh.vertex_count() == 16);
    for (std::size_t i = 0; i < a.gt_boxes.size(); ++i) {
      const Box& box = a.gt_boxes[i];
      CHECK(box.x1 >= 0.0);
      CHECK(box.x2 <= 32.0);
      for (std::size_t j = 0; j < i; ++j) CHECK(iou(box, a.gt_boxes[j]) <= 0.3);
    }
    std::vector<int> per_instance(a.gt_boxes.size(), 0);
    for (const auto& p : a.correspondences) {
      ++per_instance[p.instance];
      const Ellipse& e = a.ellipses[p.instance];
      const double px = p.sample.col + 0.5, py = p.sample.row + 0.5;
      const double u = (px - e.cx) / e.rx, w = (py - e.cy) / e.ry;
      CHECK(u * u + w * w <= 1.0);
      CHECK(p.sample.gt_vertex == vertex_for_angle(e.angle_of(px, py), 16));
      // Points sit inside their instance's box.
      CHECK(a.gt_boxes[p.instance].x1 <= px);
      CHECK(px <= a.gt_boxes[p.instance].x2);
    }
    for (int c : per_instance) {
      CHECK(c > 0);
      CHECK(c <= 48);
    }
  }
  CHECK_THROWS_AS(generate_synthetic_scene(1, 7, 32), Error);
  CHECK_THROWS_AS(generate_synthetic_scene(1, 8, 31), Error);
}

TEST_CASE("scene persistence round trip") {
  const SyntheticScene s = generate_synthetic_scene(5, 12, 40);
  const auto dir = std::filesystem::temp_directory_path() / "densedet_scene_test";
  std::filesystem::remove_all(dir);
  write_scene(s, dir.string());
  const SyntheticScene back = read_scene(dir.string());
  CHECK(back.image == s.image);
  CHECK(back.gt_boxes == s.gt_boxes);
  CHECK(back.mesh.vertex_count() == 12);
  REQUIRE(back.correspondences.size() == s.correspondences.size());
  for (std::size_t i = 0; i < s.correspondences.size(); ++i) {
    CHECK(back.correspondences[i].sample.gt_vertex == s.correspondences[i].sample.gt_vertex);
    CHECK(back.correspondences[i].instance == s.correspondences[i].instance);
  }
  std::filesystem::remove_all(dir);
}

TEST_CASE("grid format") {
  Grid g{2, 1, 2, {0.1, -2.5, 3e-20, 4}};
  const Grid back = parse_grid(write_grid(g));
  CHECK(back.values == g.values);
  CHECK(back.channels == 2);
  CHECK_THROWS_AS(parse_grid("grid 1 2 2\n1 2 3\n"), Error);
  CHECK_THROWS_AS(parse_grid("grid 1 1 1\n1 2\n"), Error);
  CHECK_THROWS_AS(parse_grid("img 1 1 1\n1\n"), Error);
}
