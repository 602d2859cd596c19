#pragma once

#include <cmath>
#include <map>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "densedet/geometry.hpp"
#include "densedet/proposals.hpp"
#include "densedet/random.hpp"
#include "densedet/surface_embedding.hpp"

namespace testsupport {

using namespace densedet;

inline std::string fixture(const std::string& name) { return std::string(DENSEDET_FIXTURE_DIR) + "/" + name; }

// Box with integer-ish corners inside [0, extent]; width and height >= min_side.
inline densedet::Box random_box(densedet::Rng& rng, double extent, double min_side = 1.0) {
  const double w = rng.uniform(min_side, extent / 2);
  const double h = rng.uniform(min_side, extent / 2);
  const double x = rng.uniform(0.0, extent - w);
  const double y = rng.uniform(0.0, extent - h);
  return {x, y, x + w, y + h};
}

inline std::vector<double> random_vector(densedet::Rng& rng, std::size_t n, double lo = -1.0, double hi = 1.0) {
  std::vector<double> v(n);
  for (auto& x : v) x = rng.uniform(lo, hi);
  return v;
}

inline double dot(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

// Repeatedly pick the best remaining candidate by explicit comparison, then
// strike everything overlapping it.
inline std::vector<std::size_t> brute_nms(const std::vector<ScoredBox>& c, double thr) {
  const std::size_t n = c.size();
  std::vector<std::vector<double>> table(n, std::vector<double>(n));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) table[i][j] = iou(c[i].box, c[j].box);
  auto before = [&](std::size_t i, std::size_t j) {
    return c[i].score > c[j].score || (c[i].score == c[j].score && i < j);
  };
  std::vector<bool> alive(n, true);
  std::vector<std::size_t> keep;
  while (true) {
    std::size_t best = n;
    for (std::size_t i = 0; i < n; ++i)
      if (alive[i] && (best == n || before(i, best))) best = i;
    if (best == n) break;
    keep.push_back(best);
    alive[best] = false;
    for (std::size_t j = 0; j < n; ++j)
      if (alive[j] && table[best][j] > thr) alive[j] = false;
  }
  return keep;
}

inline std::vector<ScoredBox> random_candidates(Rng& rng, std::size_t n) {
  std::vector<ScoredBox> c;
  for (std::size_t i = 0; i < n; ++i) {
    ScoredBox s;
    s.box = testsupport::random_box(rng, 100.0, 0.5);
    // Coarse scores force ties; occasional exact duplicates.
    s.score = std::round(rng.uniform() * 20.0) / 20.0;
    if (i > 0 && rng.uniform() < 0.1) s.box = c[rng.below(i)].box;
    c.push_back(s);
  }
  return c;
}

inline std::vector<double> naive_posterior(const EmbeddingMatrix& E, std::span<const double> psi) {
  std::vector<double> w(E.vertices);
  double z = 0.0;
  for (int v = 0; v < E.vertices; ++v) {
    double d2 = 0.0;
    for (int k = 0; k < E.dim; ++k) d2 += (E.row(v)[k] - psi[k]) * (E.row(v)[k] - psi[k]);
    w[v] = std::exp(-d2);
    z += w[v];
  }
  for (auto& x : w) x /= z;
  return w;
}

inline EmbeddingMatrix random_E(Rng& rng, int v, int d, double scale) {
  EmbeddingMatrix E(v, d);
  for (auto& x : E.values) x = rng.uniform(-scale, scale);
  return E;
}

// Rank-sum form of the area under the ROC curve; ties count one half.
inline double mann_whitney(const std::vector<double>& pos, const std::vector<double>& neg) {
  double wins = 0.0;
  for (double p : pos)
    for (double n : neg) wins += p > n ? 1.0 : (p == n ? 0.5 : 0.0);
  return wins / (static_cast<double>(pos.size()) * static_cast<double>(neg.size()));
}

// Images holding at least n annotations of the category, counted directly
// from the raw JSON.
inline std::set<std::int64_t> qualifying_images(const nlohmann::json& j, std::int64_t cat, int n) {
  std::map<std::int64_t, int> count;
  for (const auto& a : j.at("annotations"))
    if (a.at("category_id").get<std::int64_t>() == cat) ++count[a.at("image_id").get<std::int64_t>()];
  std::set<std::int64_t> out;
  for (const auto& [img, c] : count)
    if (c >= n) out.insert(img);
  return out;
}

}  // namespace testsupport
