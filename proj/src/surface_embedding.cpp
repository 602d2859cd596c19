#include "densedet/surface_embedding.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <istream>
#include <limits>
#include <numbers>
#include <queue>
#include <sstream>

#include "densedet/error.hpp"
#include "densedet/random.hpp"

namespace densedet {

Mesh::Mesh(std::vector<std::vector<double>> positions, std::vector<MeshEdge> edges)
    : positions_(std::move(positions)), edges_(std::move(edges)) {
  const int v = vertex_count();
  if (v < 2) fail_input("mesh needs at least two vertices");
  const std::size_t dim = positions_.front().size();
  if (dim != 2 && dim != 3) fail_input("mesh vertex positions must be 2D or 3D");
  for (const auto& p : positions_) {
    if (p.size() != dim) fail_input("mesh vertices have inconsistent dimensions");
    for (double c : p)
      if (!std::isfinite(c)) fail_input("mesh vertex coordinate is not finite");
  }

  std::vector<std::size_t> degree(v, 0);
  for (std::size_t i = 0; i < edges_.size(); ++i) {
    const MeshEdge& e = edges_[i];
    if (e.a < 0 || e.a >= v || e.b < 0 || e.b >= v)
      fail_input("mesh edge " + std::to_string(i) + " references a missing vertex");
    if (e.a == e.b) fail_input("mesh edge " + std::to_string(i) + " is a self-loop");
    if (!(e.length > 0.0) || !std::isfinite(e.length))
      fail_input("mesh edge " + std::to_string(i) + " has a non-positive length");
    ++degree[e.a];
    ++degree[e.b];
  }

  offsets_.assign(v + 1, 0);
  for (int i = 0; i < v; ++i) offsets_[i + 1] = offsets_[i] + degree[i];
  adjacency_.resize(offsets_.back());
  std::vector<std::size_t> fill(offsets_.begin(), offsets_.end() - 1);
  for (const MeshEdge& e : edges_) {
    adjacency_[fill[e.a]++] = Neighbor{e.b, e.length};
    adjacency_[fill[e.b]++] = Neighbor{e.a, e.length};
  }

  std::vector<char> seen(v, 0);
  std::vector<int> stack{0};
  seen[0] = 1;
  int reached = 1;
  while (!stack.empty()) {
    const int cur = stack.back();
    stack.pop_back();
    for (const Neighbor& n : neighbors(cur)) {
      if (!seen[n.vertex]) {
        seen[n.vertex] = 1;
        ++reached;
        stack.push_back(n.vertex);
      }
    }
  }
  if (reached != v) fail_input("mesh graph is not connected");
}

std::span<const Mesh::Neighbor> Mesh::neighbors(int v) const {
  return {adjacency_.data() + offsets_[v], offsets_[v + 1] - offsets_[v]};
}

Mesh Mesh::circle(int vertices) {
  if (vertices < 3) fail_input("a closed contour needs at least three vertices");
  std::vector<std::vector<double>> pos;
  pos.reserve(vertices);
  for (int i = 0; i < vertices; ++i) {
    const double a = 2.0 * std::numbers::pi * i / vertices;
    pos.push_back({std::cos(a), std::sin(a)});
  }
  const double side = 2.0 * std::sin(std::numbers::pi / vertices);
  std::vector<MeshEdge> edges;
  edges.reserve(vertices);
  for (int i = 0; i < vertices; ++i) edges.push_back({i, (i + 1) % vertices, side});
  return Mesh(std::move(pos), std::move(edges));
}

namespace {

bool next_content_line(std::istream& in, std::string& line, int& line_no) {
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") != std::string::npos) return true;
  }
  return false;
}

[[noreturn]] void mesh_error(int line_no, const std::string& what) {
  fail_input("mesh line " + std::to_string(line_no) + ": " + what);
}

}  // namespace

Mesh parse_mesh(std::istream& in) {
  std::string line;
  int line_no = 0;
  if (!next_content_line(in, line, line_no)) fail_input("mesh: empty input");
  std::istringstream header(line);
  std::string tag;
  long nv = -1, ne = -1;
  if (!(header >> tag >> nv >> ne) || tag != "mesh" || nv < 0 || ne < 0)
    mesh_error(line_no, "expected header 'mesh V E'");
  if (std::string extra; header >> extra) mesh_error(line_no, "trailing tokens after header");

  std::vector<std::vector<double>> pos;
  pos.reserve(static_cast<std::size_t>(nv));
  for (long i = 0; i < nv; ++i) {
    if (!next_content_line(in, line, line_no))
      fail_input("mesh: header declares " + std::to_string(nv) + " vertices, found " + std::to_string(i));
    std::istringstream ls(line);
    std::vector<double> p;
    for (double c; ls >> c;) p.push_back(c);
    if (!ls.eof()) mesh_error(line_no, "malformed vertex coordinate");
    if (p.size() != 2 && p.size() != 3) mesh_error(line_no, "vertex needs 2 or 3 coordinates");
    pos.push_back(std::move(p));
  }

  std::vector<MeshEdge> edges;
  edges.reserve(static_cast<std::size_t>(ne));
  for (long i = 0; i < ne; ++i) {
    if (!next_content_line(in, line, line_no))
      fail_input("mesh: header declares " + std::to_string(ne) + " edges, found " + std::to_string(i));
    std::istringstream ls(line);
    MeshEdge e;
    if (!(ls >> e.a >> e.b >> e.length)) mesh_error(line_no, "expected 'i j length'");
    if (std::string extra; ls >> extra) mesh_error(line_no, "trailing tokens after edge");
    edges.push_back(e);
  }
  if (next_content_line(in, line, line_no)) mesh_error(line_no, "more records than the header declares");
  return Mesh(std::move(pos), std::move(edges));
}

Mesh parse_mesh(const std::string& text) {
  std::istringstream in(text);
  return parse_mesh(in);
}

std::string write_mesh(const Mesh& mesh) {
  std::ostringstream out;
  out << std::setprecision(17);
  out << "mesh " << mesh.vertex_count() << ' ' << mesh.edges().size() << '\n';
  for (const auto& p : mesh.positions()) {
    for (std::size_t i = 0; i < p.size(); ++i) out << (i ? " " : "") << p[i];
    out << '\n';
  }
  for (const MeshEdge& e : mesh.edges()) out << e.a << ' ' << e.b << ' ' << e.length << '\n';
  return out.str();
}

std::vector<double> geodesic_distances(const Mesh& mesh, int source) {
  const int v = mesh.vertex_count();
  if (source < 0 || source >= v) fail_input("geodesic source vertex out of range");
  std::vector<double> dist(v, std::numeric_limits<double>::infinity());
  using Item = std::pair<double, int>;
  std::priority_queue<Item, std::vector<Item>, std::greater<>> heap;
  dist[source] = 0.0;
  heap.emplace(0.0, source);
  while (!heap.empty()) {
    const auto [d, cur] = heap.top();
    heap.pop();
    if (d > dist[cur]) continue;
    for (const auto& n : mesh.neighbors(cur)) {
      const double nd = d + n.length;
      if (nd < dist[n.vertex]) {
        dist[n.vertex] = nd;
        heap.emplace(nd, n.vertex);
      }
    }
  }
  return dist;
}

EmbeddingMatrix EmbeddingMatrix::random(int vertices, int dim, std::uint64_t seed) {
  if (vertices < 1 || dim < 1) fail_input("embedding matrix needs positive dimensions");
  EmbeddingMatrix e(vertices, dim);
  Rng rng(seed);
  for (double& x : e.values) x = rng.uniform(-0.1, 0.1);
  return e;
}

std::vector<double> PixelEmbeddingField::pixel(int row, int col) const {
  std::vector<double> out(dim);
  for (int d = 0; d < dim; ++d) out[d] = at(d, row, col);
  return out;
}

namespace {

double vertex_score(std::span<const double> e, std::span<const double> psi, ScoreKind kind) {
  double s = 0.0;
  if (kind == ScoreKind::Dot) {
    for (std::size_t d = 0; d < e.size(); ++d) s += e[d] * psi[d];
    return s;
  }
  for (std::size_t d = 0; d < e.size(); ++d) {
    const double diff = e[d] - psi[d];
    s += diff * diff;
  }
  return -s;
}

// Fills `post` with the posterior and returns log-sum-exp of the scores.
double posterior_into(const EmbeddingMatrix& E, std::span<const double> psi, ScoreKind kind,
                      std::vector<double>& post) {
  post.resize(E.vertices);
  double top = -std::numeric_limits<double>::infinity();
  for (int x = 0; x < E.vertices; ++x) {
    post[x] = vertex_score(E.row(x), psi, kind);
    top = std::max(top, post[x]);
  }
  double z = 0.0;
  for (double& p : post) {
    p = std::exp(p - top);
    z += p;
  }
  for (double& p : post) p /= z;
  return top + std::log(z);
}

void check_embedding(const EmbeddingMatrix& E) {
  if (E.vertices < 1 || E.dim < 1 || E.values.size() != static_cast<std::size_t>(E.vertices) * E.dim)
    fail_input("embedding matrix has inconsistent dimensions");
  for (double x : E.values)
    if (!std::isfinite(x)) fail_input("embedding matrix holds a non-finite entry");
}

}  // namespace

std::vector<double> vertex_posterior(const EmbeddingMatrix& E, std::span<const double> psi, ScoreKind kind) {
  check_embedding(E);
  if (psi.size() != static_cast<std::size_t>(E.dim))
    fail_input("pixel embedding has dimension " + std::to_string(psi.size()) + ", expected " +
               std::to_string(E.dim));
  for (double x : psi)
    if (!std::isfinite(x)) fail_input("pixel embedding holds a non-finite entry");
  std::vector<double> post;
  posterior_into(E, psi, kind, post);
  return post;
}

double cse_loss_accumulate(const EmbeddingMatrix& E, const PixelEmbeddingField& field,
                           std::span<const CorrespondenceSample> samples, double weight,
                           EmbeddingMatrix& grad_E, PixelEmbeddingField& grad_field, ScoreKind kind) {
  check_embedding(E);
  if (field.dim != E.dim) fail_input("field dimension does not match the embedding matrix");
  if (grad_E.vertices != E.vertices || grad_E.dim != E.dim || grad_field.dim != field.dim ||
      grad_field.size != field.size)
    fail_input("gradient buffers do not match the inputs");
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const auto& s = samples[i];
    if (s.gt_vertex < 0 || s.gt_vertex >= E.vertices)
      fail_input("sample " + std::to_string(i) + " has gt_vertex " + std::to_string(s.gt_vertex) +
                 " outside [0, " + std::to_string(E.vertices) + ")");
    if (s.row < 0 || s.row >= field.size || s.col < 0 || s.col >= field.size)
      fail_input("sample " + std::to_string(i) + " lies outside the embedding grid");
  }

  const int dim = E.dim;
  std::vector<double> psi(dim), post, gpsi(dim);
  double total = 0.0;
  for (const auto& s : samples) {
    for (int d = 0; d < dim; ++d) psi[d] = field.at(d, s.row, s.col);
    const double lse = posterior_into(E, psi, kind, post);
    total += std::max(0.0, lse - vertex_score(E.row(s.gt_vertex), psi, kind));

    // dL/ds_X = p_X - [X == gt]
    std::fill(gpsi.begin(), gpsi.end(), 0.0);
    for (int x = 0; x < E.vertices; ++x) {
      const double ds = weight * (post[x] - (x == s.gt_vertex ? 1.0 : 0.0));
      const auto e = E.row(x);
      auto ge = grad_E.row(x);
      if (kind == ScoreKind::Dot) {
        for (int d = 0; d < dim; ++d) {
          ge[d] += ds * psi[d];
          gpsi[d] += ds * e[d];
        }
      } else {
        for (int d = 0; d < dim; ++d) {
          const double diff = e[d] - psi[d];
          ge[d] -= 2.0 * ds * diff;
          gpsi[d] += 2.0 * ds * diff;
        }
      }
    }
    for (int d = 0; d < dim; ++d) grad_field.at(d, s.row, s.col) += gpsi[d];
  }
  return total;
}

CseLoss cse_loss(const EmbeddingMatrix& E, const PixelEmbeddingField& field,
                 std::span<const CorrespondenceSample> samples, ScoreKind kind) {
  if (samples.empty()) fail_input("cse_loss needs at least one correspondence sample");
  CseLoss out{0.0, EmbeddingMatrix(E.vertices, E.dim), PixelEmbeddingField(field.dim, field.size)};
  const double inv_n = 1.0 / static_cast<double>(samples.size());
  out.loss = inv_n * cse_loss_accumulate(E, field, samples, inv_n, out.grad_E, out.grad_field, kind);
  return out;
}

double expected_geodesic_error(std::span<const double> posterior, std::span<const double> distances_from_gt) {
  if (posterior.size() != distances_from_gt.size()) fail_input("posterior length does not match the mesh");
  double sum = 0.0;
  for (double p : posterior) {
    if (!(p >= 0.0) || !std::isfinite(p)) fail_input("posterior holds a negative or non-finite entry");
    sum += p;
  }
  if (std::abs(sum - 1.0) > 1e-6) fail_input("posterior is not normalised (sums to " + std::to_string(sum) + ")");
  double err = 0.0;
  for (std::size_t i = 0; i < posterior.size(); ++i) err += posterior[i] * distances_from_gt[i];
  return err;
}

double expected_geodesic_error(std::span<const double> posterior, int gt_vertex, const Mesh& mesh) {
  if (gt_vertex < 0 || gt_vertex >= mesh.vertex_count()) fail_input("gt_vertex out of range");
  const auto dist = geodesic_distances(mesh, gt_vertex);
  return expected_geodesic_error(posterior, dist);
}

}  // namespace densedet
