#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace densedet {

struct MeshEdge {
  int a = 0;
  int b = 0;
  double length = 0.0;
};

// Connected surface graph. Vertex positions are 2D or 3D (all vertices share
// one dimension); distances on the surface follow the edge lengths.
class Mesh {
 public:
  // Throws Error(Input) on self-loops, non-positive lengths, bad indices, a
  // disconnected graph, or fewer than two vertices.
  Mesh(std::vector<std::vector<double>> positions, std::vector<MeshEdge> edges);

  int vertex_count() const { return static_cast<int>(positions_.size()); }
  const std::vector<std::vector<double>>& positions() const { return positions_; }
  const std::vector<MeshEdge>& edges() const { return edges_; }

  struct Neighbor {
    int vertex;
    double length;
  };
  std::span<const Neighbor> neighbors(int v) const;

  // Closed polygon of `vertices` points on the unit circle; vertex i sits at
  // angle 2*pi*i/vertices.
  static Mesh circle(int vertices);

 private:
  std::vector<std::vector<double>> positions_;
  std::vector<MeshEdge> edges_;
  std::vector<std::size_t> offsets_;
  std::vector<Neighbor> adjacency_;
};

// Text format: "mesh V E", V coordinate lines, E "i j length" lines.
Mesh parse_mesh(std::istream& in);
Mesh parse_mesh(const std::string& text);
std::string write_mesh(const Mesh& mesh);

// Single-source shortest paths along edges (Dijkstra).
std::vector<double> geodesic_distances(const Mesh& mesh, int source);

// V x D table; row X is the embedding of vertex X.
struct EmbeddingMatrix {
  int vertices = 0;
  int dim = 0;
  std::vector<double> values;

  EmbeddingMatrix() = default;
  EmbeddingMatrix(int v, int d) : vertices(v), dim(d), values(static_cast<std::size_t>(v) * d, 0.0) {}

  std::span<double> row(int v) { return {values.data() + static_cast<std::size_t>(v) * dim, static_cast<std::size_t>(dim)}; }
  std::span<const double> row(int v) const {
    return {values.data() + static_cast<std::size_t>(v) * dim, static_cast<std::size_t>(dim)};
  }

  // i.i.d. uniform entries in [-0.1, 0.1].
  static EmbeddingMatrix random(int vertices, int dim, std::uint64_t seed);
};

// D x P x P per-pixel embeddings over an ROI grid.
struct PixelEmbeddingField {
  int dim = 0;
  int size = 0;
  std::vector<double> values;

  PixelEmbeddingField() = default;
  PixelEmbeddingField(int d, int p) : dim(d), size(p), values(static_cast<std::size_t>(d) * p * p, 0.0) {}

  double at(int d, int row, int col) const { return values[(static_cast<std::size_t>(d) * size + row) * size + col]; }
  double& at(int d, int row, int col) { return values[(static_cast<std::size_t>(d) * size + row) * size + col]; }
  std::vector<double> pixel(int row, int col) const;
};

struct CorrespondenceSample {
  int row = 0;
  int col = 0;
  int gt_vertex = 0;
  std::int64_t image_id = 0;
};

enum class ScoreKind {
  NegSquaredDistance,  // s_X = -|e_X - psi|^2
  Dot,                 // s_X = <e_X, psi>
};

// Softmax over vertices of the per-vertex scores, max-subtracted.
std::vector<double> vertex_posterior(const EmbeddingMatrix& E, std::span<const double> psi,
                                     ScoreKind kind = ScoreKind::NegSquaredDistance);

struct CseLoss {
  double loss = 0.0;
  EmbeddingMatrix grad_E;
  PixelEmbeddingField grad_field;
};

// Mean negative log-likelihood of the ground-truth vertex over the samples,
// with exact gradients for E and the field.
CseLoss cse_loss(const EmbeddingMatrix& E, const PixelEmbeddingField& field,
                 std::span<const CorrespondenceSample> samples,
                 ScoreKind kind = ScoreKind::NegSquaredDistance);

// Adds `weight` times the summed (not averaged) per-sample gradients into
// caller-owned buffers and returns the summed negative log-likelihood.
double cse_loss_accumulate(const EmbeddingMatrix& E, const PixelEmbeddingField& field,
                           std::span<const CorrespondenceSample> samples, double weight,
                           EmbeddingMatrix& grad_E, PixelEmbeddingField& grad_field,
                           ScoreKind kind = ScoreKind::NegSquaredDistance);

// Sum over vertices of posterior mass times geodesic distance to gt_vertex.
double expected_geodesic_error(std::span<const double> posterior, int gt_vertex, const Mesh& mesh);

// Same, with precomputed distances from gt_vertex.
double expected_geodesic_error(std::span<const double> posterior, std::span<const double> distances_from_gt);

}  // namespace densedet
