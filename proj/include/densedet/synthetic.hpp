#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "densedet/geometry.hpp"
#include "densedet/surface_embedding.hpp"

namespace densedet {

// Multi-channel float grid used for scene persistence.
struct Grid {
  int channels = 1;
  int height = 0;
  int width = 0;
  std::vector<double> values;
};

// "grid C H W" header line, then whitespace-separated values.
std::string write_grid(const Grid& g);
Grid parse_grid(const std::string& text);

struct Ellipse {
  double cx = 0.0;
  double cy = 0.0;
  double rx = 0.0;  // semi-axis along x
  double ry = 0.0;  // semi-axis along y

  Box bounding_box() const { return Box{cx - rx, cy - ry, cx + rx, cy + ry}; }
  // Elliptic angular parameter of an image point, in [0, 2*pi).
  double angle_of(double x, double y) const;
};

// Boundary pixel of instance `instance`; sample.row/col are image pixels.
struct ScenePoint {
  CorrespondenceSample sample;
  int instance = 0;
};

struct SyntheticScene {
  std::uint64_t seed = 0;
  int size = 0;                 // image is size x size, one channel
  std::vector<double> image;    // row-major
  std::vector<Ellipse> ellipses;
  std::vector<Box> gt_boxes;    // parallel to ellipses
  Mesh mesh = Mesh::circle(8);
  std::vector<ScenePoint> correspondences;
};

// Vertex of a closed V-gon matching angular parameter theta:
// round(theta * V / 2pi) mod V.
int vertex_for_angle(double theta, int vertices);

// One to three axis-aligned ellipse "persons" on a noisy background with
// boundary-band correspondences to a V-vertex circle mesh. Fully determined by
// the arguments. Requires vertices >= 8 and image_size >= 32.
SyntheticScene generate_synthetic_scene(std::uint64_t seed, int vertices, int image_size);

// Directory layout: image.grid, mesh.txt, scene.json.
void write_scene(const SyntheticScene& scene, const std::string& dir);
SyntheticScene read_scene(const std::string& dir);

}  // namespace densedet
