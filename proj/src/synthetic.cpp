#include "densedet/synthetic.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <numbers>
#include <sstream>

#include "json.hpp"

#include "densedet/dataio.hpp"
#include "densedet/error.hpp"
#include "densedet/random.hpp"

namespace densedet {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;
// Normalised radius band treated as "boundary".
constexpr double kBandInner = 0.7;
constexpr std::size_t kMaxPointsPerInstance = 48;

std::string g17(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

std::string write_grid(const Grid& g) {
  std::string out = "grid " + std::to_string(g.channels) + " " + std::to_string(g.height) + " " +
                    std::to_string(g.width) + "\n";
  std::size_t i = 0;
  for (int c = 0; c < g.channels; ++c) {
    for (int y = 0; y < g.height; ++y) {
      for (int x = 0; x < g.width; ++x, ++i) {
        if (x) out += ' ';
        out += g17(g.values[i]);
      }
      out += '\n';
    }
  }
  return out;
}

Grid parse_grid(const std::string& text) {
  std::istringstream in(text);
  std::string tag;
  Grid g;
  if (!(in >> tag >> g.channels >> g.height >> g.width) || tag != "grid" || g.channels < 1 || g.height < 1 ||
      g.width < 1)
    fail_input("grid: expected header 'grid C H W'");
  const std::size_t n = static_cast<std::size_t>(g.channels) * g.height * g.width;
  g.values.reserve(n);
  for (double v; g.values.size() < n && in >> v;) g.values.push_back(v);
  if (g.values.size() != n)
    fail_input("grid: expected " + std::to_string(n) + " values, found " + std::to_string(g.values.size()));
  if (std::string extra; in >> extra) fail_input("grid: trailing data after the declared values");
  return g;
}

double Ellipse::angle_of(double x, double y) const {
  double t = std::atan2((y - cy) / ry, (x - cx) / rx);
  if (t < 0.0) t += kTwoPi;
  if (t >= kTwoPi) t -= kTwoPi;
  return t;
}

int vertex_for_angle(double theta, int vertices) {
  const long k = std::lround(theta * vertices / kTwoPi);
  return static_cast<int>(((k % vertices) + vertices) % vertices);
}

SyntheticScene generate_synthetic_scene(std::uint64_t seed, int vertices, int image_size) {
  if (vertices < 8) fail_input("synthetic scene needs V >= 8");
  if (image_size < 32) fail_input("synthetic scene needs image_size >= 32");

  SyntheticScene scene;
  scene.seed = seed;
  scene.size = image_size;
  scene.mesh = Mesh::circle(vertices);
  Rng rng(seed);
  const double s = image_size;

  const int wanted = rng.uniform_int(1, 3);
  for (int attempt = 0; attempt < 200 && static_cast<int>(scene.ellipses.size()) < wanted; ++attempt) {
    Ellipse e;
    e.rx = rng.uniform(0.12 * s, 0.28 * s);
    e.ry = rng.uniform(0.12 * s, 0.28 * s);
    e.cx = rng.uniform(e.rx + 1.0, s - e.rx - 1.0);
    e.cy = rng.uniform(e.ry + 1.0, s - e.ry - 1.0);
    bool clash = false;
    for (const auto& other : scene.ellipses)
      if (iou(other.bounding_box(), e.bounding_box()) > 0.3) clash = true;
    if (clash) continue;
    scene.ellipses.push_back(e);
    scene.gt_boxes.push_back(e.bounding_box());
  }

  scene.image.assign(static_cast<std::size_t>(image_size) * image_size, 0.0);
  for (int y = 0; y < image_size; ++y) {
    for (int x = 0; x < image_size; ++x) {
      const double px = x + 0.5, py = y + 0.5;
      double v = rng.uniform(0.0, 0.3);
      for (const auto& e : scene.ellipses) {
        const double u = (px - e.cx) / e.rx, w = (py - e.cy) / e.ry;
        if (u * u + w * w <= 1.0) v = 0.6 + rng.uniform(-0.1, 0.1);
      }
      scene.image[static_cast<std::size_t>(y) * image_size + x] = v;
    }
  }

  for (std::size_t inst = 0; inst < scene.ellipses.size(); ++inst) {
    const Ellipse& e = scene.ellipses[inst];
    std::vector<ScenePoint> band;
    for (int y = 0; y < image_size; ++y) {
      for (int x = 0; x < image_size; ++x) {
        const double px = x + 0.5, py = y + 0.5;
        const double u = (px - e.cx) / e.rx, w = (py - e.cy) / e.ry;
        const double rho = std::sqrt(u * u + w * w);
        if (rho < kBandInner || rho > 1.0) continue;
        ScenePoint p;
        p.sample.row = y;
        p.sample.col = x;
        p.sample.gt_vertex = vertex_for_angle(e.angle_of(px, py), vertices);
        p.sample.image_id = static_cast<std::int64_t>(seed);
        p.instance = static_cast<int>(inst);
        band.push_back(p);
      }
    }
    // Even subsample, deterministic.
    const std::size_t n = band.size();
    const std::size_t take = std::min(n, kMaxPointsPerInstance);
    for (std::size_t k = 0; k < take; ++k) scene.correspondences.push_back(band[k * n / take]);
  }
  return scene;
}

void write_scene(const SyntheticScene& scene, const std::string& dir) {
  std::filesystem::create_directories(dir);
  Grid g{1, scene.size, scene.size, scene.image};
  write_text_file(dir + "/image.grid", write_grid(g));
  write_text_file(dir + "/mesh.txt", write_mesh(scene.mesh));

  nlohmann::json j;
  j["seed"] = scene.seed;
  j["image_size"] = scene.size;
  j["ellipses"] = nlohmann::json::array();
  for (const auto& e : scene.ellipses) j["ellipses"].push_back({e.cx, e.cy, e.rx, e.ry});
  j["boxes"] = nlohmann::json::array();
  for (const auto& b : scene.gt_boxes) j["boxes"].push_back({b.x1, b.y1, b.x2, b.y2});
  j["correspondences"] = nlohmann::json::array();
  for (const auto& p : scene.correspondences)
    j["correspondences"].push_back(
        {{"row", p.sample.row}, {"col", p.sample.col}, {"vertex", p.sample.gt_vertex}, {"instance", p.instance}});
  write_text_file(dir + "/scene.json", j.dump(1) + "\n");
}

SyntheticScene read_scene(const std::string& dir) {
  SyntheticScene scene;
  const Grid g = parse_grid(read_text_file(dir + "/image.grid"));
  if (g.channels != 1 || g.height != g.width) fail_input("scene image must be a single-channel square grid");
  scene.size = g.height;
  scene.image = g.values;
  scene.mesh = parse_mesh(read_text_file(dir + "/mesh.txt"));

  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_text_file(dir + "/scene.json"));
    scene.seed = j.at("seed").get<std::uint64_t>();
    if (j.at("image_size").get<int>() != scene.size) fail_input("scene.json image_size does not match image.grid");
    for (const auto& e : j.at("ellipses"))
      scene.ellipses.push_back(Ellipse{e.at(0).get<double>(), e.at(1).get<double>(), e.at(2).get<double>(),
                                       e.at(3).get<double>()});
    for (const auto& b : j.at("boxes"))
      scene.gt_boxes.push_back(make_box(b.at(0).get<double>(), b.at(1).get<double>(), b.at(2).get<double>(),
                                        b.at(3).get<double>()));
    for (const auto& c : j.at("correspondences")) {
      ScenePoint p;
      p.sample.row = c.at("row").get<int>();
      p.sample.col = c.at("col").get<int>();
      p.sample.gt_vertex = c.at("vertex").get<int>();
      p.sample.image_id = static_cast<std::int64_t>(scene.seed);
      p.instance = c.at("instance").get<int>();
      scene.correspondences.push_back(p);
    }
  } catch (const nlohmann::json::exception& e) {
    fail_input(std::string("scene.json: ") + e.what());
  }
  if (scene.ellipses.size() != scene.gt_boxes.size()) fail_input("scene.json: ellipses and boxes differ in count");
  for (std::size_t i = 0; i < scene.correspondences.size(); ++i) {
    const ScenePoint& p = scene.correspondences[i];
    if (p.sample.row < 0 || p.sample.row >= scene.size || p.sample.col < 0 || p.sample.col >= scene.size ||
        p.sample.gt_vertex < 0 || p.sample.gt_vertex >= scene.mesh.vertex_count() || p.instance < 0 ||
        p.instance >= static_cast<int>(scene.gt_boxes.size()))
      fail_input("scene.json: correspondence " + std::to_string(i) + " is out of range");
  }
  return scene;
}

}  // namespace densedet
