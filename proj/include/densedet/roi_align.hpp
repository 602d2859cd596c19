#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "densedet/geometry.hpp"

namespace densedet {

struct FeatureShape {
  int channels = 0;
  int height = 0;
  int width = 0;
  double spatial_scale = 1.0;  // feature pixels per image pixel

  std::size_t plane() const { return static_cast<std::size_t>(height) * width; }
  std::size_t size() const { return plane() * channels; }
  void validate() const;
  bool operator==(const FeatureShape&) const = default;
};

// C x H x W grid, channel-major. Feature pixel (y, x) covers the continuous
// square [x, x+1) x [y, y+1) and its value sits at the centre.
struct FeatureMap {
  FeatureShape shape;
  std::vector<double> values;

  FeatureMap() = default;
  explicit FeatureMap(FeatureShape s) : shape(s), values(s.size(), 0.0) {}
  FeatureMap(FeatureShape s, std::vector<double> v);

  double& at(int c, int y, int x) { return values[index(c, y, x)]; }
  double at(int c, int y, int x) const { return values[index(c, y, x)]; }
  std::size_t index(int c, int y, int x) const {
    return (static_cast<std::size_t>(c) * shape.height + y) * shape.width + x;
  }
};

// C x P x P pooled grid.
struct RoiFeatures {
  int channels = 0;
  int size = 0;
  std::vector<double> values;
  bool degenerate = false;  // zero-area ROI, output is all zeros

  RoiFeatures() = default;
  RoiFeatures(int c, int p) : channels(c), size(p), values(static_cast<std::size_t>(c) * p * p, 0.0) {}

  double& at(int c, int py, int px) { return values[(static_cast<std::size_t>(c) * size + py) * size + px]; }
  double at(int c, int py, int px) const { return values[(static_cast<std::size_t>(c) * size + py) * size + px]; }
};

struct RoiAlignParams {
  int out_size = 7;
  int sampling_ratio = 2;
};

// One bilinear tap: output bin `bin` reads plane offset `pixel` with `weight`
// (the 1/n^2 sample average already folded in).
struct RoiTap {
  std::size_t bin;
  std::size_t pixel;
  double weight;
};

// Sampling geometry for one ROI, shared by every channel. Empty when the
// scaled box has zero area.
std::vector<RoiTap> roi_taps(const FeatureShape& shape, const Box& box, const RoiAlignParams& params);

RoiFeatures roi_align(const FeatureMap& fm, const Box& box, const RoiAlignParams& params);

// Adjoint of roi_align for fixed geometry.
FeatureMap roi_align_backward(const RoiFeatures& grad_out, const FeatureShape& shape,
                              const Box& box, const RoiAlignParams& params);

// Same as roi_align_backward but adds into an existing gradient buffer.
void roi_align_backward_accumulate(const RoiFeatures& grad_out, const Box& box,
                                   const RoiAlignParams& params, FeatureMap& grad);

}  // namespace densedet
