#include "densedet/roi_align.hpp"

#include <cmath>
#include <string>

#include "densedet/error.hpp"

namespace densedet {

void FeatureShape::validate() const {
  if (channels < 1 || height < 1 || width < 1) fail_input("feature map dimensions must be >= 1");
  if (!(spatial_scale > 0.0) || !std::isfinite(spatial_scale))
    fail_input("feature map spatial_scale must be positive");
}

FeatureMap::FeatureMap(FeatureShape s, std::vector<double> v) : shape(s), values(std::move(v)) {
  shape.validate();
  if (values.size() != shape.size())
    fail_input("feature map holds " + std::to_string(values.size()) + " values, expected " +
               std::to_string(shape.size()));
}

namespace {

void check_params(const RoiAlignParams& p) {
  if (p.out_size < 1) fail_input("roi_align output size must be >= 1");
  if (p.sampling_ratio < 1) fail_input("roi_align sampling ratio must be >= 1");
}

// Appends the (up to) four in-bounds bilinear corners of continuous point
// (y, x). Corners outside the map are dropped, which is the same as reading 0.
void push_bilinear(std::vector<RoiTap>& taps, std::size_t bin, double y, double x, double scale,
                   const FeatureShape& shape) {
  const double u = y - 0.5;
  const double v = x - 0.5;
  const double fy = std::floor(u);
  const double fx = std::floor(v);
  const double ly = u - fy;
  const double lx = v - fx;
  const long y0 = static_cast<long>(fy);
  const long x0 = static_cast<long>(fx);
  const double wy[2] = {1.0 - ly, ly};
  const double wx[2] = {1.0 - lx, lx};
  for (int dy = 0; dy < 2; ++dy) {
    const long yy = y0 + dy;
    if (yy < 0 || yy >= shape.height) continue;
    for (int dx = 0; dx < 2; ++dx) {
      const long xx = x0 + dx;
      if (xx < 0 || xx >= shape.width) continue;
      const double w = wy[dy] * wx[dx] * scale;
      if (w == 0.0) continue;
      taps.push_back(RoiTap{bin, static_cast<std::size_t>(yy) * shape.width + static_cast<std::size_t>(xx), w});
    }
  }
}

}  // namespace

std::vector<RoiTap> roi_taps(const FeatureShape& shape, const Box& box, const RoiAlignParams& params) {
  check_params(params);
  if (!box.valid()) fail_input("roi_align requires a valid box");
  const double s = shape.spatial_scale;
  const double x1 = box.x1 * s;
  const double y1 = box.y1 * s;
  const double roi_w = box.x2 * s - x1;
  const double roi_h = box.y2 * s - y1;
  std::vector<RoiTap> taps;
  if (!(roi_w > 0.0) || !(roi_h > 0.0)) return taps;

  const int p = params.out_size;
  const int n = params.sampling_ratio;
  const double bin_w = roi_w / p;
  const double bin_h = roi_h / p;
  const double inv_count = 1.0 / (static_cast<double>(n) * n);
  taps.reserve(static_cast<std::size_t>(p) * p * n * n * 4);
  for (int py = 0; py < p; ++py) {
    for (int px = 0; px < p; ++px) {
      const std::size_t bin = static_cast<std::size_t>(py) * p + px;
      for (int iy = 0; iy < n; ++iy) {
        const double y = y1 + py * bin_h + (iy + 0.5) * bin_h / n;
        for (int ix = 0; ix < n; ++ix) {
          const double x = x1 + px * bin_w + (ix + 0.5) * bin_w / n;
          push_bilinear(taps, bin, y, x, inv_count, shape);
        }
      }
    }
  }
  return taps;
}

RoiFeatures roi_align(const FeatureMap& fm, const Box& box, const RoiAlignParams& params) {
  fm.shape.validate();
  const auto taps = roi_taps(fm.shape, box, params);
  const int p = params.out_size;
  RoiFeatures out(fm.shape.channels, p);
  const double s = fm.shape.spatial_scale;
  out.degenerate = !(box.x2 * s - box.x1 * s > 0.0) || !(box.y2 * s - box.y1 * s > 0.0);
  const std::size_t bins = static_cast<std::size_t>(p) * p;
  const std::size_t plane = fm.shape.plane();
  for (int c = 0; c < fm.shape.channels; ++c) {
    const double* src = fm.values.data() + c * plane;
    double* dst = out.values.data() + c * bins;
    for (const RoiTap& t : taps) dst[t.bin] += t.weight * src[t.pixel];
  }
  return out;
}

void roi_align_backward_accumulate(const RoiFeatures& grad_out, const Box& box,
                                   const RoiAlignParams& params, FeatureMap& grad) {
  grad.shape.validate();
  if (grad_out.channels != grad.shape.channels || grad_out.size != params.out_size ||
      grad_out.values.size() != static_cast<std::size_t>(grad_out.channels) * grad_out.size * grad_out.size)
    fail_input("roi_align_backward: upstream gradient shape does not match the forward geometry");
  const auto taps = roi_taps(grad.shape, box, params);
  const std::size_t bins = static_cast<std::size_t>(params.out_size) * params.out_size;
  const std::size_t plane = grad.shape.plane();
  for (int c = 0; c < grad.shape.channels; ++c) {
    const double* up = grad_out.values.data() + c * bins;
    double* dst = grad.values.data() + c * plane;
    for (const RoiTap& t : taps) dst[t.pixel] += t.weight * up[t.bin];
  }
}

FeatureMap roi_align_backward(const RoiFeatures& grad_out, const FeatureShape& shape,
                              const Box& box, const RoiAlignParams& params) {
  shape.validate();
  FeatureMap grad(shape);
  roi_align_backward_accumulate(grad_out, box, params, grad);
  return grad;
}

}  // namespace densedet
