#include "densedet/kernels.hpp"

#include <algorithm>

namespace densedet::kernels::serial {

std::vector<double> iou_matrix(std::span<const Box> rows, std::span<const Box> cols) {
  std::vector<double> out(rows.size() * cols.size());
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < cols.size(); ++j) out[i * cols.size() + j] = iou(rows[i], cols[j]);
  return out;
}

std::vector<RoiFeatures> roi_align_batch(const FeatureMap& fm, std::span<const Box> boxes,
                                         const RoiAlignParams& params) {
  std::vector<RoiFeatures> out;
  out.reserve(boxes.size());
  for (const Box& b : boxes) out.push_back(roi_align(fm, b, params));
  return out;
}

void conv3x3_forward(const ConvShape& s, std::span<const double> input,
                     std::span<const double> weight, std::span<const double> bias,
                     std::span<double> output) {
  const int oh = s.out_height();
  const int ow = s.out_width();
  const int k = ConvShape::kKernel;
  for (int oc = 0; oc < s.out_channels; ++oc) {
    for (int oy = 0; oy < oh; ++oy) {
      for (int ox = 0; ox < ow; ++ox) {
        double acc = bias[oc];
        for (int ic = 0; ic < s.in_channels; ++ic) {
          for (int ky = 0; ky < k; ++ky) {
            const int iy = oy * s.stride - ConvShape::kPad + ky;
            if (iy < 0 || iy >= s.in_height) continue;
            for (int kx = 0; kx < k; ++kx) {
              const int ix = ox * s.stride - ConvShape::kPad + kx;
              if (ix < 0 || ix >= s.in_width) continue;
              acc += weight[((oc * s.in_channels + ic) * k + ky) * k + kx] *
                     input[(ic * s.in_height + iy) * s.in_width + ix];
            }
          }
        }
        output[(oc * oh + oy) * ow + ox] = acc;
      }
    }
  }
}

void conv3x3_backward(const ConvShape& s, std::span<const double> input,
                      std::span<const double> weight, std::span<const double> grad_output,
                      const ConvGrads& grads) {
  const int oh = s.out_height();
  const int ow = s.out_width();
  const int k = ConvShape::kKernel;
  const bool want_input = !grads.input.empty();
  if (want_input) std::fill(grads.input.begin(), grads.input.end(), 0.0);
  for (int oc = 0; oc < s.out_channels; ++oc) {
    for (int oy = 0; oy < oh; ++oy) {
      for (int ox = 0; ox < ow; ++ox) {
        const double g = grad_output[(oc * oh + oy) * ow + ox];
        grads.bias[oc] += g;
        for (int ic = 0; ic < s.in_channels; ++ic) {
          for (int ky = 0; ky < k; ++ky) {
            const int iy = oy * s.stride - ConvShape::kPad + ky;
            if (iy < 0 || iy >= s.in_height) continue;
            for (int kx = 0; kx < k; ++kx) {
              const int ix = ox * s.stride - ConvShape::kPad + kx;
              if (ix < 0 || ix >= s.in_width) continue;
              const std::size_t wi = ((oc * s.in_channels + ic) * k + ky) * k + kx;
              const std::size_t ii = (ic * s.in_height + iy) * s.in_width + ix;
              grads.weight[wi] += g * input[ii];
              if (want_input) grads.input[ii] += g * weight[wi];
            }
          }
        }
      }
    }
  }
}

}  // namespace densedet::kernels::serial
