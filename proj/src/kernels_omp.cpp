#include <omp.h>

#include <algorithm>

#include "densedet/kernels.hpp"
#include "densedet/parallel.hpp"

namespace densedet::kernels::omp {

std::vector<double> iou_matrix(std::span<const Box> rows, std::span<const Box> cols) {
  std::vector<double> out(rows.size() * cols.size());
  const long n = static_cast<long>(rows.size());
  const std::size_t m = cols.size();
#pragma omp parallel for schedule(static) num_threads(thread_count())
  for (long i = 0; i < n; ++i) {
    const Box a = rows[i];
    double* row = out.data() + i * m;
    for (std::size_t j = 0; j < m; ++j) row[j] = iou(a, cols[j]);
  }
  return out;
}

std::vector<RoiFeatures> roi_align_batch(const FeatureMap& fm, std::span<const Box> boxes,
                                         const RoiAlignParams& params) {
  std::vector<RoiFeatures> out(boxes.size());
  const long n = static_cast<long>(boxes.size());
#pragma omp parallel for schedule(dynamic, 1) num_threads(thread_count())
  for (long i = 0; i < n; ++i) out[i] = roi_align(fm, boxes[i], params);
  return out;
}

void conv3x3_forward(const ConvShape& s, std::span<const double> input,
                     std::span<const double> weight, std::span<const double> bias,
                     std::span<double> output) {
  const int oh = s.out_height();
  const int ow = s.out_width();
  const int k = ConvShape::kKernel;
  const int ic_n = s.in_channels;
  const int ih = s.in_height;
  const int iw = s.in_width;
#pragma omp parallel for collapse(2) schedule(static) num_threads(thread_count())
  for (int oc = 0; oc < s.out_channels; ++oc) {
    for (int oy = 0; oy < oh; ++oy) {
      const double* w_oc = weight.data() + static_cast<std::size_t>(oc) * ic_n * k * k;
      double* out_row = output.data() + (static_cast<std::size_t>(oc) * oh + oy) * ow;
      const int y0 = oy * s.stride - ConvShape::kPad;
      const int ky_lo = std::max(0, -y0);
      const int ky_hi = std::min(k, ih - y0);
      for (int ox = 0; ox < ow; ++ox) {
        const int x0 = ox * s.stride - ConvShape::kPad;
        const int kx_lo = std::max(0, -x0);
        const int kx_hi = std::min(k, iw - x0);
        double acc = bias[oc];
        for (int ic = 0; ic < ic_n; ++ic) {
          const double* in_c = input.data() + static_cast<std::size_t>(ic) * ih * iw;
          const double* w = w_oc + ic * k * k;
          for (int ky = ky_lo; ky < ky_hi; ++ky) {
            const double* in_row = in_c + static_cast<std::size_t>(y0 + ky) * iw + x0;
            for (int kx = kx_lo; kx < kx_hi; ++kx) acc += w[ky * k + kx] * in_row[kx];
          }
        }
        out_row[ox] = acc;
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
  const int ic_n = s.in_channels;
  const int ih = s.in_height;
  const int iw = s.in_width;
  const int stride = s.stride;
  const int pad = ConvShape::kPad;
  const int threads = thread_count();

  // Weight and bias gradients: one output channel per task.
#pragma omp parallel for schedule(static) num_threads(threads)
  for (int oc = 0; oc < s.out_channels; ++oc) {
    const double* g_oc = grad_output.data() + static_cast<std::size_t>(oc) * oh * ow;
    double bsum = 0.0;
    for (int i = 0; i < oh * ow; ++i) bsum += g_oc[i];
    grads.bias[oc] += bsum;
    for (int ic = 0; ic < ic_n; ++ic) {
      const double* in_c = input.data() + static_cast<std::size_t>(ic) * ih * iw;
      for (int ky = 0; ky < k; ++ky) {
        for (int kx = 0; kx < k; ++kx) {
          double acc = 0.0;
          for (int oy = 0; oy < oh; ++oy) {
            const int iy = oy * stride - pad + ky;
            if (iy < 0 || iy >= ih) continue;
            for (int ox = 0; ox < ow; ++ox) {
              const int ix = ox * stride - pad + kx;
              if (ix < 0 || ix >= iw) continue;
              acc += g_oc[oy * ow + ox] * in_c[iy * iw + ix];
            }
          }
          grads.weight[((static_cast<std::size_t>(oc) * ic_n + ic) * k + ky) * k + kx] += acc;
        }
      }
    }
  }

  if (grads.input.empty()) return;

  // Input gradient as a gather: every input pixel collects the outputs whose
  // receptive field covers it.
#pragma omp parallel for collapse(2) schedule(static) num_threads(threads)
  for (int ic = 0; ic < ic_n; ++ic) {
    for (int iy = 0; iy < ih; ++iy) {
      for (int ix = 0; ix < iw; ++ix) {
        double acc = 0.0;
        for (int oc = 0; oc < s.out_channels; ++oc) {
          const double* g_oc = grad_output.data() + static_cast<std::size_t>(oc) * oh * ow;
          const double* w = weight.data() + (static_cast<std::size_t>(oc) * ic_n + ic) * k * k;
          for (int ky = 0; ky < k; ++ky) {
            const int ty = iy + pad - ky;
            if (ty < 0 || ty % stride != 0) continue;
            const int oy = ty / stride;
            if (oy >= oh) continue;
            for (int kx = 0; kx < k; ++kx) {
              const int tx = ix + pad - kx;
              if (tx < 0 || tx % stride != 0) continue;
              const int ox = tx / stride;
              if (ox >= ow) continue;
              acc += g_oc[oy * ow + ox] * w[ky * k + kx];
            }
          }
        }
        grads.input[(static_cast<std::size_t>(ic) * ih + iy) * iw + ix] = acc;
      }
    }
  }
}

}  // namespace densedet::kernels::omp
