#pragma once

#include <span>
#include <vector>

#include "densedet/geometry.hpp"
#include "densedet/roi_align.hpp"

// Data-parallel inner loops. Each kernel exists twice: `serial` is the plain
// reference kept for testing and benchmarking, `omp` is the OpenMP version
// used by the library. Every output element of an `omp` kernel is produced by
// one thread with a fixed accumulation order, so results do not depend on the
// thread count.
namespace densedet::kernels {

struct ConvShape {
  int in_channels = 1;
  int out_channels = 1;
  int in_height = 1;
  int in_width = 1;
  int stride = 1;
  static constexpr int kKernel = 3;
  static constexpr int kPad = 1;

  int out_height() const { return (in_height + 2 * kPad - kKernel) / stride + 1; }
  int out_width() const { return (in_width + 2 * kPad - kKernel) / stride + 1; }
  std::size_t input_size() const { return static_cast<std::size_t>(in_channels) * in_height * in_width; }
  std::size_t output_size() const { return static_cast<std::size_t>(out_channels) * out_height() * out_width(); }
  std::size_t weight_size() const { return static_cast<std::size_t>(out_channels) * in_channels * kKernel * kKernel; }
};

struct ConvGrads {
  std::span<double> input;   // may be empty to skip
  std::span<double> weight;  // accumulated into
  std::span<double> bias;    // accumulated into
};

namespace serial {

std::vector<double> iou_matrix(std::span<const Box> rows, std::span<const Box> cols);
std::vector<RoiFeatures> roi_align_batch(const FeatureMap& fm, std::span<const Box> boxes,
                                         const RoiAlignParams& params);
void conv3x3_forward(const ConvShape& shape, std::span<const double> input,
                     std::span<const double> weight, std::span<const double> bias,
                     std::span<double> output);
void conv3x3_backward(const ConvShape& shape, std::span<const double> input,
                      std::span<const double> weight, std::span<const double> grad_output,
                      const ConvGrads& grads);

}  // namespace serial

namespace omp {

std::vector<double> iou_matrix(std::span<const Box> rows, std::span<const Box> cols);
std::vector<RoiFeatures> roi_align_batch(const FeatureMap& fm, std::span<const Box> boxes,
                                         const RoiAlignParams& params);
void conv3x3_forward(const ConvShape& shape, std::span<const double> input,
                     std::span<const double> weight, std::span<const double> bias,
                     std::span<double> output);
void conv3x3_backward(const ConvShape& shape, std::span<const double> input,
                      std::span<const double> weight, std::span<const double> grad_output,
                      const ConvGrads& grads);

}  // namespace omp

}  // namespace densedet::kernels
