#include <cmath>

#include "doctest.h"

#include "densedet/kernels.hpp"
#include "densedet/parallel.hpp"
#include "support.hpp"

using namespace densedet;
using namespace densedet::kernels;

namespace {

// Direct definition: out[o,y,x] = b[o] + sum w[o,c,ky,kx] * in[c, y*s+ky-1, x*s+kx-1].
std::vector<double> naive_conv(const ConvShape& s, const std::vector<double>& in, const std::vector<double>& w,
                               const std::vector<double>& b) {
  std::vector<double> out(s.output_size());
  for (int o = 0; o < s.out_channels; ++o)
    for (int y = 0; y < s.out_height(); ++y)
      for (int x = 0; x < s.out_width(); ++x) {
        double acc = b[o];
        for (int c = 0; c < s.in_channels; ++c)
          for (int ky = 0; ky < 3; ++ky)
            for (int kx = 0; kx < 3; ++kx) {
              const int iy = y * s.stride + ky - 1, ix = x * s.stride + kx - 1;
              if (iy < 0 || ix < 0 || iy >= s.in_height || ix >= s.in_width) continue;
              acc += w[((o * s.in_channels + c) * 3 + ky) * 3 + kx] * in[(c * s.in_height + iy) * s.in_width + ix];
            }
        out[(o * s.out_height() + y) * s.out_width() + x] = acc;
      }
  return out;
}

ConvShape random_shape(Rng& rng) {
  ConvShape s;
  s.in_channels = 1 + rng.below(4);
  s.out_channels = 1 + rng.below(4);
  s.in_height = 1 + rng.below(9);
  s.in_width = 1 + rng.below(9);
  s.stride = 1 + rng.below(2);
  return s;
}

}  // namespace

TEST_CASE("conv forward: serial equals the direct sum, parallel equals serial") {
  Rng rng(21);
  for (int inst = 0; inst < 100; ++inst) {
    const ConvShape s = random_shape(rng);
    const auto in = testsupport::random_vector(rng, s.input_size());
    const auto w = testsupport::random_vector(rng, s.weight_size());
    const auto b = testsupport::random_vector(rng, s.out_channels);
    std::vector<double> a(s.output_size()), p(s.output_size());
    serial::conv3x3_forward(s, in, w, b, a);
    omp::conv3x3_forward(s, in, w, b, p);
    const auto want = naive_conv(s, in, w, b);
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i] == doctest::Approx(want[i]).epsilon(1e-13));
    CHECK(a == p);
  }
}

TEST_CASE("conv backward is the adjoint of forward; parallel matches serial") {
  Rng rng(22);
  for (int inst = 0; inst < 100; ++inst) {
    const ConvShape s = random_shape(rng);
    const auto in = testsupport::random_vector(rng, s.input_size());
    const auto w = testsupport::random_vector(rng, s.weight_size());
    const std::vector<double> zero_b(s.out_channels, 0.0);
    const auto g = testsupport::random_vector(rng, s.output_size());

    std::vector<double> gi(s.input_size()), gw(s.weight_size(), 0.0), gb(s.out_channels, 0.0);
    serial::conv3x3_backward(s, in, w, g, {gi, gw, gb});
    std::vector<double> pi(s.input_size()), pw(s.weight_size(), 0.0), pb(s.out_channels, 0.0);
    omp::conv3x3_backward(s, in, w, g, {pi, pw, pb});

    // <conv(in), g> = <in, grad_in> = <w, grad_w> (zero bias, linear in each).
    std::vector<double> out(s.output_size());
    serial::conv3x3_forward(s, in, w, zero_b, out);
    const double lhs = testsupport::dot(out, g);
    CHECK(lhs == doctest::Approx(testsupport::dot(in, gi)).epsilon(1e-12));
    CHECK(lhs == doctest::Approx(testsupport::dot(w, gw)).epsilon(1e-12));
    double gsum = 0.0;
    for (int o = 0; o < s.out_channels; ++o) {
      double want = 0.0;
      for (int k = 0; k < s.out_height() * s.out_width(); ++k) want += g[o * s.out_height() * s.out_width() + k];
      CHECK(gb[o] == doctest::Approx(want).epsilon(1e-13));
      gsum += gb[o];
    }
    (void)gsum;
    for (std::size_t i = 0; i < gi.size(); ++i) CHECK(pi[i] == doctest::Approx(gi[i]).epsilon(1e-13));
    for (std::size_t i = 0; i < gw.size(); ++i) CHECK(pw[i] == doctest::Approx(gw[i]).epsilon(1e-13));
    for (std::size_t i = 0; i < gb.size(); ++i) CHECK(pb[i] == doctest::Approx(gb[i]).epsilon(1e-13));
  }
}

TEST_CASE("conv backward accumulates weight and bias, skips an empty input gradient") {
  const ConvShape s{2, 3, 5, 5, 1};
  Rng rng(1);
  const auto in = testsupport::random_vector(rng, s.input_size());
  const auto w = testsupport::random_vector(rng, s.weight_size());
  const auto g = testsupport::random_vector(rng, s.output_size());
  std::vector<double> gw(s.weight_size(), 0.0), gb(3, 0.0);
  omp::conv3x3_backward(s, in, w, g, {{}, gw, gb});
  const auto once = gw;
  omp::conv3x3_backward(s, in, w, g, {{}, gw, gb});
  for (std::size_t i = 0; i < gw.size(); ++i) CHECK(gw[i] == doctest::Approx(2 * once[i]));
}

TEST_CASE("iou matrix: serial, parallel and the scalar function agree") {
  Rng rng(23);
  std::vector<Box> a, b;
  for (int i = 0; i < 70; ++i) a.push_back(testsupport::random_box(rng, 50.0, 0.5));
  for (int i = 0; i < 45; ++i) b.push_back(testsupport::random_box(rng, 50.0, 0.5));
  const auto s = serial::iou_matrix(a, b);
  const auto p = omp::iou_matrix(a, b);
  REQUIRE(s.size() == a.size() * b.size());
  CHECK(s == p);
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = 0; j < b.size(); ++j) CHECK(s[i * b.size() + j] == iou(a[i], b[j]));
}

TEST_CASE("parallel kernels give identical output at every thread count") {
  Rng rng(24);
  const ConvShape s{3, 4, 11, 9, 2};
  const auto in = testsupport::random_vector(rng, s.input_size());
  const auto w = testsupport::random_vector(rng, s.weight_size());
  const auto b = testsupport::random_vector(rng, 4);
  const auto g = testsupport::random_vector(rng, s.output_size());
  std::vector<double> ref_out, ref_gi, ref_gw;
  for (int threads : {1, 2, 3, 8}) {
    set_thread_count(threads);
    CHECK(thread_count() == threads);
    std::vector<double> out(s.output_size()), gi(s.input_size()), gw(s.weight_size(), 0.0), gb(4, 0.0);
    omp::conv3x3_forward(s, in, w, b, out);
    omp::conv3x3_backward(s, in, w, g, {gi, gw, gb});
    if (ref_out.empty()) {
      ref_out = out, ref_gi = gi, ref_gw = gw;
    } else {
      CHECK(out == ref_out);
      CHECK(gi == ref_gi);
      CHECK(gw == ref_gw);
    }
  }
  set_thread_count(0);
  CHECK(thread_count() >= 1);
}
