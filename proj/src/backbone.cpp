#include "densedet/backbone.hpp"

#include <cmath>
#include <string>

#include "densedet/error.hpp"
#include "densedet/random.hpp"

namespace densedet {

int BackboneConfig::total_stride() const {
  int s = 1;
  for (int x : strides) s *= x;
  return s;
}

int BackboneConfig::feature_size() const {
  int size = image_size;
  for (int s : strides) size = (size + 2 * kernels::ConvShape::kPad - kernels::ConvShape::kKernel) / s + 1;
  return size;
}

void BackboneConfig::validate() const {
  if (channels.empty() || channels.size() != strides.size())
    fail_input("backbone needs one stride per conv block and at least one block");
  for (int c : channels)
    if (c < 1) fail_input("backbone channel counts must be >= 1");
  for (int s : strides)
    if (s < 1 || s > 2) fail_input("backbone strides must be 1 or 2");
  if (image_size < 4) fail_input("backbone image_size must be >= 4");
  if (anchors_per_cell < 1 || embed_dim < 1) fail_input("backbone head sizes must be >= 1");
  if (embed_hidden < 0) fail_input("backbone embed_hidden must be >= 0");
  if (image_size % total_stride() != 0) fail_input("image_size must be divisible by the total stride");
}

TinyBackbone::TinyBackbone(BackboneConfig config, std::uint64_t seed) : config_(std::move(config)) {
  config_.validate();
  std::size_t offset = 0;
  auto add = [&](int in_c, int out_c, int size, int stride) {
    LayerView v{kernels::ConvShape{in_c, out_c, size, size, stride}, offset, 0};
    offset += v.shape.weight_size();
    v.bias_offset = offset;
    offset += static_cast<std::size_t>(out_c);
    return v;
  };
  int in_c = 1;
  int size = config_.image_size;
  for (std::size_t i = 0; i < config_.channels.size(); ++i) {
    blocks_.push_back(add(in_c, config_.channels[i], size, config_.strides[i]));
    size = blocks_.back().shape.out_height();
    in_c = config_.channels[i];
  }
  const int a = config_.anchors_per_cell;
  const int det_in = in_c + (config_.fuse_embed_hidden ? config_.embed_hidden : 0);
  heads_.push_back(add(det_in, a, size, 1));
  heads_.push_back(add(det_in, 4 * a, size, 1));
  heads_.push_back(add(config_.embed_hidden > 0 ? config_.embed_hidden : in_c, config_.embed_dim, size, 1));
  if (config_.embed_hidden > 0) embed_hidden_ = add(in_c, config_.embed_hidden, size, 1);
  params_.assign(offset, 0.0);

  Rng rng(seed);
  for (const auto& b : blocks_) {
    const double fan_in = b.shape.in_channels * 9.0;
    const double bound = std::sqrt(6.0 / fan_in);
    for (std::size_t i = 0; i < b.shape.weight_size(); ++i) params_[b.weight_offset + i] = rng.uniform(-bound, bound);
  }
  for (int h = 0; h < 2; ++h)
    for (std::size_t i = 0; i < heads_[h].shape.weight_size(); ++i)
      params_[heads_[h].weight_offset + i] = 0.01 * rng.normal();
  const auto& e = heads_[2];
  const double bound = std::sqrt(3.0 / (e.shape.in_channels * 9.0));
  for (std::size_t i = 0; i < e.shape.weight_size(); ++i) params_[e.weight_offset + i] = rng.uniform(-bound, bound);
  if (config_.embed_hidden > 0) {
    const auto& hb = embed_hidden_;
    const double hb_bound = std::sqrt(6.0 / (hb.shape.in_channels * 9.0));
    for (std::size_t i = 0; i < hb.shape.weight_size(); ++i)
      params_[hb.weight_offset + i] = rng.uniform(-hb_bound, hb_bound);
  }
}

namespace {

std::span<const double> weights(std::span<const double> p, const TinyBackbone::LayerView& v) {
  return p.subspan(v.weight_offset, v.shape.weight_size());
}
std::span<const double> biases(std::span<const double> p, const TinyBackbone::LayerView& v) {
  return p.subspan(v.bias_offset, static_cast<std::size_t>(v.shape.out_channels));
}

}  // namespace

BackboneOutputs TinyBackbone::forward(std::span<const double> image, BackboneCache* cache) const {
  const std::size_t expected = static_cast<std::size_t>(config_.image_size) * config_.image_size;
  if (image.size() != expected)
    fail_input("backbone input has " + std::to_string(image.size()) + " values, expected " + std::to_string(expected));

  std::vector<double> current(image.begin(), image.end());
  if (cache) {
    cache->input = current;
    cache->activations.clear();
    cache->active.clear();
    cache->embed_hidden.clear();
    cache->embed_hidden_active.clear();
  }
  for (const auto& b : blocks_) {
    std::vector<double> out(b.shape.output_size());
    kernels::omp::conv3x3_forward(b.shape, current, weights(params_, b), biases(params_, b), out);
    std::vector<char> mask(out.size());
    for (std::size_t i = 0; i < out.size(); ++i) {
      mask[i] = out[i] > 0.0;
      if (!mask[i]) out[i] = 0.0;
    }
    if (cache) {
      cache->activations.push_back(out);
      cache->active.push_back(std::move(mask));
    }
    current = std::move(out);
  }

  const int fs = blocks_.back().shape.out_height();
  const double scale = 1.0 / config_.total_stride();
  auto run_head = [&](const LayerView& h, std::span<const double> input) {
    FeatureMap fm(FeatureShape{h.shape.out_channels, fs, fs, scale});
    kernels::omp::conv3x3_forward(h.shape, input, weights(params_, h), biases(params_, h), fm.values);
    return fm;
  };
  if (!has_embed_hidden())
    return BackboneOutputs{run_head(heads_[0], current), run_head(heads_[1], current), run_head(heads_[2], current)};

  const auto& hb = embed_hidden_;
  std::vector<double> hidden(hb.shape.output_size());
  kernels::omp::conv3x3_forward(hb.shape, current, weights(params_, hb), biases(params_, hb), hidden);
  std::vector<char> mask(hidden.size());
  for (std::size_t i = 0; i < hidden.size(); ++i) {
    mask[i] = hidden[i] > 0.0;
    if (!mask[i]) hidden[i] = 0.0;
  }
  std::vector<double> det_input;
  if (fused()) {
    det_input = current;
    det_input.insert(det_input.end(), hidden.begin(), hidden.end());
  }
  const std::span<const double> det = fused() ? std::span<const double>(det_input) : std::span<const double>(current);
  BackboneOutputs out{run_head(heads_[0], det), run_head(heads_[1], det), run_head(heads_[2], hidden)};
  if (cache) {
    cache->embed_hidden = std::move(hidden);
    cache->embed_hidden_active = std::move(mask);
  }
  return out;
}

BackboneGrads TinyBackbone::backward(const BackboneCache& cache, std::span<const double> grad_objectness,
                                     std::span<const double> grad_deltas,
                                     std::span<const double> grad_embedding) const {
  if (cache.activations.size() != blocks_.size()) fail_input("backbone cache does not match this network");
  BackboneGrads g;
  g.params.assign(params_.size(), 0.0);
  std::span<double> gp(g.params);

  const std::vector<double>& top = cache.activations.back();
  std::vector<double> grad_top(top.size(), 0.0);
  std::vector<double> scratch(top.size());
  const std::span<const double> upstream[3] = {grad_objectness, grad_deltas, grad_embedding};
  auto layer_grads = [&](const LayerView& v, std::span<double> grad_input) {
    return kernels::ConvGrads{grad_input, gp.subspan(v.weight_offset, v.shape.weight_size()),
                              gp.subspan(v.bias_offset, static_cast<std::size_t>(v.shape.out_channels))};
  };
  if (has_embed_hidden() && cache.embed_hidden.size() != embed_hidden_.shape.output_size())
    fail_input("backbone cache does not match this network");
  std::vector<double> det_input;
  if (fused()) {
    det_input = top;
    det_input.insert(det_input.end(), cache.embed_hidden.begin(), cache.embed_hidden.end());
  }
  std::vector<double> grad_hidden(cache.embed_hidden.size(), 0.0);
  bool hidden_used = false;
  for (int h = 0; h < 3; ++h) {
    if (upstream[h].empty()) continue;
    const auto& v = heads_[h];
    if (upstream[h].size() != v.shape.output_size()) fail_input("head gradient has the wrong size");
    if (h == 2 && has_embed_hidden()) {
      std::vector<double> g_in(grad_hidden.size());
      kernels::omp::conv3x3_backward(v.shape, cache.embed_hidden, weights(params_, v), upstream[h], layer_grads(v, g_in));
      for (std::size_t i = 0; i < g_in.size(); ++i) grad_hidden[i] += g_in[i];
      hidden_used = true;
    } else if (h < 2 && fused()) {
      std::vector<double> g_in(det_input.size());
      kernels::omp::conv3x3_backward(v.shape, det_input, weights(params_, v), upstream[h], layer_grads(v, g_in));
      for (std::size_t i = 0; i < grad_top.size(); ++i) grad_top[i] += g_in[i];
      for (std::size_t i = 0; i < grad_hidden.size(); ++i) grad_hidden[i] += g_in[grad_top.size() + i];
      hidden_used = true;
    } else {
      kernels::omp::conv3x3_backward(v.shape, top, weights(params_, v), upstream[h], layer_grads(v, scratch));
      for (std::size_t i = 0; i < grad_top.size(); ++i) grad_top[i] += scratch[i];
    }
  }
  if (hidden_used) {
    for (std::size_t i = 0; i < grad_hidden.size(); ++i)
      if (!cache.embed_hidden_active[i]) grad_hidden[i] = 0.0;
    kernels::omp::conv3x3_backward(embed_hidden_.shape, top, weights(params_, embed_hidden_), grad_hidden,
                                   layer_grads(embed_hidden_, scratch));
    for (std::size_t i = 0; i < grad_top.size(); ++i) grad_top[i] += scratch[i];
  }

  std::vector<double> grad = std::move(grad_top);
  for (std::size_t li = blocks_.size(); li-- > 0;) {
    const auto& b = blocks_[li];
    const auto& mask = cache.active[li];
    for (std::size_t i = 0; i < grad.size(); ++i)
      if (!mask[i]) grad[i] = 0.0;
    const std::vector<double>& input = li == 0 ? cache.input : cache.activations[li - 1];
    std::vector<double> grad_in(li == 0 ? 0 : input.size());
    kernels::omp::conv3x3_backward(b.shape, input, weights(params_, b), grad,
                                   {grad_in, gp.subspan(b.weight_offset, b.shape.weight_size()),
                                    gp.subspan(b.bias_offset, static_cast<std::size_t>(b.shape.out_channels))});
    grad = std::move(grad_in);
  }
  return g;
}

}  // namespace densedet
