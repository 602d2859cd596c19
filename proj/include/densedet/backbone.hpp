#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "densedet/kernels.hpp"
#include "densedet/roi_align.hpp"

namespace densedet {

struct BackboneConfig {
  int image_size = 32;
  std::vector<int> channels{8, 16, 16};  // one 3x3 conv + ReLU block per entry
  std::vector<int> strides{1, 2, 2};
  int anchors_per_cell = 9;
  int embed_dim = 16;
  int embed_hidden = 0;  // channels of an extra conv + ReLU block in the embedding head; 0 = none
  bool fuse_embed_hidden = false;  // detection heads also read the embedding block

  int total_stride() const;
  int feature_size() const;
  void validate() const;
};

struct BackboneOutputs {
  FeatureMap objectness;  // A x h x w logits
  FeatureMap deltas;      // 4A x h x w, channel 4a+k is component k of anchor a
  FeatureMap embedding;   // D x h x w, the pixel embedding network output
};

// Intermediate values kept by forward() for backward().
struct BackboneCache {
  std::vector<double> input;
  std::vector<std::vector<double>> activations;  // post-ReLU, one per block
  std::vector<std::vector<char>> active;          // ReLU masks, one per block
  std::vector<double> embed_hidden;               // post-ReLU embedding-head block, if any
  std::vector<char> embed_hidden_active;
};

struct BackboneGrads {
  std::vector<double> params;  // same layout as TinyBackbone::params()
};

// Stack of 3x3 conv + bias + ReLU blocks feeding three 3x3 conv heads
// (objectness logits, box deltas, embeddings). All weights live in one flat
// vector so optimisers and gradient checks can treat them uniformly.
class TinyBackbone {
 public:
  TinyBackbone(BackboneConfig config, std::uint64_t seed);

  const BackboneConfig& config() const { return config_; }
  std::span<double> params() { return params_; }
  std::span<const double> params() const { return params_; }
  std::size_t param_count() const { return params_.size(); }

  BackboneOutputs forward(std::span<const double> image, BackboneCache* cache = nullptr) const;

  // Reverse accumulation through the heads and blocks. Any upstream gradient
  // may be empty, meaning zero.
  BackboneGrads backward(const BackboneCache& cache, std::span<const double> grad_objectness,
                         std::span<const double> grad_deltas, std::span<const double> grad_embedding) const;

  // Layer views into params(), exposed for tests.
  struct LayerView {
    kernels::ConvShape shape;
    std::size_t weight_offset;
    std::size_t bias_offset;
  };
  const std::vector<LayerView>& blocks() const { return blocks_; }
  const LayerView& objectness_head() const { return heads_[0]; }
  const LayerView& delta_head() const { return heads_[1]; }
  const LayerView& embedding_head() const { return heads_[2]; }
  bool has_embed_hidden() const { return config_.embed_hidden > 0; }
  bool fused() const { return has_embed_hidden() && config_.fuse_embed_hidden; }
  const LayerView& embedding_hidden() const { return embed_hidden_; }

 private:
  BackboneConfig config_;
  std::vector<LayerView> blocks_;
  std::vector<LayerView> heads_;
  LayerView embed_hidden_{};
  std::vector<double> params_;
};

}  // namespace densedet
