#pragma once

#include <vector>

#include "inti/nn/layers.hpp"
#include "inti/vit/config.hpp"

namespace inti::vit {

struct BlockParams {
  nn::LayerNorm norm1;
  nn::Linear qkv;   // [C, 3C], columns ordered q | k | v
  nn::Linear proj;  // [C, C]
  nn::LayerNorm norm2;
  nn::Linear fc1;   // [C, mlp_hidden]
  nn::Linear fc2;   // [mlp_hidden, C]

  void collect(const std::string& prefix, nn::ParamList& out) const;
};

struct BackboneParams {
  ViTConfig config;
  nn::Linear patch_embed;  // [patch_dim, C]
  Tensor cls_token;        // [1, 1, C]
  Tensor pos_embed;        // [N + 1, C], shared by all frames
  std::vector<BlockParams> blocks;
  nn::LayerNorm final_norm;
  nn::Linear head;         // [C, num_classes]

  static BackboneParams init(const ViTConfig& config, Rng& rng);
  void collect(nn::ParamList& out) const;
};

// frames[T, H, W, channels_in] -> tokens[T, N + 1, C]; index 0 on the token
// axis is the class token, followed by patches in row-major raster order.
Tensor patchify(const BackboneParams& p, const Tensor& frames);

// Multi-head self-attention within each frame of x[T, S, C].
Tensor self_attention(const BlockParams& b, const Tensor& x, std::size_t heads);

// Pre-norm transformer block, applied to every frame independently.
Tensor vit_block(const BlockParams& b, const Tensor& x, std::size_t heads);

// Final-norm class token of each frame, averaged over frames, then the head.
Tensor classify(const BackboneParams& p, const Tensor& tokens);

}  // namespace inti::vit
