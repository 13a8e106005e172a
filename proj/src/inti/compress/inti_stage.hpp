#pragma once

#include <array>

#include "inti/compress/fusion.hpp"
#include "inti/compress/stage_spec.hpp"
#include "inti/nn/layers.hpp"

namespace inti::compress {

// Depthwise temporal convolutions summarizing all class tokens of a clip.
struct GlobalNet {
  std::array<Tensor, 3> kernels;  // [3, C] each
  std::array<Tensor, 3> biases;   // [C] each

  static GlobalNet init(Rng& rng, std::size_t width);
  void collect(const std::string& prefix, nn::ParamList& out) const;
};

// Parameters of one InTI stage: the temporal embedding plus the weight
// prediction network. Which members are populated depends on the head mode.
struct IntiParams {
  Tensor pos_embed;  // [T_max, 1, C]
  Tensor sigma;      // [1], zero at init
  nn::Projection token_even, token_odd;  // C -> C/2
  Tensor cube_kernel;                    // [3, 3, 3, C]
  nn::Projection frame_even, frame_odd;  // C -> C/2
  nn::Projection frame_mix;              // C -> C
  GlobalNet global;
  // FFN head, final layer zero at init. Unused in attention mode.
  nn::Linear head_fc1, head_fc2;
  // Query for the attention head, zero at init.
  Tensor attention_query;  // [C]

  static IntiParams init(const StageSpec& spec, std::size_t max_frames, std::size_t width,
                         Rng& rng);
  void collect(const std::string& prefix, const StageSpec& spec, nn::ParamList& out) const;
};

// x + sigma * P[:T], broadcast over the token axis.
Tensor add_temporal_embedding(const Tensor& x, const Tensor& pos_embed, const Tensor& sigma);

// [T_token(even), T_token(odd)] per position -> [T/2, N+1, C].
Tensor extract_token_feature(const IntiParams& p, const Tensor& even, const Tensor& odd);

// Depthwise 3x3x3 convolution over the [T, sqrt(N), sqrt(N)] token grid;
// class-token row is zero. [T, N+1, C] -> [T, N+1, C].
Tensor cube_conv(const IntiParams& p, const Tensor& x);
// cube_conv with rows 2j and 2j+1 averaged -> [T/2, N+1, C].
Tensor extract_cube_feature(const IntiParams& p, const Tensor& x);

// cls_even, cls_odd: [T/2, C] -> [T/2, C].
Tensor extract_frame_feature(const IntiParams& p, const Tensor& cls_even, const Tensor& cls_odd);

// cls: [T >= 4, C] -> [C]. Computed once per clip and shared by all positions.
Tensor extract_global_feature(const IntiParams& p, const Tensor& cls);

struct ContextFeatures {
  Tensor token;   // [T/2, N+1, C]
  Tensor cube;    // [T/2, N+1, C]
  Tensor frame;   // [T/2, C]
  Tensor global;  // [C]
};

// Combines the features according to spec.fusion/spec.head into weights.
// even/odd are the embedded token rows, used only by the attention head.
WeightField predict_weights(const IntiParams& p, const StageSpec& spec, const ContextFeatures& f,
                            const Tensor& even, const Tensor& odd);

// Full stage: temporal embedding, four context features, weight prediction,
// pairwise fusion. x: [T, N+1, C] with even T >= 4.
StageOutput inti_stage(const IntiParams& p, const StageSpec& spec, const Tensor& x);

}  // namespace inti::compress
