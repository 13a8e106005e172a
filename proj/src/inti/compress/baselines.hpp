#pragma once

#include "inti/compress/fusion.hpp"
#include "inti/nn/layers.hpp"

namespace inti::compress {

// One learned (a, b) = softmax(logits) pair shared by every position.
struct LinearPoolParams {
  Tensor logits;  // [2], zero at init

  static LinearPoolParams init();
  void collect(const std::string& prefix, nn::ParamList& out) const;
};

StageOutput linear_pooling_stage(const LinearPoolParams& p, const Tensor& x);

// Temporal convolution with kernel 3, stride 2, spatial kernel 1 and full
// channel mixing: out[t] = x[2t] W0 + x[2t+1] W1 + x[2t+2] W2 + b, with
// x[T] = 0. The class token row goes through the same temporal kernel.
struct ConvPoolParams {
  Tensor kernel;  // [3, C, C]
  Tensor bias;    // [C]

  // W0 = W1 = I/2, W2 = 0: pairwise averaging at init.
  static ConvPoolParams init(std::size_t width);
  void collect(const std::string& prefix, nn::ParamList& out) const;
};

StageOutput conv_pooling_stage(const ConvPoolParams& p, const Tensor& x);

}  // namespace inti::compress
