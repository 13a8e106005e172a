#pragma once

#include <optional>

#include "inti/tensor/tensor.hpp"

namespace inti::compress {

// Per-position interpolation weights for one frame-halving step.
struct WeightField {
  Tensor alpha;  // [T/2, N+1], weight of frame 2j
  Tensor beta;   // [T/2, N+1], weight of frame 2j+1
};

// out[j, k, :] = alpha[j, k] * x[2j, k, :] + beta[j, k] * x[2j+1, k, :]
// Tokens at different positions never mix.
Tensor fuse_pairs(const Tensor& x, const WeightField& w);

// Result of applying one compression stage.
struct StageOutput {
  Tensor tokens;                       // [T/2, N+1, C]
  std::optional<WeightField> weights;  // absent for ConvPooling
  Tensor source;                       // [T, N+1, C] grid the weights were applied to
};

// Throws NumericError unless every weight pair lies on the simplex
// (alpha, beta in [0, 1], alpha + beta = 1 within `tol`) and every fused
// coordinate lies within the [min, max] of its two source coordinates.
void check_simplex(const Tensor& source, const Tensor& fused, const WeightField& w,
                   double tol = 1e-12);

}  // namespace inti::compress
