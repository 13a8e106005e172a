#pragma once

#include <cstddef>
#include <vector>

#include "inti/tensor/tensor.hpp"

namespace inti {

inline constexpr double kLayerNormEps = 1e-5;

// Elementwise binary ops with numpy-style broadcasting.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& x, double s);

// a[..., M, K] x b[..., K, P]; leading batch dims broadcast.
Tensor matmul(const Tensor& a, const Tensor& b);
// x[..., in] * w[in, out] + bias[out].
Tensor linear(const Tensor& x, const Tensor& w, const Tensor& bias);

Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                  double eps = kLayerNormEps);
// Exact form x * Phi(x).
Tensor gelu(const Tensor& x);
Tensor sigmoid(const Tensor& x);
Tensor softmax(const Tensor& x, std::size_t axis);
// Mean over rows of -log softmax(logits)[label]; logits is [K] or [B, K].
Tensor cross_entropy(const Tensor& logits, const std::vector<std::size_t>& labels);

Tensor sum(const Tensor& x);
Tensor mean(const Tensor& x);
// Mean over `axis`, which is removed from the shape.
Tensor mean_axis(const Tensor& x, std::size_t axis);

Tensor reshape(const Tensor& x, Shape shape);
Tensor permute(const Tensor& x, const std::vector<std::size_t>& axes);
// Elements start, start+step, ... < stop along `axis`.
Tensor slice(const Tensor& x, std::size_t axis, std::size_t start, std::size_t stop,
             std::size_t step = 1);
Tensor concat(const std::vector<Tensor>& parts, std::size_t axis);

// x[T, H, W, C] convolved per channel with kernel[3, 3, 3, C]; stride 1,
// zero padding 1 on every side.
Tensor depthwise_conv3d(const Tensor& x, const Tensor& kernel);
// x[T, C] convolved per channel with kernel[3, C] plus bias[C]; stride 1, pad 1.
Tensor depthwise_conv1d(const Tensor& x, const Tensor& kernel, const Tensor& bias);
// Window 2, stride 2 over the leading axis of x[T, C]; a trailing odd row is dropped.
Tensor max_pool1d(const Tensor& x);

}  // namespace inti
