#pragma once

#include <string>
#include <utility>
#include <vector>

#include "inti/tensor/ops.hpp"
#include "inti/tensor/random.hpp"

namespace inti::nn {

// Named parameter handles in registration order. Handles share storage with
// the owning module, so updating one updates the model.
using ParamList = std::vector<std::pair<std::string, Tensor>>;

struct Linear {
  Tensor weight;  // [in, out]
  Tensor bias;    // [out]

  static Linear init(Rng& rng, std::size_t in, std::size_t out);
  static Linear zeros(std::size_t in, std::size_t out);
  Tensor operator()(const Tensor& x) const { return linear(x, weight, bias); }
  void collect(const std::string& prefix, ParamList& out) const;
};

struct LayerNorm {
  Tensor gamma;
  Tensor beta;

  static LayerNorm init(std::size_t c);
  Tensor operator()(const Tensor& x) const { return layer_norm(x, gamma, beta); }
  void collect(const std::string& prefix, ParamList& out) const;
};

// LayerNorm -> Linear -> GELU.
struct Projection {
  LayerNorm norm;
  Linear fc;

  static Projection init(Rng& rng, std::size_t in, std::size_t out);
  Tensor operator()(const Tensor& x) const { return gelu(fc(norm(x))); }
  void collect(const std::string& prefix, ParamList& out) const;
};

Tensor param_normal(Rng& rng, Shape shape, double stddev);
Tensor param_fill(Shape shape, double value);

std::size_t count_parameters(const ParamList& params);

}  // namespace inti::nn
