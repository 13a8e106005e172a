#include "inti/nn/layers.hpp"

#include <cmath>

namespace inti::nn {

Tensor param_normal(Rng& rng, Shape shape, double stddev) {
  const std::size_t n = shape_numel(shape);
  return Tensor::parameter(std::move(shape), rng.normal_vector(n, stddev));
}

Tensor param_fill(Shape shape, double value) {
  const std::size_t n = shape_numel(shape);
  return Tensor::parameter(std::move(shape), std::vector<double>(n, value));
}

Linear Linear::init(Rng& rng, std::size_t in, std::size_t out) {
  // Glorot-normal scaling.
  const double sd = std::sqrt(2.0 / static_cast<double>(in + out));
  return {param_normal(rng, {in, out}, sd), param_fill({out}, 0.0)};
}

Linear Linear::zeros(std::size_t in, std::size_t out) {
  return {param_fill({in, out}, 0.0), param_fill({out}, 0.0)};
}

void Linear::collect(const std::string& prefix, ParamList& out) const {
  out.emplace_back(prefix + ".weight", weight);
  out.emplace_back(prefix + ".bias", bias);
}

LayerNorm LayerNorm::init(std::size_t c) { return {param_fill({c}, 1.0), param_fill({c}, 0.0)}; }

void LayerNorm::collect(const std::string& prefix, ParamList& out) const {
  out.emplace_back(prefix + ".gamma", gamma);
  out.emplace_back(prefix + ".beta", beta);
}

Projection Projection::init(Rng& rng, std::size_t in, std::size_t out) {
  return {LayerNorm::init(in), Linear::init(rng, in, out)};
}

void Projection::collect(const std::string& prefix, ParamList& out) const {
  norm.collect(prefix + ".norm", out);
  fc.collect(prefix + ".fc", out);
}

std::size_t count_parameters(const ParamList& params) {
  std::size_t n = 0;
  for (const auto& [name, t] : params) n += t.numel();
  return n;
}

}  // namespace inti::nn
