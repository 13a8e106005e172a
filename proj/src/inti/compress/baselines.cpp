#include "inti/compress/baselines.hpp"

namespace inti::compress {

namespace {

void require_even_frames(const Tensor& x, const char* what) {
  if (x.rank() != 3) throw ShapeError(std::string(what) + " expects [T, S, C], got " + shape_str(x.shape()));
  if (x.dim(0) % 2 != 0)
    throw ContractError(std::string(what) + " needs an even frame count, got " + std::to_string(x.dim(0)));
}

}  // namespace

LinearPoolParams LinearPoolParams::init() { return {nn::param_fill({2}, 0.0)}; }

void LinearPoolParams::collect(const std::string& prefix, nn::ParamList& out) const {
  out.emplace_back(prefix + ".logits", logits);
}

StageOutput linear_pooling_stage(const LinearPoolParams& p, const Tensor& x) {
  require_even_frames(x, "LinearPooling");
  const std::size_t half = x.dim(0) / 2, s = x.dim(1);
  Tensor ab = softmax(p.logits, 0);
  Tensor field({half, s}, 0.0);
  WeightField w{add(field, slice(ab, 0, 0, 1)), add(field, slice(ab, 0, 1, 2))};
  return {fuse_pairs(x, w), w, x};
}

ConvPoolParams ConvPoolParams::init(std::size_t width) {
  std::vector<double> k(3 * width * width, 0.0);
  for (std::size_t tap = 0; tap < 2; ++tap)
    for (std::size_t i = 0; i < width; ++i) k[(tap * width + i) * width + i] = 0.5;
  return {Tensor::parameter({3, width, width}, std::move(k)), nn::param_fill({width}, 0.0)};
}

void ConvPoolParams::collect(const std::string& prefix, nn::ParamList& out) const {
  out.emplace_back(prefix + ".kernel", kernel);
  out.emplace_back(prefix + ".bias", bias);
}

StageOutput conv_pooling_stage(const ConvPoolParams& p, const Tensor& x) {
  require_even_frames(x, "ConvPooling");
  const std::size_t t = x.dim(0), s = x.dim(1), c = x.dim(2);
  if (p.kernel.shape() != Shape{3, c, c})
    throw ConfigError("ConvPooling kernel " + shape_str(p.kernel.shape()) + " for width " + std::to_string(c));
  auto tap = [&](std::size_t d) { return reshape(slice(p.kernel, 0, d, d + 1), {c, c}); };
  Tensor even = slice(x, 0, 0, t, 2);
  Tensor odd = slice(x, 0, 1, t, 2);
  Tensor out = add(linear(even, tap(0), p.bias), matmul(odd, tap(1)));
  if (t > 2) {
    // Frame 2t+2 for every output but the last, which sees zero padding.
    Tensor next = concat({slice(x, 0, 2, t, 2), Tensor({1, s, c}, 0.0)}, 0);
    out = add(out, matmul(next, tap(2)));
  }
  return {out, std::nullopt, x};
}

}  // namespace inti::compress
