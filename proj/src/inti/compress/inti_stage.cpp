#include "inti/compress/inti_stage.hpp"

#include <cmath>

namespace inti::compress {

namespace {

std::size_t hidden_width(const StageSpec& spec, std::size_t width) {
  return static_cast<std::size_t>(std::llround(spec.head_hidden_ratio * static_cast<double>(width)));
}

std::size_t head_input_width(Fusion f, std::size_t width) {
  switch (f) {
    case Fusion::kSepToken: return 2 * width;
    case Fusion::kAddAll: return width;
    case Fusion::kCatAll: return 4 * width;
  }
  return 0;
}

std::size_t perfect_sqrt(std::size_t n) {
  auto r = static_cast<std::size_t>(std::llround(std::sqrt(static_cast<double>(n))));
  if (r * r != n) throw ConfigError(std::to_string(n) + " spatial tokens do not form a square grid");
  return r;
}

// Broadcasts [rows, C] or [C] over the token axis of a [rows, S, C] grid.
Tensor spread(const Tensor& v, std::size_t rows, std::size_t s, std::size_t c) {
  Tensor base({rows, s, c}, 0.0);
  return add(base, v.rank() == 1 ? v : reshape(v, {rows, 1, c}));
}

}  // namespace

GlobalNet GlobalNet::init(Rng& rng, std::size_t width) {
  GlobalNet g;
  for (std::size_t i = 0; i < 3; ++i) {
    g.kernels[i] = nn::param_normal(rng, {3, width}, 1.0 / std::sqrt(3.0));
    g.biases[i] = nn::param_fill({width}, 0.0);
  }
  return g;
}

void GlobalNet::collect(const std::string& prefix, nn::ParamList& out) const {
  for (std::size_t i = 0; i < 3; ++i) {
    out.emplace_back(prefix + ".conv" + std::to_string(i) + ".kernel", kernels[i]);
    out.emplace_back(prefix + ".conv" + std::to_string(i) + ".bias", biases[i]);
  }
}

IntiParams IntiParams::init(const StageSpec& spec, std::size_t max_frames, std::size_t width,
                            Rng& rng) {
  if (width % 2 != 0) throw ConfigError("InTI needs an even channel width");
  IntiParams p;
  p.pos_embed = nn::param_normal(rng, {max_frames, 1, width}, 0.02);
  p.sigma = nn::param_fill({1}, 0.0);
  if (spec.head != HeadMode::kAttention) {
    p.token_even = nn::Projection::init(rng, width, width / 2);
    p.token_odd = nn::Projection::init(rng, width, width / 2);
  }
  p.cube_kernel = nn::param_normal(rng, {3, 3, 3, width}, 1.0 / std::sqrt(27.0));
  p.frame_even = nn::Projection::init(rng, width, width / 2);
  p.frame_odd = nn::Projection::init(rng, width, width / 2);
  p.frame_mix = nn::Projection::init(rng, width, width);
  p.global = GlobalNet::init(rng, width);
  if (spec.head == HeadMode::kAttention) {
    p.attention_query = nn::param_fill({width}, 0.0);
  } else {
    const std::size_t hidden = hidden_width(spec, width);
    p.head_fc1 = nn::Linear::init(rng, head_input_width(spec.fusion, width), hidden);
    p.head_fc2 = nn::Linear::zeros(hidden, 2);
  }
  return p;
}

void IntiParams::collect(const std::string& prefix, const StageSpec& spec,
                         nn::ParamList& out) const {
  out.emplace_back(prefix + ".pos_embed", pos_embed);
  out.emplace_back(prefix + ".sigma", sigma);
  if (spec.head != HeadMode::kAttention) {
    token_even.collect(prefix + ".token_even", out);
    token_odd.collect(prefix + ".token_odd", out);
  }
  out.emplace_back(prefix + ".cube_kernel", cube_kernel);
  frame_even.collect(prefix + ".frame_even", out);
  frame_odd.collect(prefix + ".frame_odd", out);
  frame_mix.collect(prefix + ".frame_mix", out);
  global.collect(prefix + ".global", out);
  if (spec.head == HeadMode::kAttention) {
    out.emplace_back(prefix + ".attention_query", attention_query);
  } else {
    head_fc1.collect(prefix + ".head.fc1", out);
    head_fc2.collect(prefix + ".head.fc2", out);
  }
}

Tensor add_temporal_embedding(const Tensor& x, const Tensor& pos_embed, const Tensor& sigma) {
  const std::size_t t = x.dim(0);
  if (t > pos_embed.dim(0)) {
    throw ConfigError(std::to_string(t) + " frames exceed the temporal embedding length " +
                      std::to_string(pos_embed.dim(0)));
  }
  return add(x, mul(sigma, slice(pos_embed, 0, 0, t)));
}

Tensor extract_token_feature(const IntiParams& p, const Tensor& even, const Tensor& odd) {
  return concat({p.token_even(even), p.token_odd(odd)}, 2);
}

Tensor cube_conv(const IntiParams& p, const Tensor& x) {
  const std::size_t t = x.dim(0), s = x.dim(1), c = x.dim(2);
  const std::size_t g = perfect_sqrt(s - 1);
  Tensor grid = reshape(slice(x, 1, 1, s), {t, g, g, c});
  Tensor conv = reshape(depthwise_conv3d(grid, p.cube_kernel), {t, s - 1, c});
  return concat({Tensor({t, 1, c}, 0.0), conv}, 1);
}

Tensor extract_cube_feature(const IntiParams& p, const Tensor& x) {
  const std::size_t t = x.dim(0);
  Tensor cube = cube_conv(p, x);
  return scale(add(slice(cube, 0, 0, t, 2), slice(cube, 0, 1, t, 2)), 0.5);
}

Tensor extract_frame_feature(const IntiParams& p, const Tensor& cls_even, const Tensor& cls_odd) {
  return p.frame_mix(concat({p.frame_even(cls_even), p.frame_odd(cls_odd)}, 1));
}

Tensor extract_global_feature(const IntiParams& p, const Tensor& cls) {
  if (cls.rank() != 2 || cls.dim(0) < 4) {
    throw ContractError("global feature needs at least 4 frames of class tokens, got " +
                        shape_str(cls.shape()));
  }
  const GlobalNet& g = p.global;
  Tensor h = cls;
  for (std::size_t i = 0; i < 2; ++i)
    h = gelu(max_pool1d(depthwise_conv1d(h, g.kernels[i], g.biases[i])));
  h = depthwise_conv1d(h, g.kernels[2], g.biases[2]);
  return gelu(mean_axis(h, 0));
}

WeightField predict_weights(const IntiParams& p, const StageSpec& spec, const ContextFeatures& f,
                            const Tensor& even, const Tensor& odd) {
  const std::size_t half = f.cube.dim(0), s = f.cube.dim(1), c = f.cube.dim(2);
  Tensor context = add(add(f.cube, reshape(f.frame, {half, 1, c})), f.global);

  Tensor weights;  // [T/2, S, 2]
  if (spec.head == HeadMode::kAttention) {
    Tensor query = reshape(p.attention_query, {c, 1});
    Tensor score_even = matmul(add(even, context), query);
    Tensor score_odd = matmul(add(odd, context), query);
    weights = softmax(concat({score_even, score_odd}, 2), 2);
  } else {
    Tensor feature;
    switch (spec.fusion) {
      case Fusion::kSepToken:
        feature = concat({f.token, context}, 2);
        break;
      case Fusion::kAddAll:
        feature = add(f.token, context);
        break;
      case Fusion::kCatAll:
        feature = concat({f.token, f.cube, spread(f.frame, half, s, c), spread(f.global, half, s, c)}, 2);
        break;
    }
    Tensor logits = p.head_fc2(gelu(p.head_fc1(feature)));
    weights = spec.head == HeadMode::kSoftmax ? softmax(logits, 2) : sigmoid(logits);
  }
  return {reshape(slice(weights, 2, 0, 1), {half, s}), reshape(slice(weights, 2, 1, 2), {half, s})};
}

StageOutput inti_stage(const IntiParams& p, const StageSpec& spec, const Tensor& x) {
  if (x.rank() != 3) throw ShapeError("InTI stage expects [T, S, C], got " + shape_str(x.shape()));
  const std::size_t t = x.dim(0), c = x.dim(2);
  if (t % 2 != 0) throw ContractError("InTI stage needs an even frame count, got " + std::to_string(t));
  if (t < 4) throw ContractError("InTI stage needs at least 4 frames, got " + std::to_string(t));

  Tensor xe = add_temporal_embedding(x, p.pos_embed, p.sigma);
  Tensor even = slice(xe, 0, 0, t, 2);
  Tensor odd = slice(xe, 0, 1, t, 2);
  Tensor cls = reshape(slice(xe, 1, 0, 1), {t, c});

  ContextFeatures f;
  if (spec.head != HeadMode::kAttention) f.token = extract_token_feature(p, even, odd);
  f.cube = extract_cube_feature(p, xe);
  f.frame = extract_frame_feature(p, slice(cls, 0, 0, t, 2), slice(cls, 0, 1, t, 2));
  f.global = extract_global_feature(p, cls);

  WeightField w = predict_weights(p, spec, f, even, odd);
  return {fuse_pairs(xe, w), w, xe};
}

}  // namespace inti::compress
