#include "inti/vit/backbone.hpp"

#include <cmath>

namespace inti::vit {

void BlockParams::collect(const std::string& prefix, nn::ParamList& out) const {
  norm1.collect(prefix + ".norm1", out);
  qkv.collect(prefix + ".attn.qkv", out);
  proj.collect(prefix + ".attn.proj", out);
  norm2.collect(prefix + ".norm2", out);
  fc1.collect(prefix + ".mlp.fc1", out);
  fc2.collect(prefix + ".mlp.fc2", out);
}

BackboneParams BackboneParams::init(const ViTConfig& config, Rng& rng) {
  config.validate();
  const std::size_t c = config.width;
  BackboneParams p;
  p.config = config;
  p.patch_embed = nn::Linear::init(rng, config.patch_dim(), c);
  p.cls_token = nn::param_normal(rng, {1, 1, c}, 0.02);
  p.pos_embed = nn::param_normal(rng, {config.seq_len(), c}, 0.02);
  for (std::size_t i = 0; i < config.depth; ++i) {
    BlockParams b;
    b.norm1 = nn::LayerNorm::init(c);
    b.qkv = nn::Linear::init(rng, c, 3 * c);
    b.proj = nn::Linear::init(rng, c, c);
    b.norm2 = nn::LayerNorm::init(c);
    b.fc1 = nn::Linear::init(rng, c, config.mlp_hidden());
    b.fc2 = nn::Linear::init(rng, config.mlp_hidden(), c);
    p.blocks.push_back(std::move(b));
  }
  p.final_norm = nn::LayerNorm::init(c);
  p.head = nn::Linear::init(rng, c, config.num_classes);
  return p;
}

void BackboneParams::collect(nn::ParamList& out) const {
  patch_embed.collect("patch_embed", out);
  out.emplace_back("cls_token", cls_token);
  out.emplace_back("pos_embed", pos_embed);
  for (std::size_t i = 0; i < blocks.size(); ++i)
    blocks[i].collect("blocks." + std::to_string(i), out);
  final_norm.collect("final_norm", out);
  head.collect("head", out);
}

Tensor patchify(const BackboneParams& p, const Tensor& frames) {
  const ViTConfig& cfg = p.config;
  const std::size_t img = cfg.image_size, ps = cfg.patch_size, g = cfg.grid();
  if (frames.rank() != 4 || frames.dim(1) != img || frames.dim(2) != img ||
      frames.dim(3) != cfg.channels_in) {
    throw ConfigError("frames of shape " + shape_str(frames.shape()) + " do not match image_size " +
                      std::to_string(img) + " with " + std::to_string(cfg.channels_in) +
                      " channels");
  }
  const std::size_t t = frames.dim(0), c = cfg.width;
  // [T, gy, py, gx, px, ch] -> [T, gy, gx, py, px, ch]
  Tensor patches = reshape(frames, {t, g, ps, g, ps, cfg.channels_in});
  patches = permute(patches, {0, 1, 3, 2, 4, 5});
  patches = reshape(patches, {t, g * g, cfg.patch_dim()});
  Tensor tokens = p.patch_embed(patches);
  Tensor cls = add(Tensor({t, 1, c}, 0.0), p.cls_token);
  return add(concat({cls, tokens}, 1), p.pos_embed);
}

Tensor self_attention(const BlockParams& b, const Tensor& x, std::size_t heads) {
  const std::size_t t = x.dim(0), s = x.dim(1), c = x.dim(2), d = c / heads;
  Tensor qkv = b.qkv(x);
  auto split = [&](std::size_t i, const std::vector<std::size_t>& order) {
    Tensor part = reshape(slice(qkv, 2, i * c, (i + 1) * c), {t, s, heads, d});
    return permute(part, order);
  };
  Tensor q = split(0, {0, 2, 1, 3});  // [T, H, S, d]
  Tensor k = split(1, {0, 2, 3, 1});  // [T, H, d, S]
  Tensor v = split(2, {0, 2, 1, 3});
  Tensor att = softmax(scale(matmul(q, k), 1.0 / std::sqrt(static_cast<double>(d))), 3);
  Tensor ctx = permute(matmul(att, v), {0, 2, 1, 3});
  return b.proj(reshape(ctx, {t, s, c}));
}

Tensor vit_block(const BlockParams& b, const Tensor& x, std::size_t heads) {
  Tensor h = add(x, self_attention(b, b.norm1(x), heads));
  return add(h, b.fc2(gelu(b.fc1(b.norm2(h)))));
}

Tensor classify(const BackboneParams& p, const Tensor& tokens) {
  const std::size_t t = tokens.dim(0), c = tokens.dim(2);
  Tensor cls = reshape(slice(tokens, 1, 0, 1), {t, c});
  Tensor pooled = mean_axis(p.final_norm(cls), 0);
  return reshape(p.head(reshape(pooled, {1, c})), {p.config.num_classes});
}

}  // namespace inti::vit
