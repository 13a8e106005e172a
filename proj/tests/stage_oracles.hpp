#pragma once

// Scalar-loop reimplementations of the compression stages, built only from
// the primitives in oracles.hpp and raw parameter arrays.

#include <algorithm>

#include "inti/compress/baselines.hpp"
#include "inti/compress/inti_stage.hpp"
#include "oracles.hpp"

namespace oracle {

inline Vec raw(const inti::Tensor& t) { return {t.data().begin(), t.data().end()}; }

// Row `r` of a row-major [rows, c] array.
inline Vec row(const Vec& v, std::size_t r, std::size_t c) {
  return Vec(v.begin() + static_cast<long>(r * c), v.begin() + static_cast<long>((r + 1) * c));
}

inline Vec cat(const Vec& a, const Vec& b) {
  Vec out = a;
  out.insert(out.end(), b.begin(), b.end());
  return out;
}

// LayerNorm -> affine -> GELU on a single vector.
inline Vec projection(const inti::nn::Projection& p, const Vec& x) {
  Vec h = affine(layer_norm(x, raw(p.norm.gamma), raw(p.norm.beta), 1e-5), raw(p.fc.weight),
                 raw(p.fc.bias));
  for (double& v : h) v = gelu(v);
  return h;
}

struct Weights {
  Vec alpha, beta;  // [T/2][S]
};

struct StageResult {
  Vec tokens;  // [T/2][S][C]
  Weights weights;
};

inline Vec fuse(const Vec& x, const Weights& w, std::size_t t, std::size_t s, std::size_t c) {
  Vec out(t / 2 * s * c);
  for (std::size_t j = 0; j < t / 2; ++j)
    for (std::size_t k = 0; k < s; ++k)
      for (std::size_t ch = 0; ch < c; ++ch)
        out[(j * s + k) * c + ch] = w.alpha[j * s + k] * x[((2 * j) * s + k) * c + ch] +
                                    w.beta[j * s + k] * x[((2 * j + 1) * s + k) * c + ch];
  return out;
}

inline Vec global_feature(const inti::compress::GlobalNet& g, const Vec& cls, std::size_t t,
                          std::size_t c) {
  Vec h = cls;
  std::size_t len = t;
  for (std::size_t i = 0; i < 2; ++i) {
    Vec conv = conv1d(h, raw(g.kernels[i]), raw(g.biases[i]), len, c);
    Vec pooled(len / 2 * c);
    for (std::size_t r = 0; r < len / 2; ++r)
      for (std::size_t ch = 0; ch < c; ++ch)
        pooled[r * c + ch] = gelu(std::max(conv[2 * r * c + ch], conv[(2 * r + 1) * c + ch]));
    h = pooled;
    len /= 2;
  }
  Vec conv = conv1d(h, raw(g.kernels[2]), raw(g.biases[2]), len, c);
  Vec out(c);
  for (std::size_t ch = 0; ch < c; ++ch) {
    double acc = 0.0;
    for (std::size_t r = 0; r < len; ++r) acc += conv[r * c + ch];
    out[ch] = gelu(acc / static_cast<double>(len));
  }
  return out;
}

inline StageResult inti_stage(const inti::compress::IntiParams& p,
                              const inti::compress::StageSpec& spec, const Vec& x, std::size_t t,
                              std::size_t s, std::size_t c) {
  using inti::compress::Fusion;
  using inti::compress::HeadMode;
  const std::size_t half = t / 2, n = s - 1;
  std::size_t g = 0;
  while (g * g < n) ++g;

  const double sigma = p.sigma.data()[0];
  const Vec pos = raw(p.pos_embed);
  Vec xe(x.size());
  for (std::size_t f = 0; f < t; ++f)
    for (std::size_t k = 0; k < s; ++k)
      for (std::size_t ch = 0; ch < c; ++ch)
        xe[(f * s + k) * c + ch] = x[(f * s + k) * c + ch] + sigma * pos[f * c + ch];

  // Cube feature: 3D conv over the spatial tokens only, pair-averaged.
  Vec grid(t * n * c);
  for (std::size_t f = 0; f < t; ++f)
    for (std::size_t k = 0; k < n; ++k)
      for (std::size_t ch = 0; ch < c; ++ch) grid[(f * n + k) * c + ch] = xe[(f * s + k + 1) * c + ch];
  Vec conv = conv3d(grid, raw(p.cube_kernel), t, g, g, c);
  Vec cube(half * s * c, 0.0);
  for (std::size_t j = 0; j < half; ++j)
    for (std::size_t k = 0; k < n; ++k)
      for (std::size_t ch = 0; ch < c; ++ch)
        cube[(j * s + k + 1) * c + ch] =
            (conv[((2 * j) * n + k) * c + ch] + conv[((2 * j + 1) * n + k) * c + ch]) * 0.5;

  Vec cls(t * c);
  for (std::size_t f = 0; f < t; ++f)
    for (std::size_t ch = 0; ch < c; ++ch) cls[f * c + ch] = xe[(f * s) * c + ch];

  Vec frame(half * c);
  for (std::size_t j = 0; j < half; ++j) {
    Vec mixed = projection(p.frame_mix, cat(projection(p.frame_even, row(cls, 2 * j, c)),
                                            projection(p.frame_odd, row(cls, 2 * j + 1, c))));
    std::copy(mixed.begin(), mixed.end(), frame.begin() + static_cast<long>(j * c));
  }
  const Vec global = global_feature(p.global, cls, t, c);

  Weights w{Vec(half * s), Vec(half * s)};
  for (std::size_t j = 0; j < half; ++j)
    for (std::size_t k = 0; k < s; ++k) {
      const Vec even = row(xe, (2 * j) * s + k, c), odd = row(xe, (2 * j + 1) * s + k, c);
      Vec cube_jk = row(cube, j * s + k, c);
      Vec context(c);
      for (std::size_t ch = 0; ch < c; ++ch)
        context[ch] = cube_jk[ch] + frame[j * c + ch] + global[ch];
      double l0 = 0.0, l1 = 0.0;
      if (spec.head == HeadMode::kAttention) {
        const Vec q = raw(p.attention_query);
        for (std::size_t ch = 0; ch < c; ++ch) {
          l0 += (even[ch] + context[ch]) * q[ch];
          l1 += (odd[ch] + context[ch]) * q[ch];
        }
      } else {
        const Vec token = cat(projection(p.token_even, even), projection(p.token_odd, odd));
        Vec feature;
        if (spec.fusion == Fusion::kSepToken) {
          feature = cat(token, context);
        } else if (spec.fusion == Fusion::kAddAll) {
          feature.resize(c);
          for (std::size_t ch = 0; ch < c; ++ch) feature[ch] = token[ch] + context[ch];
        } else {
          feature = cat(cat(token, cube_jk), cat(row(frame, j, c), global));
        }
        Vec h = affine(feature, raw(p.head_fc1.weight), raw(p.head_fc1.bias));
        for (double& v : h) v = gelu(v);
        const Vec logits = affine(h, raw(p.head_fc2.weight), raw(p.head_fc2.bias));
        l0 = logits[0];
        l1 = logits[1];
      }
      double a, b;
      if (spec.head == HeadMode::kSigmoid) {
        a = 1.0 / (1.0 + std::exp(-l0));
        b = 1.0 / (1.0 + std::exp(-l1));
      } else {
        const double m = std::max(l0, l1);
        const double e0 = std::exp(l0 - m), e1 = std::exp(l1 - m);
        a = e0 / (e0 + e1);
        b = e1 / (e0 + e1);
      }
      w.alpha[j * s + k] = a;
      w.beta[j * s + k] = b;
    }
  return {fuse(xe, w, t, s, c), w};
}

inline Vec linear_pooling(const inti::compress::LinearPoolParams& p, const Vec& x, std::size_t t,
                          std::size_t s, std::size_t c) {
  const Vec l = raw(p.logits);
  const double m = std::max(l[0], l[1]);
  const double e0 = std::exp(l[0] - m), e1 = std::exp(l[1] - m);
  Weights w{Vec(t / 2 * s, e0 / (e0 + e1)), Vec(t / 2 * s, e1 / (e0 + e1))};
  return fuse(x, w, t, s, c);
}

// out[j][k][o] = sum_d sum_i x[2j+d][k][i] W[d][i][o] + b[o], x[T] = 0.
inline Vec conv_pooling(const inti::compress::ConvPoolParams& p, const Vec& x, std::size_t t,
                        std::size_t s, std::size_t c) {
  const Vec w = raw(p.kernel), b = raw(p.bias);
  Vec out(t / 2 * s * c);
  for (std::size_t j = 0; j < t / 2; ++j)
    for (std::size_t k = 0; k < s; ++k)
      for (std::size_t o = 0; o < c; ++o) {
        double acc = 0.0;
        for (std::size_t d = 0; d < 3; ++d) {
          const std::size_t f = 2 * j + d;
          if (f >= t) continue;
          for (std::size_t i = 0; i < c; ++i) acc += x[(f * s + k) * c + i] * w[(d * c + i) * c + o];
        }
        out[(j * s + k) * c + o] = acc + b[o];
      }
  return out;
}

}  // namespace oracle
