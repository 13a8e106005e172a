#include <doctest.h>

#include <cmath>

#include "inti/compress/stage.hpp"
#include "inti/tensor/grad_check.hpp"
#include "stage_oracles.hpp"

using namespace inti;
using namespace inti::compress;
using oracle::Vec;

namespace {

constexpr std::size_t kGrid = 3, kTokens = kGrid * kGrid + 1, kWidth = 8;

Tensor random_grid(std::size_t t, std::uint64_t seed, std::size_t s = kTokens,
                   std::size_t c = kWidth) {
  Rng rng(seed);
  return Tensor({t, s, c}, rng.normal_vector(t * s * c));
}

CompressionStage make_stage(const StageSpec& spec, std::size_t frames, std::uint64_t seed) {
  Rng rng(seed);
  return CompressionStage::create(spec, {frames, kTokens, kWidth}, rng);
}

// Moves every parameter off its init value, including sigma and the
// zero-initialized head layer, so no branch is trivially inactive.
void perturb(const CompressionStage& stage, std::uint64_t seed, double amount = 0.5) {
  Rng rng(seed);
  nn::ParamList params;
  stage.collect("s", params);
  for (auto& [name, t] : params) {
    auto d = t.mutable_data();
    for (double& v : d) v += amount * rng.normal();
  }
}

const IntiParams& inti_params(const CompressionStage& s) { return std::get<IntiParams>(s.params()); }

StageSpec inti_spec(Fusion f = Fusion::kSepToken, HeadMode h = HeadMode::kSoftmax) {
  StageSpec s;
  s.fusion = f;
  s.head = h;
  return s;
}

}  // namespace

TEST_CASE("temporal embedding") {
  IntiParams p;
  p.pos_embed = Tensor({4, 1, 3}, 1.0);
  p.sigma = Tensor({1}, 0.0);
  Tensor x = random_grid(4, 1, 5, 3);
  SUBCASE("zero sigma leaves the grid untouched") {
    Tensor y = add_temporal_embedding(x, p.pos_embed, p.sigma);
    CHECK(std::equal(x.data().begin(), x.data().end(), y.data().begin()));
  }
  SUBCASE("unit sigma with ones on a zero grid") {
    Tensor y = add_temporal_embedding(Tensor({4, 5, 3}, 0.0), p.pos_embed, Tensor({1}, 1.0));
    for (double v : y.data()) CHECK(v == 1.0);
  }
  SUBCASE("offset is uniform across tokens of a frame") {
    Rng rng(3);
    Tensor pe({4, 1, 3}, rng.normal_vector(12));
    Tensor y = add_temporal_embedding(x, pe, Tensor({1}, 0.7));
    for (std::size_t t = 0; t < 4; ++t)
      for (std::size_t k = 0; k < 5; ++k)
        for (std::size_t c = 0; c < 3; ++c)
          CHECK(y.data()[(t * 5 + k) * 3 + c] - x.data()[(t * 5 + k) * 3 + c] ==
                doctest::Approx(0.7 * pe.data()[t * 3 + c]).epsilon(1e-12));
  }
  SUBCASE("too many frames") {
    CHECK_THROWS_AS(add_temporal_embedding(random_grid(6, 1, 5, 3), p.pos_embed, p.sigma), ConfigError);
  }
}

TEST_CASE("token feature") {
  auto stage = make_stage(inti_spec(), 4, 7);
  perturb(stage, 8);
  const auto& p = inti_params(stage);
  Tensor x = random_grid(4, 2);
  Tensor even = slice(x, 0, 0, 4, 2), odd = slice(x, 0, 1, 4, 2);
  Tensor f = extract_token_feature(p, even, odd);
  CHECK(f.shape() == Shape{2, kTokens, kWidth});
  // Pair (1, 4) against the hand-composed oracle.
  const Vec e = oracle::row(oracle::raw(x), (2 * kTokens) + 4, kWidth);
  const Vec o = oracle::row(oracle::raw(x), (3 * kTokens) + 4, kWidth);
  const Vec want = oracle::cat(oracle::projection(p.token_even, e), oracle::projection(p.token_odd, o));
  CHECK(oracle::max_abs_diff(oracle::row(oracle::raw(f), kTokens + 4, kWidth), want) < 1e-12);

  SUBCASE("identical frames and shared weights give equal halves") {
    IntiParams q = p;
    q.token_odd = q.token_even;
    Tensor g = extract_token_feature(q, even, even);
    for (std::size_t r = 0; r < 2 * kTokens; ++r)
      for (std::size_t ch = 0; ch < kWidth / 2; ++ch)
        CHECK(g.data()[r * kWidth + ch] == g.data()[r * kWidth + kWidth / 2 + ch]);
  }
}

TEST_CASE("cube feature") {
  auto stage = make_stage(inti_spec(), 4, 11);
  IntiParams p = inti_params(stage);
  Tensor x = random_grid(4, 3);
  SUBCASE("identity kernel reproduces spatial tokens, zero class row") {
    std::vector<double> k(27 * kWidth, 0.0);
    for (std::size_t ch = 0; ch < kWidth; ++ch) k[13 * kWidth + ch] = 1.0;
    p.cube_kernel = Tensor({3, 3, 3, kWidth}, k);
    Tensor cube = cube_conv(p, x);
    for (std::size_t t = 0; t < 4; ++t)
      for (std::size_t tok = 0; tok < kTokens; ++tok)
        for (std::size_t ch = 0; ch < kWidth; ++ch) {
          const std::size_t i = (t * kTokens + tok) * kWidth + ch;
          CHECK(cube.data()[i] == (tok == 0 ? 0.0 : x.data()[i]));
        }
  }
  SUBCASE("random kernel against the loop oracle") {
    Tensor f = extract_cube_feature(p, x);
    CHECK(f.shape() == Shape{2, kTokens, kWidth});
    Vec grid;
    for (std::size_t t = 0; t < 4; ++t)
      for (std::size_t tok = 1; tok < kTokens; ++tok) {
        Vec r = oracle::row(oracle::raw(x), t * kTokens + tok, kWidth);
        grid.insert(grid.end(), r.begin(), r.end());
      }
    Vec conv = oracle::conv3d(grid, oracle::raw(p.cube_kernel), 4, kGrid, kGrid, kWidth);
    double worst = 0.0;
    for (std::size_t j = 0; j < 2; ++j)
      for (std::size_t tok = 0; tok < kTokens; ++tok)
        for (std::size_t ch = 0; ch < kWidth; ++ch) {
          double want = 0.0;
          if (tok > 0) {
            const std::size_t n = kTokens - 1;
            want = (conv[((2 * j) * n + tok - 1) * kWidth + ch] +
                    conv[((2 * j + 1) * n + tok - 1) * kWidth + ch]) * 0.5;
          }
          worst = std::max(worst, std::abs(f.data()[(j * kTokens + tok) * kWidth + ch] - want));
        }
    CHECK(worst < 1e-12);
  }
  SUBCASE("non-square token count") {
    CHECK_THROWS_AS(cube_conv(p, random_grid(4, 1, 6)), ConfigError);
  }
}

TEST_CASE("frame feature") {
  auto stage = make_stage(inti_spec(), 8, 5);
  perturb(stage, 6);
  const auto& p = inti_params(stage);
  Rng rng(9);
  Tensor ce({4, kWidth}, rng.normal_vector(4 * kWidth));
  Tensor co({4, kWidth}, rng.normal_vector(4 * kWidth));
  Tensor f = extract_frame_feature(p, ce, co);
  CHECK(f.shape() == Shape{4, kWidth});
  const Vec want = oracle::projection(
      p.frame_mix, oracle::cat(oracle::projection(p.frame_even, oracle::row(oracle::raw(ce), 2, kWidth)),
                               oracle::projection(p.frame_odd, oracle::row(oracle::raw(co), 2, kWidth))));
  CHECK(oracle::max_abs_diff(oracle::row(oracle::raw(f), 2, kWidth), want) < 1e-12);

  SUBCASE("rowwise: swapping pairs swaps rows") {
    Tensor ce2 = concat({slice(ce, 0, 3, 4), slice(ce, 0, 1, 3), slice(ce, 0, 0, 1)}, 0);
    Tensor co2 = concat({slice(co, 0, 3, 4), slice(co, 0, 1, 3), slice(co, 0, 0, 1)}, 0);
    Tensor g = extract_frame_feature(p, ce2, co2);
    CHECK(oracle::row(oracle::raw(g), 0, kWidth) == oracle::row(oracle::raw(f), 3, kWidth));
    CHECK(oracle::row(oracle::raw(g), 3, kWidth) == oracle::row(oracle::raw(f), 0, kWidth));
  }
}

TEST_CASE("global feature") {
  auto stage = make_stage(inti_spec(), 16, 12);
  perturb(stage, 13);
  IntiParams p = inti_params(stage);
  Rng rng(14);
  SUBCASE("T = 8 against the six-layer pipeline oracle") {
    Tensor cls({8, kWidth}, rng.normal_vector(8 * kWidth));
    Tensor g = extract_global_feature(p, cls);
    CHECK(oracle::max_abs_diff(oracle::raw(g), oracle::global_feature(p.global, oracle::raw(cls), 8, kWidth)) < 1e-12);
  }
  SUBCASE("output shape independent of T") {
    for (std::size_t t : {4, 8, 16})
      CHECK(extract_global_feature(p, Tensor({t, kWidth}, rng.normal_vector(t * kWidth))).shape() ==
            Shape{kWidth});
  }
  SUBCASE("constant input through identity taps") {
    for (std::size_t i = 0; i < 3; ++i) {
      std::vector<double> k(3 * kWidth, 0.0);
      for (std::size_t ch = 0; ch < kWidth; ++ch) k[kWidth + ch] = 1.0;
      p.global.kernels[i] = Tensor({3, kWidth}, k);
      p.global.biases[i] = Tensor({kWidth}, 0.0);
    }
    std::vector<double> v(8 * kWidth);
    for (std::size_t t = 0; t < 8; ++t)
      for (std::size_t ch = 0; ch < kWidth; ++ch) v[t * kWidth + ch] = 0.1 * static_cast<double>(ch);
    Tensor g = extract_global_feature(p, Tensor({8, kWidth}, v));
    // Pipeline on a constant c is gelu(gelu(gelu(c))).
    for (std::size_t ch = 0; ch < kWidth; ++ch) {
      const double c = 0.1 * static_cast<double>(ch);
      CHECK(g.data()[ch] == doctest::Approx(oracle::gelu(oracle::gelu(oracle::gelu(c)))).epsilon(1e-12));
    }
  }
  SUBCASE("too few frames") {
    CHECK_THROWS_AS(extract_global_feature(p, Tensor({2, kWidth}, 0.0)), ContractError);
  }
}

TEST_CASE("fuse_pairs") {
  Tensor x = random_grid(4, 21);
  SUBCASE("alpha one selects even frames") {
    WeightField w{Tensor({2, kTokens}, 1.0), Tensor({2, kTokens}, 0.0)};
    Tensor y = fuse_pairs(x, w);
    Tensor even = slice(x, 0, 0, 4, 2);
    CHECK(std::equal(y.data().begin(), y.data().end(), even.data().begin()));
  }
  SUBCASE("alpha one half is the pairwise average") {
    WeightField w{Tensor({2, kTokens}, 0.5), Tensor({2, kTokens}, 0.5)};
    Tensor y = fuse_pairs(x, w);
    Tensor avg = scale(add(slice(x, 0, 0, 4, 2), slice(x, 0, 1, 4, 2)), 0.5);
    CHECK(std::equal(y.data().begin(), y.data().end(), avg.data().begin()));
  }
  SUBCASE("hand pair and loop oracle") {
    Tensor ab({2, 1, 2}, std::vector<double>{1, 0, 0, 1});
    WeightField w{Tensor({1, 1}, 0.3), Tensor({1, 1}, 0.7)};
    Tensor y = fuse_pairs(ab, w);
    CHECK(y.data()[0] == doctest::Approx(0.3).epsilon(1e-15));
    CHECK(y.data()[1] == doctest::Approx(0.7).epsilon(1e-15));

    Rng rng(22);
    oracle::Weights ow{rng.uniform_vector(2 * kTokens), {}};
    for (double a : ow.alpha) ow.beta.push_back(1.0 - a);
    WeightField tw{Tensor({2, kTokens}, ow.alpha), Tensor({2, kTokens}, ow.beta)};
    CHECK(oracle::max_abs_diff(oracle::raw(fuse_pairs(x, tw)),
                               oracle::fuse(oracle::raw(x), ow, 4, kTokens, kWidth)) == 0.0);
  }
  SUBCASE("shape mismatch") {
    WeightField w{Tensor({3, kTokens}, 0.5), Tensor({3, kTokens}, 0.5)};
    CHECK_THROWS_AS(fuse_pairs(x, w), ContractError);
    CHECK_THROWS_AS(fuse_pairs(random_grid(3, 1), w), ContractError);
  }
}

TEST_CASE("weight prediction modes") {
  Tensor x = random_grid(4, 31);
  SUBCASE("fresh softmax head gives one half everywhere") {
    auto stage = make_stage(inti_spec(), 4, 1);
    auto out = stage.apply(x);
    for (double a : out.weights->alpha.data()) CHECK(a == 0.5);
    for (double b : out.weights->beta.data()) CHECK(b == 0.5);
  }
  SUBCASE("softmax weights sum to one") {
    for (Fusion f : {Fusion::kSepToken, Fusion::kAddAll, Fusion::kCatAll}) {
      auto stage = make_stage(inti_spec(f), 4, 2);
      perturb(stage, 3, 1.0);
      auto out = stage.apply(x);
      for (std::size_t i = 0; i < 2 * kTokens; ++i)
        CHECK(std::abs(out.weights->alpha.data()[i] + out.weights->beta.data()[i] - 1.0) <= 1e-12);
    }
  }
  SUBCASE("sigmoid weights generally do not sum to one") {
    auto stage = make_stage(inti_spec(Fusion::kSepToken, HeadMode::kSigmoid), 4, 2);
    perturb(stage, 3, 1.0);
    auto out = stage.apply(x);
    double off = 0.0;
    for (std::size_t i = 0; i < 2 * kTokens; ++i)
      off = std::max(off, std::abs(out.weights->alpha.data()[i] + out.weights->beta.data()[i] - 1.0));
    CHECK(off > 1e-3);
  }
  SUBCASE("unknown mode names") {
    CHECK_THROWS_AS(nlohmann::json({{"kind", "inti"}, {"insert_after_block", 1}, {"head", "gumbel"}}).get<StageSpec>(),
                    ConfigError);
    CHECK_THROWS_AS(nlohmann::json({{"kind", "inti"}, {"insert_after_block", 1}, {"fusion", "mean"}}).get<StageSpec>(),
                    ConfigError);
    CHECK_THROWS_AS(nlohmann::json({{"kind", "topk"}, {"insert_after_block", 1}}).get<StageSpec>(), ConfigError);
  }
}

TEST_CASE("stage spec json round trip") {
  StageSpec s;
  s.kind = StageKind::kConvPool;
  s.insert_after_block = 3;
  s.fusion = Fusion::kCatAll;
  s.head = HeadMode::kAttention;
  s.head_hidden_ratio = 0.5;
  nlohmann::json j = s;
  CHECK(j.at("kind") == "conv_pool");
  CHECK(j.get<StageSpec>() == s);
}

TEST_CASE("inti stage matches the loop oracle in every mode") {
  Tensor x = random_grid(4, 41);
  for (Fusion f : {Fusion::kSepToken, Fusion::kAddAll, Fusion::kCatAll})
    for (HeadMode h : {HeadMode::kSoftmax, HeadMode::kSigmoid, HeadMode::kAttention}) {
      if (h == HeadMode::kAttention && f != Fusion::kSepToken) continue;
      CAPTURE(to_string(f));
      CAPTURE(to_string(h));
      auto stage = make_stage(inti_spec(f, h), 4, 42);
      perturb(stage, 43);
      auto out = stage.apply(x);
      auto want = oracle::inti_stage(inti_params(stage), stage.spec(), oracle::raw(x), 4, kTokens, kWidth);
      CHECK(oracle::max_abs_diff(oracle::raw(out.weights->alpha), want.weights.alpha) < 1e-12);
      CHECK(oracle::max_abs_diff(oracle::raw(out.weights->beta), want.weights.beta) < 1e-12);
      CHECK(oracle::max_abs_diff(oracle::raw(out.tokens), want.tokens) < 1e-12);
    }
}

TEST_CASE("inti stage at init is pairwise averaging, bit for bit") {
  for (std::size_t t : {4, 8, 16}) {
    auto stage = make_stage(inti_spec(), t, 50 + t);
    Tensor x = random_grid(t, 60 + t);
    Tensor y = stage.apply(x).tokens;
    Tensor avg = scale(add(slice(x, 0, 0, t, 2), slice(x, 0, 1, t, 2)), 0.5);
    CHECK(y.shape() == Shape{t / 2, kTokens, kWidth});
    CHECK(std::equal(y.data().begin(), y.data().end(), avg.data().begin()));
  }
}

TEST_CASE("inti stage invariants under trained-like weights") {
  const std::size_t t = 8;
  auto stage = make_stage(inti_spec(), t, 70);
  perturb(stage, 71, 1.0);
  Tensor x = random_grid(t, 72);
  auto out = stage.apply(x);

  SUBCASE("simplex and convex hull") {
    CHECK_NOTHROW(check_simplex(out.source, out.tokens, *out.weights));
    for (double a : out.weights->alpha.data()) CHECK((a >= 0.0 && a <= 1.0));
  }
  SUBCASE("hull check rejects a point outside") {
    Tensor bad = out.tokens.clone();
    bad.mutable_data()[5] += 10.0;
    CHECK_THROWS_AS(check_simplex(out.source, bad, *out.weights), NumericError);
  }
  SUBCASE("locality with the weight field held fixed") {
    Tensor x2 = out.source.clone();
    // Disturb everything except pair j = 1 at token k = 4.
    auto d = x2.mutable_data();
    for (std::size_t f = 0; f < t; ++f)
      for (std::size_t k = 0; k < kTokens; ++k) {
        if ((f == 2 || f == 3) && k == 4) continue;
        for (std::size_t ch = 0; ch < kWidth; ++ch) d[(f * kTokens + k) * kWidth + ch] += 3.0;
      }
    Tensor y2 = fuse_pairs(x2, *out.weights);
    for (std::size_t ch = 0; ch < kWidth; ++ch) {
      const std::size_t i = (1 * kTokens + 4) * kWidth + ch;
      CHECK(y2.data()[i] == out.tokens.data()[i]);
    }
  }
  SUBCASE("structure and determinism") {
    CHECK(out.tokens.shape() == Shape{t / 2, kTokens, kWidth});
    auto again = make_stage(inti_spec(), t, 70);
    perturb(again, 71, 1.0);
    Tensor y = again.apply(x).tokens;
    CHECK(std::equal(y.data().begin(), y.data().end(), out.tokens.data().begin()));
  }
}

TEST_CASE("inti stage errors") {
  auto stage = make_stage(inti_spec(), 8, 80);
  CHECK_THROWS_AS(stage.apply(random_grid(5, 1)).tokens, ContractError);
  CHECK_THROWS_AS(stage.apply(random_grid(2, 1)).tokens, ContractError);
  CHECK_THROWS_AS(stage.apply(Tensor({4, kTokens}, 0.0)).tokens, ShapeError);
  Rng rng(1);
  CHECK_THROWS_AS(CompressionStage::create(inti_spec(), {2, kTokens, kWidth}, rng), ConfigError);
  CHECK_THROWS_AS(CompressionStage::create(inti_spec(), {8, 7, kWidth}, rng), ConfigError);
}

TEST_CASE("linear pooling") {
  StageSpec spec;
  spec.kind = StageKind::kLinearPool;
  auto stage = make_stage(spec, 4, 1);
  Tensor x = random_grid(4, 90);
  SUBCASE("zero logits average pairs") {
    Tensor y = stage.apply(x).tokens;
    Tensor avg = scale(add(slice(x, 0, 0, 4, 2), slice(x, 0, 1, 4, 2)), 0.5);
    CHECK(std::equal(y.data().begin(), y.data().end(), avg.data().begin()));
  }
  SUBCASE("loop oracle and equivalence with a constant InTI field") {
    auto& p = std::get<LinearPoolParams>(stage.params());
    p.logits.mutable_data()[0] = 0.4;
    p.logits.mutable_data()[1] = -1.1;
    auto out = stage.apply(x);
    CHECK(oracle::max_abs_diff(oracle::raw(out.tokens), oracle::linear_pooling(p, oracle::raw(x), 4, kTokens, kWidth)) == 0.0);
    CHECK_NOTHROW(check_simplex(out.source, out.tokens, *out.weights));
    const double a = out.weights->alpha.data()[0], b = out.weights->beta.data()[0];
    WeightField constant{Tensor({2, kTokens}, a), Tensor({2, kTokens}, b)};
    Tensor viaInti = fuse_pairs(x, constant);
    CHECK(std::equal(viaInti.data().begin(), viaInti.data().end(), out.tokens.data().begin()));
  }
}

TEST_CASE("conv pooling") {
  StageSpec spec;
  spec.kind = StageKind::kConvPool;
  auto stage = make_stage(spec, 4, 1);
  auto& p = std::get<ConvPoolParams>(stage.params());
  SUBCASE("init is pairwise averaging") {
    Tensor x = random_grid(8, 91);
    Tensor y = stage.apply(x).tokens;
    Tensor avg = scale(add(slice(x, 0, 0, 8, 2), slice(x, 0, 1, 8, 2)), 0.5);
    CHECK(oracle::max_abs_diff(oracle::raw(y), oracle::raw(avg)) == 0.0);
  }
  SUBCASE("center identity selects odd frames") {
    std::vector<double> k(3 * kWidth * kWidth, 0.0);
    for (std::size_t i = 0; i < kWidth; ++i) k[(kWidth + i) * kWidth + i] = 1.0;
    p.kernel = Tensor({3, kWidth, kWidth}, k);
    Tensor x = random_grid(4, 92);
    Tensor y = stage.apply(x).tokens;
    Tensor odd = slice(x, 0, 1, 4, 2);
    CHECK(std::equal(y.data().begin(), y.data().end(), odd.data().begin()));
  }
  SUBCASE("random kernel against the loop oracle") {
    Rng rng(93);
    p.kernel = Tensor({3, kWidth, kWidth}, rng.normal_vector(3 * kWidth * kWidth));
    p.bias = Tensor({kWidth}, rng.normal_vector(kWidth));
    Tensor x = random_grid(4, 94);
    auto out = stage.apply(x);
    CHECK_FALSE(out.weights.has_value());
    CHECK(out.tokens.shape() == Shape{2, kTokens, kWidth});
    CHECK(oracle::max_abs_diff(oracle::raw(out.tokens), oracle::conv_pooling(p, oracle::raw(x), 4, kTokens, kWidth)) < 1e-12);
  }
  SUBCASE("odd frames") { CHECK_THROWS_AS(stage.apply(random_grid(5, 1)).tokens, ContractError); }
}

TEST_CASE("full inti stage gradient check") {
  for (HeadMode h : {HeadMode::kSoftmax, HeadMode::kAttention}) {
    CAPTURE(to_string(h));
    auto stage = make_stage(inti_spec(Fusion::kSepToken, h), 4, 100);
    perturb(stage, 101, 0.3);
    Rng rng(102);
    Tensor x = Tensor::parameter({4, kTokens, kWidth}, rng.normal_vector(4 * kTokens * kWidth));
    Tensor probe({2, kTokens, kWidth}, rng.normal_vector(2 * kTokens * kWidth));
    nn::ParamList params;
    stage.collect("stage", params);
    std::vector<Tensor> inputs{x};
    for (auto& [name, t] : params) inputs.push_back(t);
    auto loss = [&] { return sum(mul(stage.apply(x).tokens, probe)); };
    auto r = grad_check(loss, inputs);
    CHECK(r.max_relative_error < 1e-4);
    CHECK(r.probes > 500);
  }
}

TEST_CASE("baseline gradient checks") {
  Rng rng(110);
  Tensor x = Tensor::parameter({4, kTokens, kWidth}, rng.normal_vector(4 * kTokens * kWidth));
  Tensor probe({2, kTokens, kWidth}, rng.normal_vector(2 * kTokens * kWidth));
  for (StageKind k : {StageKind::kLinearPool, StageKind::kConvPool}) {
    StageSpec spec;
    spec.kind = k;
    auto stage = make_stage(spec, 4, 111);
    perturb(stage, 112, 0.3);
    nn::ParamList params;
    stage.collect("stage", params);
    std::vector<Tensor> inputs{x};
    for (auto& [name, t] : params) inputs.push_back(t);
    auto r = grad_check([&] { return sum(mul(stage.apply(x).tokens, probe)); }, inputs);
    CHECK(r.max_relative_error < 1e-4);
  }
}
