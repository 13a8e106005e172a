#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "inti/bench/experiment.hpp"
#include "inti/bench/heatmap.hpp"
#include "inti/cost/cost_model.hpp"

using namespace inti;
using namespace inti::bench;
using compress::StageKind;
using compress::StageSpec;

namespace {

ShapesSpec small_data(std::size_t clips, std::size_t frames = 8) {
  ShapesSpec s;
  s.clips = clips;
  s.frames = frames;
  s.image_size = 8;
  s.shape_size = 3;
  s.speed = 1;
  return s;
}

ExperimentConfig small_experiment() {
  ExperimentConfig c;
  c.model.image_size = 8;
  c.model.patch_size = 4;
  c.model.depth = 2;
  c.model.width = 8;
  c.model.heads = 2;
  c.model.mlp_ratio = 2.0;
  c.train_data = small_data(8);
  c.test_data = small_data(8);
  c.optimizer.epochs = 2;
  c.optimizer.batch_size = 4;
  c.optimizer.learning_rate = 0.01;
  StageSpec s;
  s.insert_after_block = 1;
  c.stages = {s};
  c.seed = 3;
  c.data_seed = 4;
  return c;
}

bool same_params(const vit::VideoModel& a, const vit::VideoModel& b) {
  auto pa = a.parameters(), pb = b.parameters();
  if (pa.size() != pb.size()) return false;
  for (std::size_t i = 0; i < pa.size(); ++i)
    if (!std::equal(pa[i].second.data().begin(), pa[i].second.data().end(), pb[i].second.data().begin()))
      return false;
  return true;
}

std::filesystem::path scratch(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("inti_test_" + name);
  std::filesystem::remove_all(dir);
  return dir;
}

}  // namespace

TEST_CASE("moving shapes generator") {
  ShapesSpec spec;
  spec.clips = 12;
  auto a = generate_moving_shapes(5, spec);
  auto b = generate_moving_shapes(5, spec);
  CHECK(a.clips.shape() == Shape{12, 8, 32, 32, 3});
  CHECK(std::equal(a.clips.data().begin(), a.clips.data().end(), b.clips.data().begin()));
  CHECK(a.labels == b.labels);
  for (double v : a.clips.data()) CHECK((v >= 0.0 && v <= 1.0));
  for (auto l : a.labels) CHECK(l < 4);

  SUBCASE("reversing time swaps right and left") {
    // Without noise, frame f+1 of a rightward clip is frame f rolled right by
    // `speed`; read backwards it is the same image rolled left.
    ShapesSpec one = spec;
    one.clips = 64;
    one.noise = 0.0;
    auto d = generate_moving_shapes(6, one);
    const std::size_t h = 32, sp = one.speed;
    std::size_t right = 0, left = 0, mismatches = 0;
    for (std::size_t i = 0; i < d.size(); ++i) {
      if (d.labels[i] != kRight && d.labels[i] != kLeft) continue;
      (d.labels[i] == kRight ? right : left) += 1;
      Tensor c = d.clip(i);
      for (std::size_t f = 0; f + 1 < one.frames; ++f)
        for (std::size_t y = 0; y < h; ++y)
          for (std::size_t x = 0; x < h; ++x) {
            // Reversed clip: r(f) = c(T-1-f). A leftward clip satisfies
            // r(f+1)[x] = r(f)[x + sp], i.e. c(g)[x] = c(g+1)[x + sp] for rightward c.
            const std::size_t shifted = d.labels[i] == kRight ? (x + sp) % h : (x + h - sp) % h;
            mismatches += c.data()[((f * h + y) * h + x) * 3] != c.data()[(((f + 1) * h + y) * h + shifted) * 3];
          }
    }
    CHECK(right > 0);
    CHECK(left > 0);
    CHECK(mismatches == 0);
  }
  SUBCASE("eight classes mix shapes") {
    ShapesSpec eight = spec;
    eight.num_classes = 8;
    eight.clips = 64;
    auto d = generate_moving_shapes(7, eight);
    CHECK(*std::max_element(d.labels.begin(), d.labels.end()) >= 4);
  }
  SUBCASE("invalid sizes") {
    ShapesSpec bad = spec;
    bad.num_classes = 5;
    CHECK_THROWS_AS(generate_moving_shapes(1, bad), ConfigError);
    bad = spec;
    bad.shape_size = 40;
    CHECK_THROWS_AS(generate_moving_shapes(1, bad), ConfigError);
  }
  SUBCASE("splits differ and round-trip through disk") {
    auto s = generate_splits(9, spec, spec);
    CHECK_FALSE(std::equal(s.train.clips.data().begin(), s.train.clips.data().end(), s.test.clips.data().begin()));
    auto dir = scratch("data");
    save_dataset(dir, s.test);
    auto back = load_dataset(dir);
    CHECK(back.labels == s.test.labels);
    CHECK(back.split == "test");
    CHECK(std::equal(back.clips.data().begin(), back.clips.data().end(), s.test.clips.data().begin()));
    std::filesystem::remove_all(dir);
  }
}

TEST_CASE("experiment config json") {
  auto c = small_experiment();
  nlohmann::json j = c;
  auto back = j.get<ExperimentConfig>();
  CHECK(nlohmann::json(back) == j);
  c.model.num_classes = 8;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = small_experiment();
  c.train_data.frames = 6;
  CHECK_THROWS_AS(c.validate(), ConfigError);
}

TEST_CASE("cosine schedule") {
  OptimizerConfig o;
  o.learning_rate = 1.0;
  CHECK(cosine_lr(o, 0, 10) == 1.0);
  CHECK(cosine_lr(o, 5, 10) == doctest::Approx(0.5));
  o.warmup_steps = 4;
  CHECK(cosine_lr(o, 0, 10) == 0.25);
  CHECK(cosine_lr(o, 4, 10) == 1.0);
}

TEST_CASE("zero learning rate leaves parameters unchanged") {
  auto c = small_experiment();
  c.optimizer.learning_rate = 0.0;
  c.optimizer.weight_decay = 0.1;
  auto r = train(c);
  vit::VideoModel fresh(c.model, c.frames(), c.stages, c.seed);
  CHECK(same_params(r.model, fresh));
  CHECK(r.history.size() == 2);
}

TEST_CASE("one small step lowers the sample loss") {
  auto c = small_experiment();
  c.train_data.clips = 1;
  c.optimizer.epochs = 1;
  c.optimizer.batch_size = 1;
  c.optimizer.learning_rate = 1e-3;
  c.optimizer.weight_decay = 0.0;
  auto data = generate_splits(c.data_seed, c.train_data, c.test_data);
  vit::VideoModel before(c.model, c.frames(), c.stages, c.seed);
  const double l0 = cross_entropy(before.forward(data.train.clip(0)).logits, {data.train.labels[0]}).item();
  auto r = train(c, data.train, data.test);
  const double l1 = cross_entropy(r.model.forward(data.train.clip(0)).logits, {data.train.labels[0]}).item();
  CHECK(l1 < l0);
}

TEST_CASE("stage learning-rate scale only touches stage parameters") {
  auto c = small_experiment();
  c.stages[0].kind = StageKind::kLinearPool;
  c.train_data.clips = 4;
  c.optimizer.epochs = 1;
  c.optimizer.batch_size = 4;
  c.optimizer.weight_decay = 0.0;
  auto data = generate_splits(c.data_seed, c.train_data, c.test_data);
  vit::VideoModel init(c.model, c.frames(), c.stages, c.seed);
  auto one = train(c, data.train, data.test);
  c.optimizer.stage_lr_scale = 4.0;
  auto four = train(c, data.train, data.test);

  auto p0 = init.parameters(), p1 = one.model.parameters(), p4 = four.model.parameters();
  bool stage_moved = false;
  for (std::size_t i = 0; i < p0.size(); ++i) {
    CAPTURE(p0[i].first);
    const bool stage = p0[i].first.rfind("stages.", 0) == 0;
    for (std::size_t k = 0; k < p0[i].second.numel(); ++k) {
      const double d1 = p1[i].second[k] - p0[i].second[k], d4 = p4[i].second[k] - p0[i].second[k];
      if (stage) {
        CHECK(d4 == doctest::Approx(4.0 * d1).epsilon(1e-9));
        stage_moved = stage_moved || d1 != 0.0;
      } else {
        CHECK(p1[i].second[k] == p4[i].second[k]);
      }
    }
  }
  CHECK(stage_moved);

  c.optimizer.stage_lr_scale = 0.0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
}

TEST_CASE("training is bit-reproducible") {
  auto c = small_experiment();
  c.stages.push_back(StageSpec{StageKind::kLinearPool, 2});
  c.model.depth = 3;
  auto a = train(c), b = train(c);
  CHECK(same_params(a.model, b.model));
  REQUIRE(a.history.size() == b.history.size());
  for (std::size_t i = 0; i < a.history.size(); ++i) {
    CHECK(a.history[i].train_loss == b.history[i].train_loss);
    CHECK(a.history[i].test_accuracy == b.history[i].test_accuracy);
  }
}

TEST_CASE("divergence aborts with a diagnostic") {
  auto c = small_experiment();
  c.optimizer.learning_rate = 1e200;
  c.optimizer.epochs = 3;
  c.check_simplex = false;
  try {
    train(c);
    FAIL("expected a numeric error");
  } catch (const NumericError& e) {
    CHECK(std::string(e.what()).find("step") != std::string::npos);
  }
}

TEST_CASE("evaluation") {
  auto c = small_experiment();
  vit::VideoModel m(c.model, c.frames(), c.stages, 1);
  ShapesSpec big = small_data(400);
  auto d = generate_moving_shapes(11, big);
  SUBCASE("perfect and random predictions") {
    CHECK(accuracy(d.labels, d.labels) == 100.0);
    Rng rng(12);
    std::vector<std::size_t> guess(d.size());
    for (auto& g : guess) g = rng.below(4);
    CHECK(std::abs(accuracy(guess, d.labels) - 25.0) <= 5.0);
  }
  SUBCASE("threads agree with a single thread") {
    CHECK(predict(m, d, 1) == predict(m, d, 3));
  }
  SUBCASE("shape mismatch") {
    CHECK_THROWS_AS(evaluate(m, generate_moving_shapes(1, small_data(4, 4))), ShapeError);
  }
}

TEST_CASE("single-frame classifier cannot read the direction") {
  // Trained on single frames it can only guess: positions are uniform on the
  // torus whatever the direction.
  ExperimentConfig c = small_experiment();
  c.stages.clear();
  c.train_data = small_data(256, 1);
  c.test_data = small_data(400, 1);
  c.optimizer.epochs = 6;
  c.optimizer.batch_size = 16;
  c.optimizer.learning_rate = 0.02;
  auto r = train(c);
  CHECK(r.history.back().test_accuracy <= 25.0 + 10.0);
}

TEST_CASE("cumulative weights and heatmaps") {
  vit::ViTConfig cfg = small_experiment().model;
  cfg.depth = 3;
  StageSpec s1, s2;
  s1.insert_after_block = 1;
  s2.insert_after_block = 2;
  vit::VideoModel m(cfg, 8, {s1, s2}, 21);
  for (auto& [name, t] : m.parameters())
    if (name.rfind("stages.", 0) == 0)
      for (double& v : t.mutable_data()) v += 0.3;
  auto d = generate_moving_shapes(22, small_data(2));
  Tensor clip = d.clip(0);

  auto dir = scratch("viz");
  auto ex = export_weight_heatmaps(m, clip, dir);
  const auto& cw = ex.weights;
  SUBCASE("telescoping to one across the four sources") {
    for (std::size_t j = 0; j < 2; ++j)
      for (std::size_t k = 0; k < cw.tokens; ++k) {
        double total = 0.0;
        for (std::size_t f = 0; f < 8; ++f)
          if (cw.final_frame[f] == j) {
            CHECK(cw.at(f, k) >= 0.0);
            total += cw.at(f, k);
          }
        CHECK(std::abs(total - 1.0) <= 1e-12);
      }
  }
  SUBCASE("csv equals the recomputed products") {
    auto r = m.forward(clip);
    const auto a0 = r.stages[0].weights->alpha.data(), b0 = r.stages[0].weights->beta.data();
    const auto a1 = r.stages[1].weights->alpha.data(), b1 = r.stages[1].weights->beta.data();
    std::ifstream csv(dir / "weights.csv");
    std::string header;
    std::getline(csv, header);
    CHECK(header == "source_frame,final_frame,token,weight");
    std::size_t f, j, k, rows = 0;
    double w;
    char comma;
    const std::size_t s = cfg.seq_len();
    while (csv >> f >> comma >> j >> comma >> k >> comma >> w) {
      const double first = (f % 2 == 0 ? a0 : b0)[(f / 2) * s + k];
      const double second = ((f / 2) % 2 == 0 ? a1 : b1)[(f / 4) * s + k];
      CHECK(w == first * second);
      CHECK(j == f / 4);
      ++rows;
    }
    CHECK(rows == 8 * s);
  }
  SUBCASE("files") {
    CHECK(std::filesystem::exists(dir / "weights_f07.pgm"));
    CHECK(std::filesystem::exists(dir / "recon_01.pgm"));
    std::ifstream pgm(dir / "weights_f00.pgm", std::ios::binary);
    std::string magic;
    std::size_t w = 0, h = 0, maxval = 0;
    pgm >> magic >> w >> h >> maxval;
    CHECK(magic == "P5");
    CHECK(w == cfg.grid());
    CHECK(h == cfg.grid());
  }
  std::filesystem::remove_all(dir);
}

TEST_CASE("fresh single stage renders mid-gray") {
  vit::ViTConfig cfg = small_experiment().model;
  StageSpec s;
  s.insert_after_block = 1;
  vit::VideoModel m(cfg, 4, {s}, 31);
  auto dir = scratch("gray");
  auto ex = export_weight_heatmaps(m, generate_moving_shapes(1, small_data(1, 4)).clip(0), dir);
  for (double w : ex.weights.weights) CHECK(w == 0.5);
  std::ifstream pgm(dir / "weights_f01.pgm", std::ios::binary);
  std::string line;
  for (int i = 0; i < 3; ++i) std::getline(pgm, line);
  std::vector<char> px(cfg.grid() * cfg.grid());
  pgm.read(px.data(), static_cast<std::streamsize>(px.size()));
  for (char p : px) CHECK(static_cast<unsigned char>(p) == 128);
  std::filesystem::remove_all(dir);

  StageSpec lp;
  lp.kind = StageKind::kLinearPool;
  lp.insert_after_block = 1;
  vit::VideoModel nointi(cfg, 4, {lp}, 31);
  CHECK_THROWS_AS(export_weight_heatmaps(nointi, generate_moving_shapes(1, small_data(1, 4)).clip(0), scratch("x")),
                  ContractError);
}
