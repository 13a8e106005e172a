// inti-lab: command-line front end over the inti C API.
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "inti/inti.h"

namespace {

using nlohmann::json;

int exit_code(inti_status s) {
  switch (s) {
    case INTI_OK: return 0;
    case INTI_ERR_NUMERIC: return 3;
    case INTI_ERR_CONFIG:
    case INTI_ERR_SHAPE:
    case INTI_ERR_CONTRACT:
    case INTI_ERR_IO: return 2;
    default: return 1;
  }
}

struct Failure {
  inti_status status;
};

void check(inti_status s) {
  if (s != INTI_OK) throw Failure{s};
}

// Takes ownership of a string returned by the library.
std::string take(char* s) {
  std::string out = s ? s : "";
  inti_string_free(s);
  return out;
}

std::string read_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) {
    std::cerr << json{{"error", "cannot read " + path}, {"status", "io error"}}.dump() << '\n';
    throw Failure{INTI_ERR_IO};
  }
  std::stringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

struct Model {
  inti_model* p = nullptr;
  ~Model() { inti_model_free(p); }
};

struct Dataset {
  inti_dataset* p = nullptr;
  ~Dataset() { inti_dataset_free(p); }
};

// Test split for a checkpoint: from --data if given, otherwise regenerated
// from the experiment stored with the checkpoint.
void open_data(const inti_model* m, const std::string& dir, Dataset& d) {
  if (dir.empty()) check(inti_model_test_data(m, &d.p));
  else check(inti_dataset_load(dir.c_str(), &d.p));
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"InTI video transformer lab: data generation, training, evaluation, cost reports"};
  app.require_subcommand(1);
  app.set_version_flag("--version", inti_version());

  auto* gen = app.add_subcommand("gen", "Generate moving-shapes train/test splits");
  std::uint64_t gen_seed = 0;
  std::string gen_out, gen_config;
  json gen_spec{{"clips", 256}, {"frames", 8}, {"image_size", 32}, {"num_classes", 4}};
  std::size_t test_clips = 200;
  gen->add_option("--seed", gen_seed, "Dataset seed")->required();
  gen->add_option("--out", gen_out, "Output directory (train/ and test/ are created)")->required();
  gen->add_option("--config", gen_config, "Experiment config whose train_data/test_data to use");
  gen->add_option_function<std::size_t>("--clips", [&](std::size_t v) { gen_spec["clips"] = v; }, "Training clips");
  gen->add_option("--test-clips", test_clips, "Test clips");
  gen->add_option_function<std::size_t>("--frames", [&](std::size_t v) { gen_spec["frames"] = v; }, "Frames per clip");
  gen->add_option_function<std::size_t>("--image-size", [&](std::size_t v) { gen_spec["image_size"] = v; },
                                        "Frame side length in pixels");
  gen->add_option_function<std::size_t>("--classes", [&](std::size_t v) { gen_spec["num_classes"] = v; },
                                        "4 (direction) or 8 (direction x shape)");

  auto* train = app.add_subcommand("train", "Train a model from an experiment config");
  std::string train_config, train_out, train_data;
  bool quiet = false;
  train->add_option("--config", train_config, "Experiment config (JSON)")->required()->check(CLI::ExistingFile);
  train->add_option("--out", train_out, "Output directory")->required();
  train->add_option("--data", train_data, "Dataset directory from `gen` (default: generate from config)");
  train->add_flag("--quiet", quiet, "No per-epoch progress on stderr");

  auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint on a dataset");
  std::string eval_ckpt, eval_data;
  std::size_t threads = 1;
  eval->add_option("--ckpt", eval_ckpt, "Checkpoint directory")->required();
  eval->add_option("--data", eval_data, "Dataset directory (a split written by `gen`)")->required();
  eval->add_option("--threads", threads, "Evaluation threads")->check(CLI::Range(1, 256));

  auto* flops = app.add_subcommand("flops", "MAC cost report for a configuration");
  std::string flops_config, preset;
  std::size_t preset_frames = 16;
  bool table = false;
  flops->add_option("--config", flops_config, "Experiment config (JSON)")->check(CLI::ExistingFile);
  flops->add_option("--preset", preset, "Reference table for vit-b16 or vit-l14")
      ->check(CLI::IsMember({"vit-b16", "vit-l14"}))
      ->excludes("--config");
  flops->add_option("--frames", preset_frames, "Frames for --preset");
  flops->add_flag("--table", table, "Print a text table instead of JSON");

  auto* viz = app.add_subcommand("viz", "Export per-frame fusion-weight heatmaps for one clip");
  std::string viz_ckpt, viz_out, viz_data;
  std::size_t clip_index = 0;
  viz->add_option("--ckpt", viz_ckpt, "Checkpoint directory")->required();
  viz->add_option("--clip", clip_index, "Clip index")->required();
  viz->add_option("--out", viz_out, "Output directory")->required();
  viz->add_option("--data", viz_data, "Dataset directory (default: regenerate the test split)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*gen) {
      json train_spec = gen_spec, test_spec = gen_spec;
      test_spec["clips"] = test_clips;
      if (!gen_config.empty()) {
        json ex = json::parse(read_file(gen_config));
        if (ex.contains("train_data")) train_spec = ex["train_data"];
        test_spec = ex.contains("test_data") ? ex["test_data"] : train_spec;
      }
      char* summary = nullptr;
      check(inti_dataset_generate_splits(train_spec.dump().c_str(), test_spec.dump().c_str(), gen_seed,
                                         gen_out.c_str(), &summary));
      std::cout << take(summary) << '\n';
    } else if (*train) {
      const std::string cfg = read_file(train_config);
      auto progress = [](const char* metrics, void*) { std::cerr << metrics << '\n'; };
      char* result = nullptr;
      check(inti_train(cfg.c_str(), train_data.empty() ? nullptr : train_data.c_str(), train_out.c_str(),
                       quiet ? nullptr : +progress, nullptr, &result));
      json r = json::parse(take(result));
      r.erase("history");
      r.erase("config");
      r["checkpoint"] = train_out + "/checkpoint";
      r["metrics"] = train_out + "/metrics.json";
      std::cout << r.dump(2) << '\n';
    } else if (*eval) {
      Model m;
      Dataset d;
      check(inti_model_load(eval_ckpt.c_str(), &m.p));
      check(inti_dataset_load(eval_data.c_str(), &d.p));
      double acc = 0.0;
      check(inti_model_evaluate(m.p, d.p, threads, &acc));
      std::cout << json{{"checkpoint", eval_ckpt}, {"data", eval_data}, {"clips", inti_dataset_size(d.p)},
                        {"accuracy", acc}}
                       .dump(2)
                << '\n';
    } else if (*flops) {
      char* report = nullptr;
      char* text = nullptr;
      if (!preset.empty()) {
        check(inti_flops_table(preset.c_str(), preset_frames, &report, &text));
      } else if (!flops_config.empty()) {
        check(inti_flops(read_file(flops_config).c_str(), &report, &text));
      } else {
        std::cerr << "flops: one of --config or --preset is required\n";
        return 2;
      }
      const std::string r = take(report), t = take(text);
      std::cout << (table ? t : r) << (table ? "" : "\n");
    } else if (*viz) {
      Model m;
      Dataset d;
      check(inti_model_load(viz_ckpt.c_str(), &m.p));
      open_data(m.p, viz_data, d);
      char* summary = nullptr;
      check(inti_export_heatmaps(m.p, d.p, clip_index, viz_out.c_str(), &summary));
      std::cout << take(summary) << '\n';
    }
  } catch (const Failure& f) {
    if (*inti_last_error())
      std::cerr << json{{"error", inti_last_error()}, {"status", inti_status_name(f.status)}}.dump() << '\n';
    return exit_code(f.status);
  } catch (const json::exception& e) {
    std::cerr << json{{"error", e.what()}, {"status", "config error"}}.dump() << '\n';
    return 2;
  }
  return 0;
}
