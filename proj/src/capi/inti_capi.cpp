#include "inti/inti.h"

#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>

#include "inti/bench/experiment.hpp"
#include "inti/bench/heatmap.hpp"
#include "inti/cost/cost_model.hpp"
#include "inti/vit/checkpoint.hpp"

struct inti_model {
  inti::vit::VideoModel model;
  nlohmann::json experiment;
};

struct inti_dataset {
  inti::bench::ClipDataset data;
};

namespace {

using nlohmann::json;
namespace fs = std::filesystem;

thread_local std::string g_last_error;

char* dup(const std::string& s) {
  char* out = new char[s.size() + 1];
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

inti_status fail(inti_status code, const std::string& message) {
  g_last_error = message;
  return code;
}

template <class Fn>
inti_status guarded(Fn&& fn) {
  try {
    fn();
    g_last_error.clear();
    return INTI_OK;
  } catch (const inti::Error& e) {
    switch (e.kind()) {
      case inti::ErrorKind::kConfig: return fail(INTI_ERR_CONFIG, e.what());
      case inti::ErrorKind::kNumeric: return fail(INTI_ERR_NUMERIC, e.what());
      case inti::ErrorKind::kShape: return fail(INTI_ERR_SHAPE, e.what());
      case inti::ErrorKind::kContract: return fail(INTI_ERR_CONTRACT, e.what());
      case inti::ErrorKind::kIo: return fail(INTI_ERR_IO, e.what());
    }
    return fail(INTI_ERR_INTERNAL, e.what());
  } catch (const json::exception& e) {
    return fail(INTI_ERR_CONFIG, std::string("json: ") + e.what());
  } catch (const std::filesystem::filesystem_error& e) {
    return fail(INTI_ERR_IO, e.what());
  } catch (const std::exception& e) {
    return fail(INTI_ERR_INTERNAL, e.what());
  }
}

json parse(const char* text, const char* what) {
  if (text == nullptr) throw inti::ConfigError(std::string(what) + " is NULL");
  try {
    return json::parse(text);
  } catch (const json::exception& e) {
    throw inti::ConfigError(std::string(what) + ": " + e.what());
  }
}

void require_out(const void* p) {
  if (p == nullptr) throw inti::ContractError("output pointer is NULL");
}

void write_json(const fs::path& file, const json& j) {
  std::ofstream os(file);
  if (!os) throw inti::IoError("cannot write " + file.string());
  os << j.dump(2) << '\n';
}

json describe(const inti_model& m) {
  json params = json::object();
  for (const auto& [name, t] : m.model.parameters()) params[name] = t.shape();
  return {{"config", m.model.config()},
          {"frames", m.model.frames()},
          {"stages", m.model.stage_specs()},
          {"parameter_count", inti::nn::count_parameters(m.model.parameters())},
          {"parameters", params},
          {"experiment", m.experiment}};
}

}  // namespace

extern "C" {

const char* inti_version(void) { return "1.0.0"; }

const char* inti_last_error(void) { return g_last_error.c_str(); }

const char* inti_status_name(inti_status status) {
  switch (status) {
    case INTI_OK: return "ok";
    case INTI_ERR_INTERNAL: return "internal error";
    case INTI_ERR_CONFIG: return "config error";
    case INTI_ERR_NUMERIC: return "numeric error";
    case INTI_ERR_SHAPE: return "shape error";
    case INTI_ERR_CONTRACT: return "contract error";
    case INTI_ERR_IO: return "io error";
  }
  return "unknown status";
}

void inti_string_free(char* s) { delete[] s; }

inti_status inti_dataset_generate(const char* spec_json, uint64_t seed, const char* split,
                                  inti_dataset** out) {
  return guarded([&] {
    require_out(out);
    auto spec = parse(spec_json, "dataset spec").get<inti::bench::ShapesSpec>();
    *out = new inti_dataset{inti::bench::generate_moving_shapes(seed, spec, split ? split : "train")};
  });
}

inti_status inti_dataset_generate_splits(const char* train_spec_json, const char* test_spec_json,
                                         uint64_t seed, const char* dir, char** summary_json) {
  return guarded([&] {
    if (dir == nullptr) throw inti::ConfigError("output directory is NULL");
    auto train = parse(train_spec_json, "train spec").get<inti::bench::ShapesSpec>();
    auto test = parse(test_spec_json, "test spec").get<inti::bench::ShapesSpec>();
    auto splits = inti::bench::generate_splits(seed, train, test);
    inti::bench::save_dataset(fs::path(dir) / "train", splits.train);
    inti::bench::save_dataset(fs::path(dir) / "test", splits.test);
    if (summary_json) {
      json j{{"seed", seed},
             {"train", {{"path", (fs::path(dir) / "train").string()}, {"clips", splits.train.size()}, {"spec", train}}},
             {"test", {{"path", (fs::path(dir) / "test").string()}, {"clips", splits.test.size()}, {"spec", test}}}};
      *summary_json = dup(j.dump(2));
    }
  });
}

inti_status inti_dataset_load(const char* dir, inti_dataset** out) {
  return guarded([&] {
    require_out(out);
    if (dir == nullptr) throw inti::ConfigError("dataset directory is NULL");
    *out = new inti_dataset{inti::bench::load_dataset(dir)};
  });
}

inti_status inti_dataset_save(const inti_dataset* d, const char* dir) {
  return guarded([&] {
    if (d == nullptr || dir == nullptr) throw inti::ContractError("dataset or directory is NULL");
    inti::bench::save_dataset(dir, d->data);
  });
}

size_t inti_dataset_size(const inti_dataset* d) { return d ? d->data.size() : 0; }

inti_status inti_dataset_label(const inti_dataset* d, size_t index, size_t* label) {
  return guarded([&] {
    require_out(label);
    if (d == nullptr || index >= d->data.size()) throw inti::ContractError("clip index out of range");
    *label = d->data.labels[index];
  });
}

void inti_dataset_free(inti_dataset* d) { delete d; }

inti_status inti_model_create(const char* experiment_json, inti_model** out) {
  return guarded([&] {
    require_out(out);
    json j = parse(experiment_json, "experiment config");
    auto cfg = j.get<inti::bench::ExperimentConfig>();
    cfg.validate();
    *out = new inti_model{inti::vit::VideoModel(cfg.model, cfg.frames(), cfg.stages, cfg.seed), json(cfg)};
  });
}

inti_status inti_model_load(const char* checkpoint_dir, inti_model** out) {
  return guarded([&] {
    require_out(out);
    if (checkpoint_dir == nullptr) throw inti::ConfigError("checkpoint directory is NULL");
    auto loaded = inti::vit::load_checkpoint(checkpoint_dir);
    json experiment = loaded.manifest.value("experiment", json::object());
    *out = new inti_model{std::move(loaded.model), experiment.value("config", json::object())};
  });
}

inti_status inti_model_save(const inti_model* m, const char* checkpoint_dir) {
  return guarded([&] {
    if (m == nullptr || checkpoint_dir == nullptr) throw inti::ContractError("model or directory is NULL");
    inti::vit::save_checkpoint(checkpoint_dir, m->model, {{"config", m->experiment}});
  });
}

void inti_model_free(inti_model* m) { delete m; }

inti_status inti_model_info(const inti_model* m, char** info_json) {
  return guarded([&] {
    require_out(info_json);
    if (m == nullptr) throw inti::ContractError("model is NULL");
    *info_json = dup(describe(*m).dump(2));
  });
}

inti_status inti_model_forward(const inti_model* m, const double* clip, size_t clip_len, double* logits,
                               size_t logits_len) {
  return guarded([&] {
    if (m == nullptr || clip == nullptr || logits == nullptr) throw inti::ContractError("NULL argument");
    const auto& c = m->model.config();
    const inti::Shape shape{m->model.frames(), c.image_size, c.image_size, c.channels_in};
    if (clip_len != inti::shape_numel(shape))
      throw inti::ShapeError("clip has " + std::to_string(clip_len) + " values, model expects " +
                             inti::shape_str(shape));
    if (logits_len != c.num_classes)
      throw inti::ShapeError("logits buffer holds " + std::to_string(logits_len) + " values, model has " +
                             std::to_string(c.num_classes) + " classes");
    inti::Tensor x(shape, std::vector<double>(clip, clip + clip_len));
    const inti::Tensor out = m->model.forward(x).logits;
    std::copy(out.data().begin(), out.data().end(), logits);
  });
}

inti_status inti_model_test_data(const inti_model* m, inti_dataset** out) {
  return guarded([&] {
    require_out(out);
    if (m == nullptr) throw inti::ContractError("model is NULL");
    if (!m->experiment.is_object() || m->experiment.empty())
      throw inti::ConfigError("model carries no experiment config");
    auto cfg = m->experiment.get<inti::bench::ExperimentConfig>();
    *out = new inti_dataset{inti::bench::generate_splits(cfg.data_seed, cfg.train_data, cfg.test_data).test};
  });
}

inti_status inti_model_evaluate(const inti_model* m, const inti_dataset* d, size_t threads,
                                double* accuracy_percent) {
  return guarded([&] {
    require_out(accuracy_percent);
    if (m == nullptr || d == nullptr) throw inti::ContractError("model or dataset is NULL");
    *accuracy_percent = inti::bench::evaluate(m->model, d->data, threads);
  });
}

inti_status inti_train(const char* experiment_json, const char* data_dir, const char* out_dir,
                       inti_epoch_fn on_epoch, void* user, char** result_json) {
  return guarded([&] {
    if (out_dir == nullptr) throw inti::ConfigError("output directory is NULL");
    auto cfg = parse(experiment_json, "experiment config").get<inti::bench::ExperimentConfig>();
    cfg.validate();
    inti::bench::SplitPair data =
        data_dir ? inti::bench::SplitPair{inti::bench::load_dataset(fs::path(data_dir) / "train"),
                                          inti::bench::load_dataset(fs::path(data_dir) / "test")}
                 : inti::bench::generate_splits(cfg.data_seed, cfg.train_data, cfg.test_data);
    auto callback = [&](const inti::bench::EpochMetrics& em, const inti::vit::VideoModel&) {
      if (on_epoch) on_epoch(json(em).dump().c_str(), user);
    };
    auto result = inti::bench::train(cfg, data.train, data.test, callback);

    auto report = inti::cost::schedule_macs(cfg.model, cfg.frames(), cfg.stages);
    json metrics{{"name", cfg.name},
                 {"history", result.history},
                 {"final_test_accuracy", result.history.empty() ? 0.0 : result.history.back().test_accuracy},
                 {"total_macs", report.total},
                 {"reduction_vs_naive", report.reduction_vs_naive},
                 {"config", cfg}};
    fs::create_directories(out_dir);
    inti::vit::save_checkpoint(fs::path(out_dir) / "checkpoint", result.model, {{"config", cfg}, {"history", result.history}});
    write_json(fs::path(out_dir) / "metrics.json", metrics);
    if (result_json) *result_json = dup(metrics.dump(2));
  });
}

inti_status inti_flops(const char* experiment_json, char** report_json, char** table) {
  return guarded([&] {
    require_out(report_json);
    json j = parse(experiment_json, "experiment config");
    auto cfg = j.get<inti::bench::ExperimentConfig>();
    const std::size_t frames = j.value("frames", cfg.frames());
    auto report = inti::cost::schedule_macs(cfg.model, frames, cfg.stages);
    auto naive = inti::cost::schedule_macs(cfg.model, frames, {});
    *report_json = dup(json(report).dump(2));
    if (table) *table = dup(inti::cost::format_table({{"Naive", naive}, {cfg.name, report}}));
  });
}

inti_status inti_flops_table(const char* preset, size_t frames, char** report_json, char** table) {
  return guarded([&] {
    require_out(report_json);
    const std::string p = preset ? preset : "";
    const bool large = p == "vit-l14";
    if (!large && p != "vit-b16") throw inti::ConfigError("preset must be vit-b16 or vit-l14, got '" + p + "'");
    auto cfg = large ? inti::vit::ViTConfig::vit_l14() : inti::vit::ViTConfig::vit_b16();
    std::vector<inti::cost::TableRow> rows{{"Naive", inti::cost::schedule_macs(cfg, frames, {})}};
    for (auto [i, j] : {std::pair{3, 5}, std::pair{5, 7}, std::pair{7, 9}}) {
      rows.push_back({"InTI_{" + std::to_string(i) + "," + std::to_string(j) + "}",
                      inti::cost::schedule_macs(cfg, frames, inti::cost::inti_schedule(i, j, large))});
    }
    json out = json::array();
    for (const auto& r : rows) out.push_back({{"method", r.method}, {"report", r.report}});
    *report_json = dup(out.dump(2));
    if (table) *table = dup(inti::cost::format_table(rows));
  });
}

inti_status inti_export_heatmaps(const inti_model* m, const inti_dataset* d, size_t clip_index,
                                 const char* out_dir, char** summary_json) {
  return guarded([&] {
    if (m == nullptr || d == nullptr || out_dir == nullptr) throw inti::ContractError("NULL argument");
    if (clip_index >= d->data.size())
      throw inti::ContractError("clip " + std::to_string(clip_index) + " out of range for " +
                                std::to_string(d->data.size()) + " clips");
    auto ex = inti::bench::export_weight_heatmaps(m->model, d->data.clip(clip_index), out_dir);
    if (summary_json) {
      json files = json::array();
      for (const auto& f : ex.files) files.push_back(f.string());
      *summary_json = dup(json{{"clip", clip_index},
                               {"label", d->data.labels[clip_index]},
                               {"source_frames", ex.weights.source_frames},
                               {"final_frame", ex.weights.final_frame},
                               {"files", files}}
                              .dump(2));
    }
  });
}

}  // extern "C"
