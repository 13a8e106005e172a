#include "inti/vit/checkpoint.hpp"

#include <algorithm>
#include <fstream>

#include "inti/tensor/serialize.hpp"

namespace inti::vit {

namespace fs = std::filesystem;

void save_checkpoint(const fs::path& dir, const VideoModel& model, const nlohmann::json& extra) {
  fs::create_directories(dir / "params");
  nlohmann::json manifest;
  manifest["format"] = "inti-checkpoint";
  manifest["version"] = 1;
  manifest["config"] = model.config();
  manifest["frames"] = model.frames();
  manifest["stages"] = model.stage_specs();
  manifest["experiment"] = extra;
  nlohmann::json index = nlohmann::json::object();
  for (const auto& [name, t] : model.parameters()) {
    const std::string file = "params/" + name + ".tensor";
    save_tensor(dir / file, t);
    index[name] = file;
  }
  manifest["parameters"] = index;
  std::ofstream os(dir / "manifest.json");
  if (!os) throw IoError("cannot write " + (dir / "manifest.json").string());
  os << manifest.dump(2) << '\n';
}

LoadedCheckpoint load_checkpoint(const fs::path& dir) {
  std::ifstream is(dir / "manifest.json");
  if (!is) throw IoError("no checkpoint manifest in " + dir.string());
  nlohmann::json manifest;
  try {
    manifest = nlohmann::json::parse(is);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed checkpoint manifest: ") + e.what());
  }
  if (manifest.value("format", std::string()) != "inti-checkpoint")
    throw ConfigError("not an inti checkpoint: " + dir.string());
  ViTConfig config;
  std::vector<compress::StageSpec> stages;
  std::size_t frames = 0;
  try {
    config = manifest.at("config").get<ViTConfig>();
    stages = manifest.at("stages").get<std::vector<compress::StageSpec>>();
    frames = manifest.at("frames").get<std::size_t>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("checkpoint manifest: ") + e.what());
  }
  VideoModel model(config, frames, stages, 0);
  const auto& index = manifest.at("parameters");
  for (auto& [name, t] : model.parameters()) {
    if (!index.contains(name)) throw ConfigError("checkpoint is missing parameter " + name);
    Tensor loaded = load_tensor(dir / index.at(name).get<std::string>());
    if (loaded.shape() != t.shape()) {
      throw ShapeError("parameter " + name + " has shape " + shape_str(loaded.shape()) +
                       ", expected " + shape_str(t.shape()));
    }
    auto dst = t.mutable_data();
    std::copy(loaded.data().begin(), loaded.data().end(), dst.begin());
  }
  return {std::move(model), std::move(manifest)};
}

}  // namespace inti::vit
