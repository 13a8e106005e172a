#pragma once

#include <filesystem>

#include "inti/vit/video_model.hpp"
#include "json.hpp"

namespace inti::vit {

// Checkpoint directory layout:
//   manifest.json        config, frame count, stage specs, parameter index
//   params/<name>.tensor one serialized tensor per parameter
// `extra` is stored verbatim under the manifest's "experiment" key.
void save_checkpoint(const std::filesystem::path& dir, const VideoModel& model,
                     const nlohmann::json& extra = nlohmann::json::object());

struct LoadedCheckpoint {
  VideoModel model;
  nlohmann::json manifest;
};

LoadedCheckpoint load_checkpoint(const std::filesystem::path& dir);

}  // namespace inti::vit
