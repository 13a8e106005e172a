#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "inti/tensor/tensor.hpp"
#include "json.hpp"

namespace inti::bench {

// Generation parameters for the moving-shapes task. A shape crosses a torus
// at constant velocity, so every frame's position is uniform whatever the
// direction and the label can only be read from motion.
struct ShapesSpec {
  std::size_t clips = 256;
  std::size_t frames = 8;
  std::size_t image_size = 32;
  std::size_t num_classes = 4;  // 4 directions, or 4 directions x 2 shapes
  std::size_t shape_size = 8;
  std::size_t speed = 2;        // pixels per frame
  double noise = 0.05;          // additive uniform amplitude

  // Throws ConfigError on impossible sizes.
  void validate() const;
};

void to_json(nlohmann::json& j, const ShapesSpec& s);
void from_json(const nlohmann::json& j, ShapesSpec& s);

struct ClipDataset {
  Tensor clips;                      // [M, T, H, W, 3] in [0, 1]
  std::vector<std::size_t> labels;   // direction + 4 * shape
  std::uint64_t seed = 0;
  std::string split;
  ShapesSpec spec;

  std::size_t size() const { return labels.size(); }
  // Clip i as [T, H, W, 3].
  Tensor clip(std::size_t i) const;
};

enum Direction : std::size_t { kRight = 0, kLeft = 1, kDown = 2, kUp = 3 };

ClipDataset generate_moving_shapes(std::uint64_t seed, const ShapesSpec& spec,
                                   const std::string& split = "train");

// Train and test splits drawn from distinct sub-streams of one seed.
struct SplitPair {
  ClipDataset train, test;
};
SplitPair generate_splits(std::uint64_t seed, const ShapesSpec& train, const ShapesSpec& test);

// <dir>/clips.tensor plus <dir>/dataset.json (labels, seed, split, spec).
void save_dataset(const std::filesystem::path& dir, const ClipDataset& d);
ClipDataset load_dataset(const std::filesystem::path& dir);

}  // namespace inti::bench
