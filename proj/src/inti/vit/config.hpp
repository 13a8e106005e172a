#pragma once

#include <cstddef>

#include "json.hpp"

namespace inti::vit {

struct ViTConfig {
  std::size_t image_size = 32;
  std::size_t patch_size = 8;
  std::size_t channels_in = 3;
  std::size_t depth = 6;
  std::size_t width = 64;
  std::size_t heads = 4;
  double mlp_ratio = 4.0;
  std::size_t num_classes = 4;

  // Throws ConfigError on inconsistent values.
  void validate() const;

  std::size_t grid() const { return image_size / patch_size; }
  std::size_t num_patches() const { return grid() * grid(); }
  std::size_t seq_len() const { return num_patches() + 1; }
  std::size_t head_dim() const { return width / heads; }
  std::size_t mlp_hidden() const;
  std::size_t patch_dim() const { return patch_size * patch_size * channels_in; }

  bool operator==(const ViTConfig&) const = default;

  static ViTConfig vit_b16();
  static ViTConfig vit_l14();
};

void to_json(nlohmann::json& j, const ViTConfig& c);
void from_json(const nlohmann::json& j, ViTConfig& c);

}  // namespace inti::vit
