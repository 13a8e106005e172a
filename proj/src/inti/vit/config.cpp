#include "inti/vit/config.hpp"

#include <cmath>
#include <string>

#include "inti/errors.hpp"

namespace inti::vit {

void ViTConfig::validate() const {
  auto fail = [](const std::string& m) { throw ConfigError("ViTConfig: " + m); };
  if (patch_size == 0 || image_size == 0) fail("image_size and patch_size must be positive");
  if (image_size % patch_size != 0)
    fail("image_size " + std::to_string(image_size) + " not divisible by patch_size " +
         std::to_string(patch_size));
  if (channels_in == 0 || depth == 0 || width == 0 || heads == 0 || num_classes == 0)
    fail("counts must be positive");
  if (width % heads != 0)
    fail("width " + std::to_string(width) + " not divisible by heads " + std::to_string(heads));
  if (width % 2 != 0) fail("width must be even");
  if (!(mlp_ratio > 0.0) || mlp_hidden() == 0) fail("mlp_ratio must be positive");
}

std::size_t ViTConfig::mlp_hidden() const {
  return static_cast<std::size_t>(std::llround(mlp_ratio * static_cast<double>(width)));
}

ViTConfig ViTConfig::vit_b16() {
  ViTConfig c;
  c.image_size = 224;
  c.patch_size = 16;
  c.depth = 12;
  c.width = 768;
  c.heads = 12;
  c.num_classes = 400;
  return c;
}

ViTConfig ViTConfig::vit_l14() {
  ViTConfig c;
  c.image_size = 224;
  c.patch_size = 14;
  c.depth = 24;
  c.width = 1024;
  c.heads = 16;
  c.num_classes = 400;
  return c;
}

void to_json(nlohmann::json& j, const ViTConfig& c) {
  j = nlohmann::json{{"image_size", c.image_size}, {"patch_size", c.patch_size},
                     {"channels_in", c.channels_in}, {"depth", c.depth},
                     {"width", c.width},           {"heads", c.heads},
                     {"mlp_ratio", c.mlp_ratio},   {"num_classes", c.num_classes}};
}

void from_json(const nlohmann::json& j, ViTConfig& c) {
  ViTConfig d;
  if (j.contains("preset")) {
    const auto name = j.at("preset").get<std::string>();
    if (name == "vit-b16") d = ViTConfig::vit_b16();
    else if (name == "vit-l14") d = ViTConfig::vit_l14();
    else if (name != "desk") throw ConfigError("unknown model preset '" + name + "'");
  }
  c.image_size = j.value("image_size", d.image_size);
  c.patch_size = j.value("patch_size", d.patch_size);
  c.channels_in = j.value("channels_in", d.channels_in);
  c.depth = j.value("depth", d.depth);
  c.width = j.value("width", d.width);
  c.heads = j.value("heads", d.heads);
  c.mlp_ratio = j.value("mlp_ratio", d.mlp_ratio);
  c.num_classes = j.value("num_classes", d.num_classes);
}

}  // namespace inti::vit
