#include "inti/compress/stage.hpp"

#include <cmath>

namespace inti::compress {

CompressionStage CompressionStage::create(const StageSpec& spec, const StageGeometry& g,
                                          Rng& rng) {
  const std::size_t n = g.tokens - 1;
  const auto side = static_cast<std::size_t>(std::llround(std::sqrt(static_cast<double>(n))));
  if (side * side != n)
    throw ConfigError(std::to_string(n) + " spatial tokens do not form a square grid");
  if (g.max_frames % 2 != 0)
    throw ConfigError(to_string(spec.kind) + " stage after block " +
                      std::to_string(spec.insert_after_block) + " receives an odd frame count " +
                      std::to_string(g.max_frames));
  switch (spec.kind) {
    case StageKind::kInti:
      if (g.max_frames < 4)
        throw ConfigError("InTI stage after block " + std::to_string(spec.insert_after_block) +
                          " receives " + std::to_string(g.max_frames) +
                          " frames; the global branch needs at least 4");
      return {spec, IntiParams::init(spec, g.max_frames, g.width, rng)};
    case StageKind::kLinearPool:
      return {spec, LinearPoolParams::init()};
    case StageKind::kConvPool:
      return {spec, ConvPoolParams::init(g.width)};
  }
  throw ConfigError("unknown stage kind");
}

StageOutput CompressionStage::apply(const Tensor& x) const {
  return std::visit(
      [&](const auto& p) -> StageOutput {
        using P = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<P, IntiParams>) return inti_stage(p, spec_, x);
        else if constexpr (std::is_same_v<P, LinearPoolParams>) return linear_pooling_stage(p, x);
        else return conv_pooling_stage(p, x);
      },
      params_);
}

void CompressionStage::collect(const std::string& prefix, nn::ParamList& out) const {
  std::visit(
      [&](const auto& p) {
        using P = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<P, IntiParams>) p.collect(prefix, spec_, out);
        else p.collect(prefix, out);
      },
      params_);
}

}  // namespace inti::compress
