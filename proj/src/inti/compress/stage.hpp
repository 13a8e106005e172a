#pragma once

#include <variant>

#include "inti/compress/baselines.hpp"
#include "inti/compress/inti_stage.hpp"

namespace inti::compress {

// Shape of the token grid a stage consumes.
struct StageGeometry {
  std::size_t max_frames;  // frames entering the stage
  std::size_t tokens;      // N + 1
  std::size_t width;       // C
};

// One frame-halving operator bound to an insertion point.
class CompressionStage {
 public:
  using Params = std::variant<IntiParams, LinearPoolParams, ConvPoolParams>;

  // Throws ConfigError if the geometry does not suit the stage kind.
  static CompressionStage create(const StageSpec& spec, const StageGeometry& geometry, Rng& rng);

  const StageSpec& spec() const { return spec_; }
  const Params& params() const { return params_; }
  Params& params() { return params_; }

  // [T, N+1, C] -> [T/2, N+1, C]
  StageOutput apply(const Tensor& x) const;

  void collect(const std::string& prefix, nn::ParamList& out) const;

 private:
  CompressionStage(StageSpec spec, Params params) : spec_(spec), params_(std::move(params)) {}

  StageSpec spec_;
  Params params_;
};

}  // namespace inti::compress
