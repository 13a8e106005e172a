#pragma once

#include <optional>
#include <span>
#include <vector>

#include "inti/compress/stage.hpp"
#include "inti/vit/backbone.hpp"

namespace inti::vit {

// What one compression stage did during a forward pass.
struct StageTrace {
  std::size_t index;
  compress::StageSpec spec;
  std::size_t frames_in;
  std::size_t tokens_out;
  std::optional<compress::WeightField> weights;
};

struct ForwardOptions {
  // Verify the convex-combination invariant after every weighted stage whose
  // head normalizes its weights (throws NumericError on violation).
  bool check_simplex = false;
};

struct ForwardResult {
  Tensor logits;  // [num_classes]
  std::vector<StageTrace> stages;
  std::vector<std::size_t> frames_per_block;  // live frame count at each block
};

// Runs every block on every frame and averages the final class tokens.
Tensor naive_video_forward(const BackboneParams& backbone, const Tensor& frames);

// As naive_video_forward, with each stage halving the frame count after its
// block. Throws ContractError naming the stage if it receives an odd count.
ForwardResult compressed_video_forward(const BackboneParams& backbone,
                                       std::span<const compress::CompressionStage> stages,
                                       const Tensor& frames, const ForwardOptions& options = {});

// Throws ConfigError unless stages are ordered, inserted in [1, depth-1],
// and every stage receives an even frame count (>= 4 for InTI).
void validate_schedule(const ViTConfig& config, std::size_t frames,
                       std::span<const compress::StageSpec> stages);

// Backbone plus a compression schedule, initialized from one seed.
class VideoModel {
 public:
  VideoModel(const ViTConfig& config, std::size_t frames, std::vector<compress::StageSpec> stages,
             std::uint64_t seed);

  const ViTConfig& config() const { return backbone_.config; }
  std::size_t frames() const { return frames_; }
  const BackboneParams& backbone() const { return backbone_; }
  BackboneParams& backbone() { return backbone_; }
  const std::vector<compress::CompressionStage>& stages() const { return stages_; }
  std::vector<compress::CompressionStage>& stages() { return stages_; }
  std::vector<compress::StageSpec> stage_specs() const;

  ForwardResult forward(const Tensor& clip, const ForwardOptions& options = {}) const;
  nn::ParamList parameters() const;

 private:
  std::size_t frames_;
  BackboneParams backbone_;
  std::vector<compress::CompressionStage> stages_;
};

}  // namespace inti::vit
