#include "inti/vit/video_model.hpp"

#include "inti/tensor/random.hpp"

namespace inti::vit {

namespace {

std::string stage_name(std::size_t i, const compress::StageSpec& s) {
  return "stage " + std::to_string(i) + " (" + compress::to_string(s.kind) + " after block " +
         std::to_string(s.insert_after_block) + ")";
}

}  // namespace

Tensor naive_video_forward(const BackboneParams& backbone, const Tensor& frames) {
  return compressed_video_forward(backbone, {}, frames).logits;
}

ForwardResult compressed_video_forward(const BackboneParams& backbone,
                                       std::span<const compress::CompressionStage> stages,
                                       const Tensor& frames, const ForwardOptions& options) {
  const ViTConfig& cfg = backbone.config;
  ForwardResult result;
  Tensor x = patchify(backbone, frames);
  std::size_t next = 0;
  for (std::size_t b = 0; b < cfg.depth; ++b) {
    result.frames_per_block.push_back(x.dim(0));
    x = vit_block(backbone.blocks[b], x, cfg.heads);
    while (next < stages.size() && stages[next].spec().insert_after_block == b + 1) {
      const auto& stage = stages[next];
      const std::size_t t = x.dim(0);
      if (t % 2 != 0) {
        throw ContractError(stage_name(next, stage.spec()) + " received an odd frame count " +
                            std::to_string(t));
      }
      compress::StageOutput out = stage.apply(x);
      if (options.check_simplex && out.weights && stage.spec().head != compress::HeadMode::kSigmoid)
        compress::check_simplex(out.source, out.tokens, *out.weights);
      result.stages.push_back({next, stage.spec(), t, out.tokens.dim(1), out.weights});
      x = out.tokens;
      ++next;
    }
  }
  if (next != stages.size()) {
    throw ContractError(stage_name(next, stages[next].spec()) + " was never reached");
  }
  result.logits = classify(backbone, x);
  return result;
}

void validate_schedule(const ViTConfig& config, std::size_t frames,
                       std::span<const compress::StageSpec> stages) {
  if (frames == 0) throw ConfigError("clip must have at least one frame");
  std::size_t t = frames, prev = 0;
  for (std::size_t i = 0; i < stages.size(); ++i) {
    const auto& s = stages[i];
    const std::string name = stage_name(i, s);
    if (s.insert_after_block < 1 || s.insert_after_block + 1 > config.depth)
      throw ConfigError(name + ": insertion must be in [1, " + std::to_string(config.depth - 1) + "]");
    if (s.insert_after_block < prev) throw ConfigError(name + ": stages must be ordered by insertion");
    if (t % 2 != 0) throw ConfigError(name + " receives an odd frame count " + std::to_string(t));
    if (s.kind == compress::StageKind::kInti && t < 4)
      throw ConfigError(name + " receives " + std::to_string(t) + " frames; InTI needs at least 4");
    prev = s.insert_after_block;
    t /= 2;
  }
}

VideoModel::VideoModel(const ViTConfig& config, std::size_t frames,
                       std::vector<compress::StageSpec> stages, std::uint64_t seed)
    : frames_(frames) {
  config.validate();
  validate_schedule(config, frames, stages);
  Rng backbone_rng(Rng::mix(seed, 0));
  backbone_ = BackboneParams::init(config, backbone_rng);
  std::size_t t = frames;
  for (std::size_t i = 0; i < stages.size(); ++i) {
    Rng stage_rng(Rng::mix(seed, 100 + i));
    stages_.push_back(compress::CompressionStage::create(
        stages[i], {t, config.seq_len(), config.width}, stage_rng));
    t /= 2;
  }
}

std::vector<compress::StageSpec> VideoModel::stage_specs() const {
  std::vector<compress::StageSpec> out;
  for (const auto& s : stages_) out.push_back(s.spec());
  return out;
}

ForwardResult VideoModel::forward(const Tensor& clip, const ForwardOptions& options) const {
  if (clip.rank() != 4 || clip.dim(0) != frames_) {
    throw ShapeError("model expects " + std::to_string(frames_) + " frames, got clip " +
                     shape_str(clip.shape()));
  }
  return compressed_video_forward(backbone_, stages_, clip, options);
}

nn::ParamList VideoModel::parameters() const {
  nn::ParamList out;
  backbone_.collect(out);
  for (std::size_t i = 0; i < stages_.size(); ++i) stages_[i].collect("stages." + std::to_string(i), out);
  return out;
}

}  // namespace inti::vit
