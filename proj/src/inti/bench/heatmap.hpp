#pragma once

#include <filesystem>
#include <vector>

#include "inti/vit/video_model.hpp"

namespace inti::bench {

// Per-token weight of each source frame in the final frame it ends up in:
// the product of the alpha/beta values along its chain of stages.
struct CumulativeWeights {
  std::size_t source_frames = 0;
  std::size_t tokens = 0;                // N + 1; index 0 is the class token
  std::vector<std::size_t> final_frame;  // per source frame
  std::vector<double> weights;           // [source_frames][tokens]

  double at(std::size_t frame, std::size_t token) const { return weights[frame * tokens + token]; }
};

// Throws ContractError unless there is at least one stage and every stage
// produced a weight field.
CumulativeWeights cumulative_weights(const std::vector<vit::StageTrace>& stages,
                                     std::size_t frames, std::size_t tokens);

struct HeatmapExport {
  CumulativeWeights weights;
  std::vector<std::filesystem::path> files;
};

// Writes, for a clip [T, H, W, 3]:
//   weights_fNN.pgm  sqrt(N) x sqrt(N) cumulative weight map per source frame
//   frame_fNN.pgm    the source frame in grayscale
//   recon_NN.pgm     each final frame rebuilt from raw pixels with the weights
//   weights.csv      source_frame,final_frame,token,weight (token 0 = class)
// Throws ContractError if the model has no InTI stage.
HeatmapExport export_weight_heatmaps(const vit::VideoModel& model, const Tensor& clip,
                                     const std::filesystem::path& out_dir);

// Binary greyscale PGM (P5), one byte per pixel.
void write_pgm(const std::filesystem::path& file, std::size_t width, std::size_t height,
               const std::vector<std::uint8_t>& pixels);

}  // namespace inti::bench
