#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "inti/compress/stage_spec.hpp"
#include "inti/vit/config.hpp"
#include "json.hpp"

namespace inti::cost {

// Multiply-accumulates, reported one-for-one as FLOPs. Elementwise ops,
// norms and softmax are not counted.
using Macs = std::uint64_t;

// (4 + 2 r) N C^2 + 2 N^2 C for one block over N tokens (class token included).
Macs vit_layer_macs(std::size_t tokens, std::size_t width, double mlp_ratio);

// Per-frame patch embedding: N * patch_dim * C.
Macs patch_embed_macs(const vit::ViTConfig& config);

// Overhead of one stage receiving `frames` frames, from its parameter shapes.
Macs stage_macs(const compress::StageSpec& spec, std::size_t frames, std::size_t tokens,
                std::size_t width);

struct BlockCost {
  std::size_t block;  // 1-based
  std::size_t frames;
  Macs macs;
};

struct StageCost {
  std::size_t index;
  compress::StageSpec spec;
  std::size_t frames_in;
  Macs macs;
};

struct CostReport {
  vit::ViTConfig config;
  std::size_t frames = 0;
  Macs patch_embed = 0;
  std::vector<BlockCost> per_block;
  std::vector<StageCost> stage_overheads;
  Macs total = 0;  // patch_embed + blocks + stages; the classifier is excluded
  double reduction_vs_naive = 0.0;
};

// Throws ConfigError on an invalid schedule.
CostReport schedule_macs(const vit::ViTConfig& config, std::size_t frames,
                         std::span<const compress::StageSpec> stages);

// 100 * (1 - compressed / naive). Throws ConfigError if the reports were
// computed for different backbones or clip lengths.
double reduction_percent(const CostReport& compressed, const CostReport& naive);

void to_json(nlohmann::json& j, const CostReport& r);

struct TableRow {
  std::string method;
  CostReport report;
};

// Method | GFLOPs | reduction, one row per entry, aligned for a terminal.
std::string format_table(const std::vector<TableRow>& rows);

// InTI_{i,j} schedule. For ViT-L the stages sit after blocks 2i and 2j.
std::vector<compress::StageSpec> inti_schedule(std::size_t i, std::size_t j, bool large);

}  // namespace inti::cost
