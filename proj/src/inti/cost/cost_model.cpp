#include "inti/cost/cost_model.hpp"

#include <cmath>
#include <cstdio>

#include "inti/errors.hpp"
#include "inti/vit/video_model.hpp"

namespace inti::cost {

using compress::HeadMode;
using compress::StageKind;

Macs vit_layer_macs(std::size_t tokens, std::size_t width, double mlp_ratio) {
  const double n = static_cast<double>(tokens), c = static_cast<double>(width);
  return static_cast<Macs>(std::llround((4.0 + 2.0 * mlp_ratio) * n * c * c + 2.0 * n * n * c));
}

Macs patch_embed_macs(const vit::ViTConfig& config) {
  return static_cast<Macs>(config.num_patches()) * config.patch_dim() * config.width;
}

Macs stage_macs(const compress::StageSpec& spec, std::size_t frames, std::size_t tokens,
                std::size_t width) {
  const Macs t = frames, s = tokens, c = width, half = frames / 2;
  switch (spec.kind) {
    case StageKind::kLinearPool:
      return 0;
    case StageKind::kConvPool:
      return (frames > 2 ? 3 : 2) * half * s * c * c;
    case StageKind::kInti:
      break;
  }
  Macs m = 27 * t * (s - 1) * c;                   // cube conv
  m += t * c * (c / 2) + half * c * c;             // frame projections and mix
  m += 3 * c * (t + t / 2 + t / 4);                // global temporal convs
  if (spec.head == HeadMode::kAttention) {
    m += 2 * half * s * c;                         // query scores
  } else {
    const Macs in = spec.fusion == compress::Fusion::kSepToken ? 2 * c
                    : spec.fusion == compress::Fusion::kAddAll ? c
                                                               : 4 * c;
    const auto h = static_cast<Macs>(std::llround(spec.head_hidden_ratio * static_cast<double>(width)));
    m += t * s * c * (c / 2);                      // token projections
    m += half * s * (in * h + h * 2);              // FFN head
  }
  return m;
}

CostReport schedule_macs(const vit::ViTConfig& config, std::size_t frames,
                         std::span<const compress::StageSpec> stages) {
  config.validate();
  vit::validate_schedule(config, frames, stages);
  CostReport r;
  r.config = config;
  r.frames = frames;
  r.patch_embed = frames * patch_embed_macs(config);
  const Macs layer = vit_layer_macs(config.seq_len(), config.width, config.mlp_ratio);
  std::size_t t = frames, next = 0;
  Macs naive_total = r.patch_embed;
  for (std::size_t b = 1; b <= config.depth; ++b) {
    r.per_block.push_back({b, t, t * layer});
    naive_total += frames * layer;
    while (next < stages.size() && stages[next].insert_after_block == b) {
      r.stage_overheads.push_back(
          {next, stages[next], t, stage_macs(stages[next], t, config.seq_len(), config.width)});
      t /= 2;
      ++next;
    }
  }
  r.total = r.patch_embed;
  for (const auto& b : r.per_block) r.total += b.macs;
  for (const auto& s : r.stage_overheads) r.total += s.macs;
  r.reduction_vs_naive = 100.0 * (1.0 - static_cast<double>(r.total) / static_cast<double>(naive_total));
  return r;
}

double reduction_percent(const CostReport& compressed, const CostReport& naive) {
  if (!(compressed.config == naive.config) || compressed.frames != naive.frames)
    throw ConfigError("cost reports describe different backbones or clip lengths");
  return 100.0 * (1.0 - static_cast<double>(compressed.total) / static_cast<double>(naive.total));
}

void to_json(nlohmann::json& j, const CostReport& r) {
  j = nlohmann::json::object();
  j["config"] = r.config;
  j["frames"] = r.frames;
  j["patch_embed_macs"] = r.patch_embed;
  auto& blocks = j["per_block"] = nlohmann::json::array();
  for (const auto& b : r.per_block) blocks.push_back({{"block", b.block}, {"frames", b.frames}, {"macs", b.macs}});
  auto& stages = j["stage_overheads"] = nlohmann::json::array();
  for (const auto& s : r.stage_overheads)
    stages.push_back({{"stage", s.index}, {"spec", s.spec}, {"frames_in", s.frames_in}, {"macs", s.macs}});
  j["total_macs"] = r.total;
  j["gflops"] = static_cast<double>(r.total) / 1e9;
  j["reduction_vs_naive"] = r.reduction_vs_naive;
}

std::string format_table(const std::vector<TableRow>& rows) {
  std::size_t w = 6;
  for (const auto& r : rows) w = std::max(w, r.method.size());
  std::string out;
  // Desk-scale models are reported in millions so the column stays readable.
  bool small = true;
  for (const auto& r : rows) small = small && r.report.total < 1'000'000'000;
  const double unit = small ? 1e6 : 1e9;
  char buf[160];
  std::snprintf(buf, sizeof buf, "%-*s  %10s  %9s\n", static_cast<int>(w), "Method", small ? "MFLOPs" : "GFLOPs",
                "Reduction");
  out += buf;
  out += std::string(w + 23, '-') + '\n';
  for (const auto& r : rows) {
    const double g = static_cast<double>(r.report.total) / unit;
    if (r.report.stage_overheads.empty()) {
      std::snprintf(buf, sizeof buf, "%-*s  %10.1f  %9s\n", static_cast<int>(w), r.method.c_str(), g, "-");
    } else {
      std::snprintf(buf, sizeof buf, "%-*s  %10.1f  %8.1f%%\n", static_cast<int>(w), r.method.c_str(), g,
                    -r.report.reduction_vs_naive);
    }
    out += buf;
  }
  return out;
}

std::vector<compress::StageSpec> inti_schedule(std::size_t i, std::size_t j, bool large) {
  const std::size_t f = large ? 2 : 1;
  compress::StageSpec a, b;
  a.insert_after_block = f * i;
  b.insert_after_block = f * j;
  return {a, b};
}

}  // namespace inti::cost
