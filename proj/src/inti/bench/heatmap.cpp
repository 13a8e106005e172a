#include "inti/bench/heatmap.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "inti/errors.hpp"

namespace inti::bench {

namespace fs = std::filesystem;

CumulativeWeights cumulative_weights(const std::vector<vit::StageTrace>& stages, std::size_t frames,
                                     std::size_t tokens) {
  if (stages.empty()) throw ContractError("no compression stage to attribute weights to");
  CumulativeWeights cw;
  cw.source_frames = frames;
  cw.tokens = tokens;
  cw.final_frame.resize(frames);
  cw.weights.assign(frames * tokens, 1.0);
  for (std::size_t f = 0; f < frames; ++f) cw.final_frame[f] = f;
  for (const auto& s : stages) {
    if (!s.weights) {
      throw ContractError("stage " + std::to_string(s.index) + " (" + compress::to_string(s.spec.kind) +
                          ") has no weight field");
    }
    const auto a = s.weights->alpha.data(), b = s.weights->beta.data();
    for (std::size_t f = 0; f < frames; ++f) {
      const std::size_t cur = cw.final_frame[f], j = cur / 2;
      const auto& w = cur % 2 == 0 ? a : b;
      for (std::size_t k = 0; k < tokens; ++k) cw.weights[f * tokens + k] *= w[j * tokens + k];
      cw.final_frame[f] = j;
    }
  }
  return cw;
}

void write_pgm(const fs::path& file, std::size_t width, std::size_t height,
               const std::vector<std::uint8_t>& pixels) {
  std::ofstream os(file, std::ios::binary);
  if (!os) throw IoError("cannot write " + file.string());
  os << "P5\n" << width << ' ' << height << "\n255\n";
  os.write(reinterpret_cast<const char*>(pixels.data()), static_cast<std::streamsize>(pixels.size()));
}

namespace {

std::uint8_t to_byte(double v) {
  return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
}

std::string numbered(const char* stem, std::size_t i, const char* ext) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%s%02zu%s", stem, i, ext);
  return buf;
}

}  // namespace

HeatmapExport export_weight_heatmaps(const vit::VideoModel& model, const Tensor& clip, const fs::path& out_dir) {
  const bool has_inti = std::any_of(model.stages().begin(), model.stages().end(),
                                    [](const auto& s) { return s.spec().kind == compress::StageKind::kInti; });
  if (!has_inti) throw ContractError("weight heatmaps need a model with at least one InTI stage");

  const auto& cfg = model.config();
  auto result = model.forward(clip);
  HeatmapExport ex{cumulative_weights(result.stages, model.frames(), cfg.seq_len()), {}};
  const CumulativeWeights& cw = ex.weights;
  fs::create_directories(out_dir);

  const std::size_t g = cfg.grid(), t = model.frames(), img = cfg.image_size, ps = cfg.patch_size;
  const std::size_t ch = cfg.channels_in;
  const auto px = clip.data();
  auto gray = [&](std::size_t f, std::size_t y, std::size_t x) {
    double acc = 0.0;
    for (std::size_t c = 0; c < ch; ++c) acc += px[((f * img + y) * img + x) * ch + c];
    return acc / static_cast<double>(ch);
  };

  for (std::size_t f = 0; f < t; ++f) {
    std::vector<std::uint8_t> map(g * g), frame(img * img);
    for (std::size_t k = 0; k < g * g; ++k) map[k] = to_byte(cw.at(f, k + 1));
    for (std::size_t y = 0; y < img; ++y)
      for (std::size_t x = 0; x < img; ++x) frame[y * img + x] = to_byte(gray(f, y, x));
    ex.files.push_back(out_dir / numbered("weights_f", f, ".pgm"));
    write_pgm(ex.files.back(), g, g, map);
    ex.files.push_back(out_dir / numbered("frame_f", f, ".pgm"));
    write_pgm(ex.files.back(), img, img, frame);
  }

  const std::size_t finals = *std::max_element(cw.final_frame.begin(), cw.final_frame.end()) + 1;
  for (std::size_t j = 0; j < finals; ++j) {
    std::vector<double> acc(img * img, 0.0);
    for (std::size_t f = 0; f < t; ++f) {
      if (cw.final_frame[f] != j) continue;
      for (std::size_t y = 0; y < img; ++y)
        for (std::size_t x = 0; x < img; ++x)
          acc[y * img + x] += cw.at(f, 1 + (y / ps) * g + x / ps) * gray(f, y, x);
    }
    std::vector<std::uint8_t> bytes(img * img);
    std::transform(acc.begin(), acc.end(), bytes.begin(), to_byte);
    ex.files.push_back(out_dir / numbered("recon_", j, ".pgm"));
    write_pgm(ex.files.back(), img, img, bytes);
  }

  ex.files.push_back(out_dir / "weights.csv");
  std::ofstream csv(ex.files.back());
  if (!csv) throw IoError("cannot write " + ex.files.back().string());
  csv << "source_frame,final_frame,token,weight\n";
  char line[128];
  for (std::size_t f = 0; f < t; ++f)
    for (std::size_t k = 0; k < cw.tokens; ++k) {
      std::snprintf(line, sizeof line, "%zu,%zu,%zu,%.17g\n", f, cw.final_frame[f], k, cw.at(f, k));
      csv << line;
    }
  return ex;
}

}  // namespace inti::bench
