#include "inti/bench/dataset.hpp"

#include <algorithm>
#include <fstream>

#include "inti/errors.hpp"
#include "inti/tensor/ops.hpp"
#include "inti/tensor/random.hpp"
#include "inti/tensor/serialize.hpp"

namespace inti::bench {

void ShapesSpec::validate() const {
  if (clips == 0 || frames == 0) throw ConfigError("dataset needs at least one clip and one frame");
  if (num_classes != 4 && num_classes != 8)
    throw ConfigError("num_classes must be 4 or 8, got " + std::to_string(num_classes));
  if (shape_size < 3 || shape_size > image_size)
    throw ConfigError("shape_size must be in [3, image_size]");
  if (speed == 0 || speed >= image_size) throw ConfigError("speed must be in [1, image_size)");
  if (noise < 0.0 || noise > 0.5) throw ConfigError("noise amplitude must be in [0, 0.5]");
}

void to_json(nlohmann::json& j, const ShapesSpec& s) {
  j = {{"clips", s.clips},           {"frames", s.frames},     {"image_size", s.image_size},
       {"num_classes", s.num_classes}, {"shape_size", s.shape_size}, {"speed", s.speed},
       {"noise", s.noise}};
}

void from_json(const nlohmann::json& j, ShapesSpec& s) {
  ShapesSpec d;
  s.clips = j.value("clips", d.clips);
  s.frames = j.value("frames", d.frames);
  s.image_size = j.value("image_size", d.image_size);
  s.num_classes = j.value("num_classes", d.num_classes);
  s.shape_size = j.value("shape_size", d.shape_size);
  s.speed = j.value("speed", d.speed);
  s.noise = j.value("noise", d.noise);
}

Tensor ClipDataset::clip(std::size_t i) const {
  const auto& sh = clips.shape();
  return reshape(slice(clips, 0, i, i + 1), {sh[1], sh[2], sh[3], sh[4]});
}

namespace {

// Square outline (shape 0) or solid plus sign (shape 1), as a size x size mask.
bool in_shape(std::size_t kind, std::size_t y, std::size_t x, std::size_t size) {
  if (kind == 0) return y == 0 || x == 0 || y + 1 == size || x + 1 == size || (y > 1 && x > 1 && y + 2 < size && x + 2 < size);
  const std::size_t lo = size / 3, hi = size - size / 3;
  return (y >= lo && y < hi) || (x >= lo && x < hi);
}

}  // namespace

ClipDataset generate_moving_shapes(std::uint64_t seed, const ShapesSpec& spec, const std::string& split) {
  spec.validate();
  const std::size_t m = spec.clips, t = spec.frames, h = spec.image_size;
  std::vector<double> data(m * t * h * h * 3, 0.0);
  std::vector<std::size_t> labels(m);
  Rng rng(seed);
  for (std::size_t i = 0; i < m; ++i) {
    const std::size_t label = rng.below(spec.num_classes);
    labels[i] = label;
    const std::size_t dir = label % 4, kind = label / 4;
    const long dy = dir == kDown ? 1 : dir == kUp ? -1 : 0;
    const long dx = dir == kRight ? 1 : dir == kLeft ? -1 : 0;
    const long y0 = static_cast<long>(rng.below(h)), x0 = static_cast<long>(rng.below(h));
    double color[3];
    for (double& c : color) c = rng.uniform(0.6, 1.0);
    double* clip = data.data() + i * t * h * h * 3;
    for (std::size_t f = 0; f < t; ++f) {
      const long step = static_cast<long>(f * spec.speed);
      const long n = static_cast<long>(h);
      const long oy = ((y0 + dy * step) % n + n) % n, ox = ((x0 + dx * step) % n + n) % n;
      double* frame = clip + f * h * h * 3;
      for (std::size_t sy = 0; sy < spec.shape_size; ++sy)
        for (std::size_t sx = 0; sx < spec.shape_size; ++sx) {
          if (!in_shape(kind, sy, sx, spec.shape_size)) continue;
          const std::size_t py = static_cast<std::size_t>((oy + static_cast<long>(sy)) % n);
          const std::size_t px = static_cast<std::size_t>((ox + static_cast<long>(sx)) % n);
          for (std::size_t c = 0; c < 3; ++c) frame[(py * h + px) * 3 + c] = color[c];
        }
      for (std::size_t p = 0; p < h * h * 3; ++p)
        frame[p] = std::clamp(frame[p] + rng.uniform(-spec.noise, spec.noise), 0.0, 1.0);
    }
  }
  ClipDataset d;
  d.clips = Tensor({m, t, h, h, 3}, std::move(data));
  d.labels = std::move(labels);
  d.seed = seed;
  d.split = split;
  d.spec = spec;
  return d;
}

SplitPair generate_splits(std::uint64_t seed, const ShapesSpec& train, const ShapesSpec& test) {
  return {generate_moving_shapes(Rng::mix(seed, 1), train, "train"),
          generate_moving_shapes(Rng::mix(seed, 2), test, "test")};
}

void save_dataset(const std::filesystem::path& dir, const ClipDataset& d) {
  std::filesystem::create_directories(dir);
  save_tensor(dir / "clips.tensor", d.clips);
  nlohmann::json j{{"format", "inti-dataset"}, {"version", 1},    {"seed", d.seed},
                   {"split", d.split},         {"spec", d.spec},  {"labels", d.labels}};
  std::ofstream os(dir / "dataset.json");
  if (!os) throw IoError("cannot write " + (dir / "dataset.json").string());
  os << j.dump(1) << '\n';
}

ClipDataset load_dataset(const std::filesystem::path& dir) {
  std::ifstream is(dir / "dataset.json");
  if (!is) throw IoError("no dataset.json in " + dir.string());
  ClipDataset d;
  try {
    auto j = nlohmann::json::parse(is);
    if (j.value("format", std::string()) != "inti-dataset") throw ConfigError("not an inti dataset: " + dir.string());
    d.seed = j.at("seed").get<std::uint64_t>();
    d.split = j.at("split").get<std::string>();
    d.spec = j.at("spec").get<ShapesSpec>();
    d.labels = j.at("labels").get<std::vector<std::size_t>>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed dataset.json: ") + e.what());
  }
  d.clips = load_tensor(dir / "clips.tensor");
  const auto& s = d.spec;
  if (d.clips.shape() != Shape{d.labels.size(), s.frames, s.image_size, s.image_size, 3})
    throw ShapeError("clips " + shape_str(d.clips.shape()) + " disagree with dataset.json");
  for (auto l : d.labels)
    if (l >= s.num_classes) throw ConfigError("label " + std::to_string(l) + " out of range");
  return d;
}

}  // namespace inti::bench
