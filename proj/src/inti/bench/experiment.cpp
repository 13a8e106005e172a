#include "inti/bench/experiment.hpp"

#include <cmath>
#include <fstream>
#include <numbers>
#include <thread>

#include "inti/errors.hpp"
#include "inti/tensor/random.hpp"

namespace inti::bench {

void to_json(nlohmann::json& j, const OptimizerConfig& o) {
  j = {{"learning_rate", o.learning_rate}, {"momentum", o.momentum},
       {"weight_decay", o.weight_decay},   {"epochs", o.epochs},
       {"batch_size", o.batch_size},       {"warmup_steps", o.warmup_steps},
       {"grad_clip", o.grad_clip},         {"stage_lr_scale", o.stage_lr_scale}};
}

void from_json(const nlohmann::json& j, OptimizerConfig& o) {
  OptimizerConfig d;
  o.learning_rate = j.value("learning_rate", d.learning_rate);
  o.momentum = j.value("momentum", d.momentum);
  o.weight_decay = j.value("weight_decay", d.weight_decay);
  o.epochs = j.value("epochs", d.epochs);
  o.batch_size = j.value("batch_size", d.batch_size);
  o.warmup_steps = j.value("warmup_steps", d.warmup_steps);
  o.grad_clip = j.value("grad_clip", d.grad_clip);
  o.stage_lr_scale = j.value("stage_lr_scale", d.stage_lr_scale);
}

void ExperimentConfig::validate() const {
  model.validate();
  train_data.validate();
  test_data.validate();
  if (train_data.frames != test_data.frames || train_data.image_size != test_data.image_size ||
      train_data.num_classes != test_data.num_classes)
    throw ConfigError("train and test data must share frames, image_size and num_classes");
  if (train_data.image_size != model.image_size)
    throw ConfigError("data image_size " + std::to_string(train_data.image_size) +
                      " differs from model image_size " + std::to_string(model.image_size));
  if (model.num_classes != train_data.num_classes)
    throw ConfigError("model has " + std::to_string(model.num_classes) + " classes, data has " +
                      std::to_string(train_data.num_classes));
  if (optimizer.batch_size == 0) throw ConfigError("batch_size must be positive");
  if (!(optimizer.learning_rate >= 0.0)) throw ConfigError("learning_rate must be non-negative");
  if (!(optimizer.stage_lr_scale > 0.0)) throw ConfigError("stage_lr_scale must be positive");
  if (optimizer.momentum < 0.0 || optimizer.momentum >= 1.0) throw ConfigError("momentum must be in [0, 1)");
  vit::validate_schedule(model, frames(), stages);
}

void to_json(nlohmann::json& j, const ExperimentConfig& c) {
  j = {{"name", c.name},          {"model", c.model},         {"stages", c.stages},
       {"optimizer", c.optimizer}, {"train_data", c.train_data}, {"test_data", c.test_data},
       {"seed", c.seed},          {"data_seed", c.data_seed}, {"check_simplex", c.check_simplex}};
}

void from_json(const nlohmann::json& j, ExperimentConfig& c) {
  ExperimentConfig d;
  c.name = j.value("name", d.name);
  c.model = j.contains("model") ? j.at("model").get<vit::ViTConfig>() : d.model;
  c.stages = j.value("stages", d.stages);
  c.optimizer = j.value("optimizer", d.optimizer);
  c.train_data = j.value("train_data", d.train_data);
  c.test_data = j.value("test_data", c.train_data);
  c.seed = j.value("seed", d.seed);
  c.data_seed = j.value("data_seed", c.seed);
  c.check_simplex = j.value("check_simplex", d.check_simplex);
}

ExperimentConfig load_experiment(const std::filesystem::path& file) {
  std::ifstream is(file);
  if (!is) throw IoError("cannot read config " + file.string());
  try {
    auto c = nlohmann::json::parse(is).get<ExperimentConfig>();
    c.validate();
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("config " + file.string() + ": " + e.what());
  }
}

void to_json(nlohmann::json& j, const EpochMetrics& m) {
  j = {{"epoch", m.epoch},
       {"learning_rate", m.learning_rate},
       {"train_loss", m.train_loss},
       {"train_accuracy", m.train_accuracy},
       {"test_accuracy", m.test_accuracy}};
}

double cosine_lr(const OptimizerConfig& o, std::size_t step, std::size_t total) {
  if (step < o.warmup_steps)
    return o.learning_rate * static_cast<double>(step + 1) / static_cast<double>(o.warmup_steps);
  const double span = static_cast<double>(total - std::min(total, o.warmup_steps));
  const double pos = static_cast<double>(step - o.warmup_steps);
  if (span <= 0.0) return o.learning_rate;
  return 0.5 * o.learning_rate * (1.0 + std::cos(std::numbers::pi * pos / span));
}

namespace {

std::size_t argmax(std::span<const double> v) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < v.size(); ++i)
    if (v[i] > v[best]) best = i;
  return best;
}

struct Slot {
  std::string name;
  Tensor param;
  std::vector<double> velocity;
  bool decay;
  double lr_scale;
};

}  // namespace

TrainResult train(const ExperimentConfig& config, const ClipDataset& train_set,
                  const ClipDataset& test_set, const EpochCallback& on_epoch) {
  config.validate();
  if (train_set.spec.frames != config.frames() || test_set.spec.frames != config.frames())
    throw ConfigError("dataset frame count differs from the experiment config");
  vit::VideoModel model(config.model, config.frames(), config.stages, config.seed);
  const OptimizerConfig& opt = config.optimizer;

  std::vector<Slot> slots;
  for (auto& [name, t] : model.parameters())
    slots.push_back({name, t, std::vector<double>(t.numel(), 0.0),
                     t.rank() >= 2 && name.find("pos_embed") == std::string::npos,
                     name.rfind("stages.", 0) == 0 ? opt.stage_lr_scale : 1.0});

  const std::size_t m = train_set.size();
  const std::size_t steps_per_epoch = (m + opt.batch_size - 1) / opt.batch_size;
  const std::size_t total_steps = steps_per_epoch * opt.epochs;
  Rng order_rng(Rng::mix(config.seed, 7));
  std::vector<std::size_t> order(m);
  vit::ForwardOptions fwd{.check_simplex = config.check_simplex};

  TrainResult result{std::move(model), {}};
  vit::VideoModel& net = result.model;
  std::size_t step = 0;
  for (std::size_t epoch = 0; epoch < opt.epochs; ++epoch) {
    for (std::size_t i = 0; i < m; ++i) order[i] = i;
    for (std::size_t i = m; i > 1; --i) std::swap(order[i - 1], order[order_rng.below(i)]);

    double loss_sum = 0.0;
    std::size_t correct = 0;
    double lr = 0.0;
    for (std::size_t b = 0; b < steps_per_epoch; ++b, ++step) {
      const std::size_t lo = b * opt.batch_size, hi = std::min(m, lo + opt.batch_size);
      for (auto& s : slots) s.param.zero_grad();
      for (std::size_t i = lo; i < hi; ++i) {
        const std::size_t idx = order[i];
        Tape tape;
        TapeScope scope(tape);
        Tensor logits = net.forward(train_set.clip(idx), fwd).logits;
        Tensor loss = cross_entropy(logits, {train_set.labels[idx]});
        if (!std::isfinite(loss.item()))
          throw NumericError("loss is " + std::to_string(loss.item()) + " at step " + std::to_string(step) +
                             " (epoch " + std::to_string(epoch) + ", clip " + std::to_string(idx) + ")");
        loss_sum += loss.item();
        correct += argmax(logits.data()) == train_set.labels[idx];
        backward(scale(loss, 1.0 / static_cast<double>(hi - lo)));
      }
      double norm2 = 0.0;
      for (auto& s : slots)
        for (double g : s.param.grad()) {
          if (!std::isfinite(g))
            throw NumericError("non-finite gradient for " + s.name + " at step " + std::to_string(step));
          norm2 += g * g;
        }
      const double clip = opt.grad_clip > 0.0 && std::sqrt(norm2) > opt.grad_clip ? opt.grad_clip / std::sqrt(norm2) : 1.0;
      lr = cosine_lr(opt, step, total_steps);
      for (auto& s : slots) {
        auto w = s.param.mutable_data();
        auto g = s.param.grad();
        for (std::size_t k = 0; k < w.size(); ++k) {
          double d = g[k] * clip;
          if (s.decay) d += opt.weight_decay * w[k];
          s.velocity[k] = opt.momentum * s.velocity[k] + d;
          w[k] -= lr * s.lr_scale * s.velocity[k];
        }
      }
    }
    EpochMetrics em{epoch + 1, lr, loss_sum / static_cast<double>(m),
                    100.0 * static_cast<double>(correct) / static_cast<double>(m), evaluate(net, test_set)};
    result.history.push_back(em);
    if (on_epoch) on_epoch(em, net);
  }
  for (auto& s : slots) s.param.zero_grad();
  return result;
}

TrainResult train(const ExperimentConfig& config, const EpochCallback& on_epoch) {
  config.validate();
  auto data = generate_splits(config.data_seed, config.train_data, config.test_data);
  return train(config, data.train, data.test, on_epoch);
}

std::vector<std::size_t> predict(const vit::VideoModel& model, const ClipDataset& data, std::size_t threads) {
  if (data.spec.frames != model.frames() || data.spec.image_size != model.config().image_size)
    throw ShapeError("dataset clips [" + std::to_string(data.spec.frames) + " x " +
                     std::to_string(data.spec.image_size) + "px] do not fit a model expecting [" +
                     std::to_string(model.frames()) + " x " + std::to_string(model.config().image_size) + "px]");
  std::vector<std::size_t> out(data.size());
  auto work = [&](std::size_t first, std::size_t stride) {
    for (std::size_t i = first; i < data.size(); i += stride) out[i] = argmax(model.forward(data.clip(i)).logits.data());
  };
  threads = std::max<std::size_t>(1, std::min(threads, data.size()));
  if (threads == 1) {
    work(0, 1);
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(work, t, threads);
    for (auto& th : pool) th.join();
  }
  return out;
}

double accuracy(const std::vector<std::size_t>& predictions, const std::vector<std::size_t>& labels) {
  if (predictions.size() != labels.size() || labels.empty())
    throw ContractError("accuracy needs equally many predictions and labels");
  std::size_t hit = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) hit += predictions[i] == labels[i];
  return 100.0 * static_cast<double>(hit) / static_cast<double>(labels.size());
}

double evaluate(const vit::VideoModel& model, const ClipDataset& data, std::size_t threads) {
  return accuracy(predict(model, data, threads), data.labels);
}

}  // namespace inti::bench
