#include "inti/tensor/grad_check.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "inti/tensor/random.hpp"

namespace inti {

GradCheckResult grad_check(const std::function<Tensor()>& loss_fn, std::vector<Tensor> inputs,
                           const GradCheckOptions& options) {
  if (!(options.step > 0.0)) throw ContractError("grad_check step must be positive");
  for (auto& t : inputs) {
    t.set_requires_grad(true);
    t.zero_grad();
  }
  std::vector<std::vector<double>> analytic;
  {
    Tape tape;
    TapeScope scope(tape);
    Tensor loss = loss_fn();
    tape.backward(loss);
  }
  for (auto& t : inputs) {
    auto g = t.grad();
    analytic.emplace_back(g.begin(), g.end());
  }

  GradCheckResult result;
  Rng rng(options.seed);
  for (std::size_t ii = 0; ii < inputs.size(); ++ii) {
    Tensor& t = inputs[ii];
    std::vector<std::size_t> probe(t.numel());
    std::iota(probe.begin(), probe.end(), std::size_t{0});
    if (options.max_per_input > 0 && probe.size() > options.max_per_input) {
      // Partial Fisher-Yates: the first max_per_input entries are a sample.
      for (std::size_t i = 0; i < options.max_per_input; ++i)
        std::swap(probe[i], probe[i + rng.below(probe.size() - i)]);
      probe.resize(options.max_per_input);
    }
    auto data = t.mutable_data();
    for (std::size_t idx : probe) {
      const double orig = data[idx];
      data[idx] = orig + options.step;
      const double plus = loss_fn().item();
      data[idx] = orig - options.step;
      const double minus = loss_fn().item();
      data[idx] = orig;
      const double numeric = (plus - minus) / (2.0 * options.step);
      const double a = analytic[ii][idx];
      const double denom = std::max({std::abs(a), std::abs(numeric), options.floor});
      const double err = std::abs(a - numeric) / denom;
      ++result.probes;
      if (err > result.max_relative_error || result.probes == 1) {
        result.max_relative_error = std::max(err, result.max_relative_error);
        result.worst_input = ii;
        result.worst_index = idx;
        result.analytic = a;
        result.numeric = numeric;
      }
    }
  }
  return result;
}

}  // namespace inti
