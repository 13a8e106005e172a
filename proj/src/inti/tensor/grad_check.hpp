#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "inti/tensor/tensor.hpp"

namespace inti {

struct GradCheckOptions {
  double step = 1e-5;
  // Elements probed per input; 0 probes every element. Probed positions are
  // drawn from `seed` so a subset check is reproducible.
  std::size_t max_per_input = 0;
  std::uint64_t seed = 0;
  // |analytic - numeric| / max(|analytic|, |numeric|, floor). The floor keeps
  // near-zero gradients from turning roundoff into a large ratio.
  double floor = 1e-3;
};

struct GradCheckResult {
  double max_relative_error = 0.0;
  std::size_t worst_input = 0;
  std::size_t worst_index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
  std::size_t probes = 0;
};

// Compares reverse-mode gradients of the scalar `loss_fn` with respect to
// `inputs` against central differences. `loss_fn` must read the inputs'
// current values on every call; they are perturbed in place and restored.
GradCheckResult grad_check(const std::function<Tensor()>& loss_fn, std::vector<Tensor> inputs,
                           const GradCheckOptions& options = {});

}  // namespace inti
