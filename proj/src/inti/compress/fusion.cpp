#include "inti/compress/fusion.hpp"

#include <algorithm>
#include <cmath>
#include <memory>

namespace inti::compress {

Tensor fuse_pairs(const Tensor& x, const WeightField& w) {
  if (x.rank() != 3 || x.dim(0) % 2 != 0) {
    throw ContractError("fuse_pairs needs [T, S, C] with even T, got " + shape_str(x.shape()));
  }
  const std::size_t half = x.dim(0) / 2, s = x.dim(1), c = x.dim(2);
  if (w.alpha.shape() != Shape{half, s} || w.beta.shape() != Shape{half, s}) {
    throw ContractError("weight field " + shape_str(w.alpha.shape()) + "/" +
                        shape_str(w.beta.shape()) + " does not match tokens " +
                        shape_str(x.shape()));
  }
  const auto xd = x.data();
  const auto ad = w.alpha.data();
  const auto bd = w.beta.data();
  std::vector<double> out(half * s * c);
  for (std::size_t j = 0; j < half; ++j)
    for (std::size_t k = 0; k < s; ++k) {
      const double a = ad[j * s + k], b = bd[j * s + k];
      const double* even = xd.data() + ((2 * j) * s + k) * c;
      const double* odd = xd.data() + ((2 * j + 1) * s + k) * c;
      double* o = out.data() + (j * s + k) * c;
      for (std::size_t ch = 0; ch < c; ++ch) o[ch] = a * even[ch] + b * odd[ch];
    }
  const bool track = detail::should_record({&x, &w.alpha, &w.beta});
  Tensor result = detail::make_result(Shape{half, s, c}, std::move(out), track);
  if (track) {
    auto xi = x.impl(), ai = w.alpha.impl(), bi = w.beta.impl(), oi = result.impl();
    detail::record(result, [=] {
      if (oi->grad.empty()) return;
      const auto& g = oi->grad;
      double* gx = xi->requires_grad ? xi->grad_buffer().data() : nullptr;
      double* ga = ai->requires_grad ? ai->grad_buffer().data() : nullptr;
      double* gb = bi->requires_grad ? bi->grad_buffer().data() : nullptr;
      for (std::size_t j = 0; j < half; ++j)
        for (std::size_t k = 0; k < s; ++k) {
          const std::size_t pos = j * s + k;
          const std::size_t e = ((2 * j) * s + k) * c, o = ((2 * j + 1) * s + k) * c;
          const double* go = g.data() + pos * c;
          double da = 0.0, db = 0.0;
          for (std::size_t ch = 0; ch < c; ++ch) {
            da += go[ch] * xi->data[e + ch];
            db += go[ch] * xi->data[o + ch];
            if (gx) {
              gx[e + ch] += ai->data[pos] * go[ch];
              gx[o + ch] += bi->data[pos] * go[ch];
            }
          }
          if (ga) ga[pos] += da;
          if (gb) gb[pos] += db;
        }
    });
  }
  return result;
}

void check_simplex(const Tensor& source, const Tensor& fused, const WeightField& w, double tol) {
  const std::size_t half = fused.dim(0), s = fused.dim(1), c = fused.dim(2);
  const auto xd = source.data();
  const auto fd = fused.data();
  for (std::size_t j = 0; j < half; ++j)
    for (std::size_t k = 0; k < s; ++k) {
      const double a = w.alpha[j * s + k], b = w.beta[j * s + k];
      if (!(a >= 0.0 && a <= 1.0 && b >= 0.0 && b <= 1.0 && std::abs(a + b - 1.0) <= tol)) {
        throw NumericError("fusion weights off the simplex at pair " + std::to_string(j) +
                           ", token " + std::to_string(k) + ": alpha=" + std::to_string(a) +
                           " beta=" + std::to_string(b));
      }
      for (std::size_t ch = 0; ch < c; ++ch) {
        const double e = xd[((2 * j) * s + k) * c + ch], o = xd[((2 * j + 1) * s + k) * c + ch];
        const double v = fd[(j * s + k) * c + ch];
        const double slack = tol * std::max({1.0, std::abs(e), std::abs(o)});
        if (v < std::min(e, o) - slack || v > std::max(e, o) + slack) {
          throw NumericError("fused token (" + std::to_string(j) + ", " + std::to_string(k) +
                             ") leaves the convex hull of its source pair");
        }
      }
    }
}

}  // namespace inti::compress
