#include "inti/tensor/ops.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <numbers>

namespace inti {

namespace {

using Impl = std::shared_ptr<detail::TensorImpl>;

std::size_t prod(const Shape& s, std::size_t begin, std::size_t end) {
  std::size_t p = 1;
  for (std::size_t i = begin; i < end; ++i) p *= s[i];
  return p;
}

// The message is built only on failure.
template <class Msg>
void require(bool ok, Msg&& msg) {
  if (!ok) throw ShapeError(msg());
}

// ---------------------------------------------------------------------------
// Broadcasting

struct BroadcastPlan {
  enum class Kind { kSame, kScalarB, kSuffixB, kGeneral } kind;
  Shape out;
  // Only populated for kGeneral: source offsets per output element.
  std::vector<std::size_t> a_idx, b_idx;
};

std::shared_ptr<BroadcastPlan> plan_broadcast(const Shape& a, const Shape& b) {
  auto plan = std::make_shared<BroadcastPlan>();
  if (a == b) {
    plan->kind = BroadcastPlan::Kind::kSame;
    plan->out = a;
    return plan;
  }
  if (shape_numel(b) == 1 && b.size() <= a.size()) {
    plan->kind = BroadcastPlan::Kind::kScalarB;
    plan->out = a;
    return plan;
  }
  if (b.size() < a.size() && std::equal(b.begin(), b.end(), a.end() - b.size())) {
    plan->kind = BroadcastPlan::Kind::kSuffixB;
    plan->out = a;
    return plan;
  }
  const std::size_t r = std::max(a.size(), b.size());
  Shape out(r), pa(r, 1), pb(r, 1);
  std::copy(a.begin(), a.end(), pa.begin() + (r - a.size()));
  std::copy(b.begin(), b.end(), pb.begin() + (r - b.size()));
  for (std::size_t i = 0; i < r; ++i) {
    if (pa[i] != pb[i] && pa[i] != 1 && pb[i] != 1)
      throw ShapeError("cannot broadcast " + shape_str(a) + " with " + shape_str(b));
    out[i] = std::max(pa[i], pb[i]);
  }
  std::vector<std::size_t> sa(r, 0), sb(r, 0);
  for (std::size_t i = r, ca = 1, cb = 1; i-- > 0;) {
    sa[i] = pa[i] == 1 ? 0 : ca;
    sb[i] = pb[i] == 1 ? 0 : cb;
    ca *= pa[i];
    cb *= pb[i];
  }
  const std::size_t n = shape_numel(out);
  plan->kind = BroadcastPlan::Kind::kGeneral;
  plan->a_idx.resize(n);
  plan->b_idx.resize(n);
  std::vector<std::size_t> idx(r, 0);
  std::size_t oa = 0, ob = 0;
  for (std::size_t f = 0; f < n; ++f) {
    plan->a_idx[f] = oa;
    plan->b_idx[f] = ob;
    for (std::size_t i = r; i-- > 0;) {
      if (++idx[i] < out[i]) {
        oa += sa[i];
        ob += sb[i];
        break;
      }
      oa -= sa[i] * (out[i] - 1);
      ob -= sb[i] * (out[i] - 1);
      idx[i] = 0;
    }
  }
  plan->out = std::move(out);
  return plan;
}

// Calls fn(out_index, a_index, b_index) for every output element.
template <typename Fn>
void for_each_pair(const BroadcastPlan& p, std::size_t bn, Fn&& fn) {
  const std::size_t n = shape_numel(p.out);
  switch (p.kind) {
    case BroadcastPlan::Kind::kSame:
      for (std::size_t i = 0; i < n; ++i) fn(i, i, i);
      break;
    case BroadcastPlan::Kind::kScalarB:
      for (std::size_t i = 0; i < n; ++i) fn(i, i, std::size_t{0});
      break;
    case BroadcastPlan::Kind::kSuffixB:
      for (std::size_t i = 0; i < n; ++i) fn(i, i, i % bn);
      break;
    case BroadcastPlan::Kind::kGeneral:
      for (std::size_t i = 0; i < n; ++i) fn(i, p.a_idx[i], p.b_idx[i]);
      break;
  }
}

enum class BinOp { kAdd, kSub, kMul };

Tensor binary(const Tensor& a, const Tensor& b, BinOp op) {
  auto plan = plan_broadcast(a.shape(), b.shape());
  const auto& ad = a.impl()->data;
  const auto& bd = b.impl()->data;
  std::vector<double> out(shape_numel(plan->out));
  const std::size_t bn = bd.size();
  switch (op) {
    case BinOp::kAdd:
      for_each_pair(*plan, bn, [&](std::size_t o, std::size_t i, std::size_t j) { out[o] = ad[i] + bd[j]; });
      break;
    case BinOp::kSub:
      for_each_pair(*plan, bn, [&](std::size_t o, std::size_t i, std::size_t j) { out[o] = ad[i] - bd[j]; });
      break;
    case BinOp::kMul:
      for_each_pair(*plan, bn, [&](std::size_t o, std::size_t i, std::size_t j) { out[o] = ad[i] * bd[j]; });
      break;
  }
  const bool track = detail::should_record({&a, &b});
  Tensor result = detail::make_result(plan->out, std::move(out), track);
  if (track) {
    Impl ai = a.impl(), bi = b.impl(), oi = result.impl();
    detail::record(result, [ai, bi, oi, plan, op, bn] {
      if (oi->grad.empty()) return;
      const auto& g = oi->grad;
      if (ai->requires_grad) {
        auto& ga = ai->grad_buffer();
        if (op == BinOp::kMul) {
          const auto& bd = bi->data;
          for_each_pair(*plan, bn, [&](std::size_t o, std::size_t i, std::size_t j) { ga[i] += g[o] * bd[j]; });
        } else {
          for_each_pair(*plan, bn, [&](std::size_t o, std::size_t i, std::size_t) { ga[i] += g[o]; });
        }
      }
      if (bi->requires_grad) {
        auto& gb = bi->grad_buffer();
        if (op == BinOp::kMul) {
          const auto& ad = ai->data;
          for_each_pair(*plan, bn, [&](std::size_t o, std::size_t i, std::size_t j) { gb[j] += g[o] * ad[i]; });
        } else if (op == BinOp::kAdd) {
          for_each_pair(*plan, bn, [&](std::size_t o, std::size_t, std::size_t j) { gb[j] += g[o]; });
        } else {
          for_each_pair(*plan, bn, [&](std::size_t o, std::size_t, std::size_t j) { gb[j] -= g[o]; });
        }
      }
    });
  }
  return result;
}

// ---------------------------------------------------------------------------
// Dense kernels. All accumulate over the reduction index in ascending order.

// c[M, P] += a[M, K] * b[K, P]
void gemm_acc(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
              std::size_t p) {
  // Four rows at a time share each row of b; per-element order is unchanged.
  std::size_t i = 0;
  for (; i + 4 <= m; i += 4) {
    double* c0 = c + i * p;
    double* c1 = c0 + p;
    double* c2 = c1 + p;
    double* c3 = c2 + p;
    const double* a0 = a + i * k;
    for (std::size_t kk = 0; kk < k; ++kk) {
      const double v0 = a0[kk], v1 = a0[k + kk], v2 = a0[2 * k + kk], v3 = a0[3 * k + kk];
      const double* bk = b + kk * p;
      for (std::size_t j = 0; j < p; ++j) {
        const double bv = bk[j];
        c0[j] += v0 * bv;
        c1[j] += v1 * bv;
        c2[j] += v2 * bv;
        c3[j] += v3 * bv;
      }
    }
  }
  for (; i < m; ++i) {
    double* ci = c + i * p;
    const double* ai = a + i * k;
    for (std::size_t kk = 0; kk < k; ++kk) {
      const double av = ai[kk];
      const double* bk = b + kk * p;
      for (std::size_t j = 0; j < p; ++j) ci[j] += av * bk[j];
    }
  }
}

// da[M, K] += dc[M, P] * b[K, P]^T
void gemm_grad_a(const double* dc, const double* b, double* da, std::size_t m, std::size_t k,
                 std::size_t p) {
  std::vector<double> bt(k * p);
  for (std::size_t kk = 0; kk < k; ++kk)
    for (std::size_t j = 0; j < p; ++j) bt[j * k + kk] = b[kk * p + j];
  for (std::size_t i = 0; i < m; ++i) {
    double* dai = da + i * k;
    for (std::size_t j = 0; j < p; ++j) {
      const double g = dc[i * p + j];
      const double* btj = bt.data() + j * k;
      for (std::size_t kk = 0; kk < k; ++kk) dai[kk] += g * btj[kk];
    }
  }
}

// db[K, P] += a[M, K]^T * dc[M, P]
void gemm_grad_b(const double* a, const double* dc, double* db, std::size_t m, std::size_t k,
                 std::size_t p) {
  for (std::size_t i = 0; i < m; ++i) {
    const double* dci = dc + i * p;
    for (std::size_t kk = 0; kk < k; ++kk) {
      const double av = a[i * k + kk];
      double* dbk = db + kk * p;
      for (std::size_t j = 0; j < p; ++j) dbk[j] += av * dci[j];
    }
  }
}

struct MatmulPlan {
  std::size_t m, k, p;
  Shape out;
  // Per output batch: element offsets into a and b.
  std::vector<std::size_t> a_off, b_off;
};

std::shared_ptr<MatmulPlan> plan_matmul(const Shape& as, const Shape& bs) {
  if (as.size() < 2 || bs.size() < 2 || as[as.size() - 1] != bs[bs.size() - 2]) {
    throw ShapeError("matmul shape mismatch: " + shape_str(as) + " x " + shape_str(bs));
  }
  auto plan = std::make_shared<MatmulPlan>();
  plan->m = as[as.size() - 2];
  plan->k = as.back();
  plan->p = bs.back();
  Shape ba(as.begin(), as.end() - 2), bb(bs.begin(), bs.end() - 2);
  const std::size_t r = std::max(ba.size(), bb.size());
  Shape pa(r, 1), pb(r, 1), ob(r);
  std::copy(ba.begin(), ba.end(), pa.begin() + (r - ba.size()));
  std::copy(bb.begin(), bb.end(), pb.begin() + (r - bb.size()));
  for (std::size_t i = 0; i < r; ++i) {
    if (pa[i] != pb[i] && pa[i] != 1 && pb[i] != 1)
      throw ShapeError("matmul batch dims mismatch: " + shape_str(as) + " x " + shape_str(bs));
    ob[i] = std::max(pa[i], pb[i]);
  }
  const std::size_t nb = shape_numel(ob);
  const std::size_t a_mat = plan->m * plan->k, b_mat = plan->k * plan->p;
  std::vector<std::size_t> idx(r, 0);
  for (std::size_t f = 0; f < nb; ++f) {
    std::size_t ia = 0, ib = 0;
    for (std::size_t i = 0; i < r; ++i) {
      ia = ia * pa[i] + (pa[i] == 1 ? 0 : idx[i]);
      ib = ib * pb[i] + (pb[i] == 1 ? 0 : idx[i]);
    }
    plan->a_off.push_back(ia * a_mat);
    plan->b_off.push_back(ib * b_mat);
    for (std::size_t i = r; i-- > 0;) {
      if (++idx[i] < ob[i]) break;
      idx[i] = 0;
    }
  }
  plan->out = ob;
  plan->out.push_back(plan->m);
  plan->out.push_back(plan->p);
  return plan;
}

// Linear-style backward shared by linear(): rows x in, w in x out.
void linear_backward(const Impl& xi, const Impl& wi, const Impl& bi, const Impl& oi,
                     std::size_t rows, std::size_t in, std::size_t out) {
  if (oi->grad.empty()) return;
  const double* g = oi->grad.data();
  if (xi->requires_grad) gemm_grad_a(g, wi->data.data(), xi->grad_buffer().data(), rows, in, out);
  if (wi->requires_grad) gemm_grad_b(xi->data.data(), g, wi->grad_buffer().data(), rows, in, out);
  if (bi && bi->requires_grad) {
    auto& gb = bi->grad_buffer();
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t j = 0; j < out; ++j) gb[j] += g[r * out + j];
  }
}

double erf_cdf(double x) { return 0.5 * (1.0 + std::erf(x / std::numbers::sqrt2)); }

}  // namespace

// ---------------------------------------------------------------------------

Tensor add(const Tensor& a, const Tensor& b) { return binary(a, b, BinOp::kAdd); }
Tensor sub(const Tensor& a, const Tensor& b) { return binary(a, b, BinOp::kSub); }
Tensor mul(const Tensor& a, const Tensor& b) { return binary(a, b, BinOp::kMul); }

Tensor scale(const Tensor& x, double s) {
  std::vector<double> out(x.data().begin(), x.data().end());
  for (auto& v : out) v *= s;
  const bool track = detail::should_record({&x});
  Tensor result = detail::make_result(x.shape(), std::move(out), track);
  if (track) {
    Impl xi = x.impl(), oi = result.impl();
    detail::record(result, [xi, oi, s] {
      if (oi->grad.empty()) return;
      auto& gx = xi->grad_buffer();
      for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += s * oi->grad[i];
    });
  }
  return result;
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  auto plan = plan_matmul(a.shape(), b.shape());
  const std::size_t m = plan->m, k = plan->k, p = plan->p;
  const std::size_t nb = plan->a_off.size();
  std::vector<double> out(nb * m * p, 0.0);
  for (std::size_t bt = 0; bt < nb; ++bt) {
    gemm_acc(a.impl()->data.data() + plan->a_off[bt], b.impl()->data.data() + plan->b_off[bt],
             out.data() + bt * m * p, m, k, p);
  }
  add_macs(static_cast<std::uint64_t>(nb * m * k * p));
  const bool track = detail::should_record({&a, &b});
  Tensor result = detail::make_result(plan->out, std::move(out), track);
  if (track) {
    Impl ai = a.impl(), bi = b.impl(), oi = result.impl();
    detail::record(result, [ai, bi, oi, plan] {
      if (oi->grad.empty()) return;
      const std::size_t m = plan->m, k = plan->k, p = plan->p;
      for (std::size_t bt = 0; bt < plan->a_off.size(); ++bt) {
        const double* g = oi->grad.data() + bt * m * p;
        if (ai->requires_grad)
          gemm_grad_a(g, bi->data.data() + plan->b_off[bt],
                      ai->grad_buffer().data() + plan->a_off[bt], m, k, p);
        if (bi->requires_grad)
          gemm_grad_b(ai->data.data() + plan->a_off[bt], g,
                      bi->grad_buffer().data() + plan->b_off[bt], m, k, p);
      }
    });
  }
  return result;
}

Tensor linear(const Tensor& x, const Tensor& w, const Tensor& bias) {
  require(w.rank() == 2 && x.shape().back() == w.dim(0), [&] {
    return "linear shape mismatch: " + shape_str(x.shape()) + " x " + shape_str(w.shape());
  });
  require(bias.rank() == 1 && bias.dim(0) == w.dim(1), [&] {
    return "linear bias shape " + shape_str(bias.shape()) + " for weight " + shape_str(w.shape());
  });
  const std::size_t in = w.dim(0), outc = w.dim(1);
  const std::size_t rows = x.numel() / in;
  std::vector<double> out(rows * outc, 0.0);
  gemm_acc(x.impl()->data.data(), w.impl()->data.data(), out.data(), rows, in, outc);
  add_macs(static_cast<std::uint64_t>(rows * in * outc));
  const auto& bd = bias.impl()->data;
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t j = 0; j < outc; ++j) out[r * outc + j] += bd[j];
  Shape os = x.shape();
  os.back() = outc;
  const bool track = detail::should_record({&x, &w, &bias});
  Tensor result = detail::make_result(std::move(os), std::move(out), track);
  if (track) {
    Impl xi = x.impl(), wi = w.impl(), bi = bias.impl(), oi = result.impl();
    detail::record(result, [=] { linear_backward(xi, wi, bi, oi, rows, in, outc); });
  }
  return result;
}

Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps) {
  if (!(eps > 0.0)) throw ContractError("layer_norm eps must be positive");
  const std::size_t c = x.shape().back();
  require(gamma.shape() == Shape{c} && beta.shape() == Shape{c}, [&] {
    return "layer_norm affine shapes " + shape_str(gamma.shape()) + ", " +
           shape_str(beta.shape()) + " for input " + shape_str(x.shape());
  });
  const std::size_t rows = x.numel() / c;
  const auto& xd = x.impl()->data;
  const auto& gd = gamma.impl()->data;
  const auto& bd = beta.impl()->data;
  auto xhat = std::make_shared<std::vector<double>>(x.numel());
  auto rstd = std::make_shared<std::vector<double>>(rows);
  std::vector<double> out(x.numel());
  for (std::size_t r = 0; r < rows; ++r) {
    const double* xr = xd.data() + r * c;
    double mu = 0.0;
    for (std::size_t j = 0; j < c; ++j) mu += xr[j];
    mu /= static_cast<double>(c);
    double var = 0.0;
    for (std::size_t j = 0; j < c; ++j) var += (xr[j] - mu) * (xr[j] - mu);
    var /= static_cast<double>(c);
    const double rs = 1.0 / std::sqrt(var + eps);
    (*rstd)[r] = rs;
    for (std::size_t j = 0; j < c; ++j) {
      const double h = (xr[j] - mu) * rs;
      (*xhat)[r * c + j] = h;
      out[r * c + j] = h * gd[j] + bd[j];
    }
  }
  const bool track = detail::should_record({&x, &gamma, &beta});
  Tensor result = detail::make_result(x.shape(), std::move(out), track);
  if (track) {
    Impl xi = x.impl(), gi = gamma.impl(), bi = beta.impl(), oi = result.impl();
    detail::record(result, [=] {
      if (oi->grad.empty()) return;
      const auto& g = oi->grad;
      const auto& gam = gi->data;
      const double inv_c = 1.0 / static_cast<double>(c);
      for (std::size_t r = 0; r < rows; ++r) {
        const double* gr = g.data() + r * c;
        const double* hr = xhat->data() + r * c;
        if (gi->requires_grad) {
          auto& gg = gi->grad_buffer();
          for (std::size_t j = 0; j < c; ++j) gg[j] += gr[j] * hr[j];
        }
        if (bi->requires_grad) {
          auto& gb = bi->grad_buffer();
          for (std::size_t j = 0; j < c; ++j) gb[j] += gr[j];
        }
        if (xi->requires_grad) {
          double sum_d = 0.0, sum_dh = 0.0;
          for (std::size_t j = 0; j < c; ++j) {
            const double d = gr[j] * gam[j];
            sum_d += d;
            sum_dh += d * hr[j];
          }
          double* gx = xi->grad_buffer().data() + r * c;
          const double rs = (*rstd)[r];
          for (std::size_t j = 0; j < c; ++j) {
            const double d = gr[j] * gam[j];
            gx[j] += rs * (d - inv_c * sum_d - hr[j] * inv_c * sum_dh);
          }
        }
      }
    });
  }
  return result;
}

Tensor gelu(const Tensor& x) {
  const auto& xd = x.impl()->data;
  std::vector<double> out(xd.size());
  for (std::size_t i = 0; i < xd.size(); ++i) out[i] = xd[i] * erf_cdf(xd[i]);
  const bool track = detail::should_record({&x});
  Tensor result = detail::make_result(x.shape(), std::move(out), track);
  if (track) {
    Impl xi = x.impl(), oi = result.impl();
    detail::record(result, [xi, oi] {
      if (oi->grad.empty()) return;
      auto& gx = xi->grad_buffer();
      const double inv_sqrt_2pi = 1.0 / std::sqrt(2.0 * std::numbers::pi);
      for (std::size_t i = 0; i < gx.size(); ++i) {
        const double v = xi->data[i];
        const double pdf = inv_sqrt_2pi * std::exp(-0.5 * v * v);
        gx[i] += oi->grad[i] * (erf_cdf(v) + v * pdf);
      }
    });
  }
  return result;
}

Tensor sigmoid(const Tensor& x) {
  const auto& xd = x.impl()->data;
  std::vector<double> out(xd.size());
  for (std::size_t i = 0; i < xd.size(); ++i) {
    const double v = xd[i];
    out[i] = v >= 0 ? 1.0 / (1.0 + std::exp(-v)) : std::exp(v) / (1.0 + std::exp(v));
  }
  const bool track = detail::should_record({&x});
  Tensor result = detail::make_result(x.shape(), std::move(out), track);
  if (track) {
    Impl xi = x.impl(), oi = result.impl();
    detail::record(result, [xi, oi] {
      if (oi->grad.empty()) return;
      auto& gx = xi->grad_buffer();
      for (std::size_t i = 0; i < gx.size(); ++i) {
        const double y = oi->data[i];
        gx[i] += oi->grad[i] * y * (1.0 - y);
      }
    });
  }
  return result;
}

Tensor softmax(const Tensor& x, std::size_t axis) {
  if (axis >= x.rank())
    throw ShapeError("softmax axis " + std::to_string(axis) + " for shape " + shape_str(x.shape()));
  const Shape& s = x.shape();
  const std::size_t outer = prod(s, 0, axis), n = s[axis], inner = prod(s, axis + 1, s.size());
  const auto& xd = x.impl()->data;
  std::vector<double> out(xd.size());
  for (std::size_t o = 0; o < outer; ++o) {
    for (std::size_t in = 0; in < inner; ++in) {
      const std::size_t base = o * n * inner + in;
      double mx = xd[base];
      for (std::size_t k = 1; k < n; ++k) mx = std::max(mx, xd[base + k * inner]);
      double total = 0.0;
      for (std::size_t k = 0; k < n; ++k) {
        const double e = std::exp(xd[base + k * inner] - mx);
        out[base + k * inner] = e;
        total += e;
      }
      for (std::size_t k = 0; k < n; ++k) out[base + k * inner] /= total;
    }
  }
  const bool track = detail::should_record({&x});
  Tensor result = detail::make_result(s, std::move(out), track);
  if (track) {
    Impl xi = x.impl(), oi = result.impl();
    detail::record(result, [=] {
      if (oi->grad.empty()) return;
      const auto& g = oi->grad;
      const auto& y = oi->data;
      auto& gx = xi->grad_buffer();
      for (std::size_t o = 0; o < outer; ++o) {
        for (std::size_t in = 0; in < inner; ++in) {
          const std::size_t base = o * n * inner + in;
          double dot = 0.0;
          for (std::size_t k = 0; k < n; ++k) dot += g[base + k * inner] * y[base + k * inner];
          for (std::size_t k = 0; k < n; ++k) {
            const std::size_t i = base + k * inner;
            gx[i] += y[i] * (g[i] - dot);
          }
        }
      }
    });
  }
  return result;
}

Tensor cross_entropy(const Tensor& logits, const std::vector<std::size_t>& labels) {
  const std::size_t k = logits.shape().back();
  const std::size_t rows = logits.rank() == 1 ? 1 : logits.dim(0);
  require(logits.rank() <= 2 && rows == labels.size(), [&] {
    return "cross_entropy: logits " + shape_str(logits.shape()) + " with " +
           std::to_string(labels.size()) + " labels";
  });
  const auto& xd = logits.impl()->data;
  auto probs = std::make_shared<std::vector<double>>(xd.size());
  double loss = 0.0;
  for (std::size_t r = 0; r < rows; ++r) {
    if (labels[r] >= k) throw ContractError("label " + std::to_string(labels[r]) + " out of range");
    const double* xr = xd.data() + r * k;
    double mx = xr[0];
    for (std::size_t j = 1; j < k; ++j) mx = std::max(mx, xr[j]);
    double total = 0.0;
    for (std::size_t j = 0; j < k; ++j) {
      const double e = std::exp(xr[j] - mx);
      (*probs)[r * k + j] = e;
      total += e;
    }
    for (std::size_t j = 0; j < k; ++j) (*probs)[r * k + j] /= total;
    loss += (mx + std::log(total)) - xr[labels[r]];
  }
  loss /= static_cast<double>(rows);
  const bool track = detail::should_record({&logits});
  Tensor result = detail::make_result(Shape{1}, {loss}, track);
  if (track) {
    Impl xi = logits.impl(), oi = result.impl();
    detail::record(result, [=] {
      if (oi->grad.empty()) return;
      const double g = oi->grad[0] / static_cast<double>(rows);
      auto& gx = xi->grad_buffer();
      for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t j = 0; j < k; ++j)
          gx[r * k + j] += g * ((*probs)[r * k + j] - (j == labels[r] ? 1.0 : 0.0));
    });
  }
  return result;
}

Tensor sum(const Tensor& x) {
  double total = 0.0;
  for (double v : x.data()) total += v;
  const bool track = detail::should_record({&x});
  Tensor result = detail::make_result(Shape{1}, {total}, track);
  if (track) {
    Impl xi = x.impl(), oi = result.impl();
    detail::record(result, [xi, oi] {
      if (oi->grad.empty()) return;
      auto& gx = xi->grad_buffer();
      for (auto& g : gx) g += oi->grad[0];
    });
  }
  return result;
}

Tensor mean(const Tensor& x) { return scale(sum(x), 1.0 / static_cast<double>(x.numel())); }

Tensor mean_axis(const Tensor& x, std::size_t axis) {
  if (axis >= x.rank())
    throw ShapeError("mean axis " + std::to_string(axis) + " for shape " + shape_str(x.shape()));
  const Shape& s = x.shape();
  const std::size_t outer = prod(s, 0, axis), n = s[axis], inner = prod(s, axis + 1, s.size());
  const auto& xd = x.impl()->data;
  std::vector<double> out(outer * inner, 0.0);
  for (std::size_t o = 0; o < outer; ++o)
    for (std::size_t k = 0; k < n; ++k)
      for (std::size_t in = 0; in < inner; ++in)
        out[o * inner + in] += xd[(o * n + k) * inner + in];
  const double inv_n = 1.0 / static_cast<double>(n);
  for (auto& v : out) v *= inv_n;
  Shape os = s;
  os.erase(os.begin() + static_cast<std::ptrdiff_t>(axis));
  if (os.empty()) os.push_back(1);
  const bool track = detail::should_record({&x});
  Tensor result = detail::make_result(std::move(os), std::move(out), track);
  if (track) {
    Impl xi = x.impl(), oi = result.impl();
    detail::record(result, [=] {
      if (oi->grad.empty()) return;
      auto& gx = xi->grad_buffer();
      for (std::size_t o = 0; o < outer; ++o)
        for (std::size_t k = 0; k < n; ++k)
          for (std::size_t in = 0; in < inner; ++in)
            gx[(o * n + k) * inner + in] += oi->grad[o * inner + in] * inv_n;
    });
  }
  return result;
}

Tensor reshape(const Tensor& x, Shape shape) {
  if (shape_numel(shape) != x.numel())
    throw ShapeError("cannot reshape " + shape_str(x.shape()) + " to " + shape_str(shape));
  const bool track = detail::should_record({&x});
  Tensor result = detail::make_result(std::move(shape), x.impl()->data, track);
  if (track) {
    Impl xi = x.impl(), oi = result.impl();
    detail::record(result, [xi, oi] {
      if (oi->grad.empty()) return;
      auto& gx = xi->grad_buffer();
      for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += oi->grad[i];
    });
  }
  return result;
}

namespace {

// Source offset of every destination element for a permutation.
std::shared_ptr<std::vector<std::size_t>> permute_map(const Shape& s,
                                                      const std::vector<std::size_t>& axes) {
  const std::size_t r = s.size();
  std::vector<std::size_t> src_stride(r);
  for (std::size_t i = r, c = 1; i-- > 0;) {
    src_stride[i] = c;
    c *= s[i];
  }
  Shape os(r);
  std::vector<std::size_t> step(r);
  for (std::size_t i = 0; i < r; ++i) {
    os[i] = s[axes[i]];
    step[i] = src_stride[axes[i]];
  }
  const std::size_t n = shape_numel(s);
  auto map = std::make_shared<std::vector<std::size_t>>(n);
  std::vector<std::size_t> idx(r, 0);
  std::size_t off = 0;
  for (std::size_t f = 0; f < n; ++f) {
    (*map)[f] = off;
    for (std::size_t i = r; i-- > 0;) {
      if (++idx[i] < os[i]) {
        off += step[i];
        break;
      }
      off -= step[i] * (os[i] - 1);
      idx[i] = 0;
    }
  }
  return map;
}

}  // namespace

Tensor permute(const Tensor& x, const std::vector<std::size_t>& axes) {
  const Shape& s = x.shape();
  std::vector<bool> seen(s.size(), false);
  bool ok = axes.size() == s.size();
  for (std::size_t a : axes) {
    if (!ok || a >= s.size() || seen[a]) {
      ok = false;
      break;
    }
    seen[a] = true;
  }
  if (!ok) throw ShapeError("invalid permutation for shape " + shape_str(s));
  Shape os(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) os[i] = s[axes[i]];
  auto map = permute_map(s, axes);
  const auto& xd = x.impl()->data;
  std::vector<double> out(xd.size());
  for (std::size_t f = 0; f < out.size(); ++f) out[f] = xd[(*map)[f]];
  const bool track = detail::should_record({&x});
  Tensor result = detail::make_result(std::move(os), std::move(out), track);
  if (track) {
    Impl xi = x.impl(), oi = result.impl();
    detail::record(result, [xi, oi, map] {
      if (oi->grad.empty()) return;
      auto& gx = xi->grad_buffer();
      for (std::size_t f = 0; f < map->size(); ++f) gx[(*map)[f]] += oi->grad[f];
    });
  }
  return result;
}

Tensor slice(const Tensor& x, std::size_t axis, std::size_t start, std::size_t stop,
             std::size_t step) {
  const Shape& s = x.shape();
  if (axis >= s.size() || step == 0 || start >= stop || stop > s[axis]) {
    throw ShapeError("invalid slice [" + std::to_string(start) + ":" + std::to_string(stop) +
                     ":" + std::to_string(step) + "] on axis " + std::to_string(axis) +
                     " of " + shape_str(s));
  }
  const std::size_t outer = prod(s, 0, axis), n = s[axis], inner = prod(s, axis + 1, s.size());
  const std::size_t len = (stop - start + step - 1) / step;
  const auto& xd = x.impl()->data;
  std::vector<double> out(outer * len * inner);
  for (std::size_t o = 0; o < outer; ++o)
    for (std::size_t k = 0; k < len; ++k) {
      const double* src = xd.data() + (o * n + start + k * step) * inner;
      std::copy(src, src + inner, out.data() + (o * len + k) * inner);
    }
  Shape os = s;
  os[axis] = len;
  const bool track = detail::should_record({&x});
  Tensor result = detail::make_result(std::move(os), std::move(out), track);
  if (track) {
    Impl xi = x.impl(), oi = result.impl();
    detail::record(result, [=] {
      if (oi->grad.empty()) return;
      auto& gx = xi->grad_buffer();
      for (std::size_t o = 0; o < outer; ++o)
        for (std::size_t k = 0; k < len; ++k) {
          const double* g = oi->grad.data() + (o * len + k) * inner;
          double* dst = gx.data() + (o * n + start + k * step) * inner;
          for (std::size_t i = 0; i < inner; ++i) dst[i] += g[i];
        }
    });
  }
  return result;
}

Tensor concat(const std::vector<Tensor>& parts, std::size_t axis) {
  if (parts.empty()) throw ShapeError("concat of zero tensors");
  const Shape& s0 = parts[0].shape();
  if (axis >= s0.size()) throw ShapeError("concat axis out of range for " + shape_str(s0));
  std::size_t total = 0;
  for (const auto& p : parts) {
    const Shape& s = p.shape();
    bool ok = s.size() == s0.size();
    for (std::size_t i = 0; ok && i < s.size(); ++i) ok = i == axis || s[i] == s0[i];
    if (!ok) throw ShapeError("concat shape mismatch: " + shape_str(s0) + " vs " + shape_str(s));
    total += s[axis];
  }
  const std::size_t outer = prod(s0, 0, axis), inner = prod(s0, axis + 1, s0.size());
  std::vector<double> out(outer * total * inner);
  std::size_t offset = 0;
  for (const auto& p : parts) {
    const std::size_t n = p.dim(axis);
    const auto& pd = p.impl()->data;
    for (std::size_t o = 0; o < outer; ++o)
      std::copy(pd.data() + o * n * inner, pd.data() + (o + 1) * n * inner,
                out.data() + (o * total + offset) * inner);
    offset += n;
  }
  Shape os = s0;
  os[axis] = total;
  const bool track = detail::should_record(std::span<const Tensor>(parts));
  Tensor result = detail::make_result(std::move(os), std::move(out), track);
  if (track) {
    std::vector<Impl> ins;
    for (const auto& p : parts) ins.push_back(p.impl());
    Impl oi = result.impl();
    detail::record(result, [=] {
      if (oi->grad.empty()) return;
      std::size_t offset = 0;
      for (const auto& pi : ins) {
        const std::size_t n = pi->shape[axis];
        if (pi->requires_grad) {
          auto& gp = pi->grad_buffer();
          for (std::size_t o = 0; o < outer; ++o) {
            const double* g = oi->grad.data() + (o * total + offset) * inner;
            double* dst = gp.data() + o * n * inner;
            for (std::size_t i = 0; i < n * inner; ++i) dst[i] += g[i];
          }
        }
        offset += n;
      }
    });
  }
  return result;
}

Tensor depthwise_conv3d(const Tensor& x, const Tensor& kernel) {
  require(x.rank() == 4,
          [&] { return "depthwise_conv3d expects [T, H, W, C], got " + shape_str(x.shape()); });
  const std::size_t t = x.dim(0), h = x.dim(1), w = x.dim(2), c = x.dim(3);
  require(kernel.shape() == Shape{3, 3, 3, c}, [&] {
    return "depthwise_conv3d kernel must be [3, 3, 3, " + std::to_string(c) + "], got " +
           shape_str(kernel.shape());
  });
  const auto& xd = x.impl()->data;
  const auto& kd = kernel.impl()->data;
  std::vector<double> out(xd.size(), 0.0);
  auto at = [=](std::size_t ti, std::size_t hi, std::size_t wi) { return ((ti * h + hi) * w + wi) * c; };
  // Visits every (output voxel, in-bounds tap) pair in row-major tap order.
  auto for_taps = [=](auto&& fn) {
    for (std::size_t ti = 0; ti < t; ++ti)
      for (std::size_t hi = 0; hi < h; ++hi)
        for (std::size_t wi = 0; wi < w; ++wi)
          for (std::size_t dt = 0; dt < 3; ++dt) {
            if (ti + dt < 1 || ti + dt - 1 >= t) continue;
            for (std::size_t dh = 0; dh < 3; ++dh) {
              if (hi + dh < 1 || hi + dh - 1 >= h) continue;
              for (std::size_t dw = 0; dw < 3; ++dw) {
                if (wi + dw < 1 || wi + dw - 1 >= w) continue;
                fn(at(ti, hi, wi), at(ti + dt - 1, hi + dh - 1, wi + dw - 1),
                   ((dt * 3 + dh) * 3 + dw) * c);
              }
            }
          }
  };
  for_taps([&](std::size_t o, std::size_t i, std::size_t k) {
    for (std::size_t ch = 0; ch < c; ++ch) out[o + ch] += kd[k + ch] * xd[i + ch];
  });
  add_macs(static_cast<std::uint64_t>(t * h * w * c * 27));
  const bool track = detail::should_record({&x, &kernel});
  Tensor result = detail::make_result(x.shape(), std::move(out), track);
  if (track) {
    Impl xi = x.impl(), ki = kernel.impl(), oi = result.impl();
    detail::record(result, [=] {
      if (oi->grad.empty()) return;
      const auto& g = oi->grad;
      double* gx = xi->requires_grad ? xi->grad_buffer().data() : nullptr;
      double* gk = ki->requires_grad ? ki->grad_buffer().data() : nullptr;
      for_taps([&](std::size_t o, std::size_t i, std::size_t k) {
        for (std::size_t ch = 0; ch < c; ++ch) {
          if (gx) gx[i + ch] += ki->data[k + ch] * g[o + ch];
          if (gk) gk[k + ch] += xi->data[i + ch] * g[o + ch];
        }
      });
    });
  }
  return result;
}

Tensor depthwise_conv1d(const Tensor& x, const Tensor& kernel, const Tensor& bias) {
  require(x.rank() == 2,
          [&] { return "depthwise_conv1d expects [T, C], got " + shape_str(x.shape()); });
  const std::size_t t = x.dim(0), c = x.dim(1);
  require(kernel.shape() == Shape{3, c} && bias.shape() == Shape{c}, [&] {
    return "depthwise_conv1d kernel/bias shapes " + shape_str(kernel.shape()) + ", " +
           shape_str(bias.shape()) + " for input " + shape_str(x.shape());
  });
  const auto& xd = x.impl()->data;
  const auto& kd = kernel.impl()->data;
  const auto& bd = bias.impl()->data;
  std::vector<double> out(xd.size(), 0.0);
  for (std::size_t ti = 0; ti < t; ++ti) {
    for (std::size_t d = 0; d < 3; ++d) {
      if (ti + d < 1 || ti + d - 1 >= t) continue;
      for (std::size_t ch = 0; ch < c; ++ch)
        out[ti * c + ch] += kd[d * c + ch] * xd[(ti + d - 1) * c + ch];
    }
    for (std::size_t ch = 0; ch < c; ++ch) out[ti * c + ch] += bd[ch];
  }
  add_macs(static_cast<std::uint64_t>(t * c * 3));
  const bool track = detail::should_record({&x, &kernel, &bias});
  Tensor result = detail::make_result(x.shape(), std::move(out), track);
  if (track) {
    Impl xi = x.impl(), ki = kernel.impl(), bi = bias.impl(), oi = result.impl();
    detail::record(result, [=] {
      if (oi->grad.empty()) return;
      const auto& g = oi->grad;
      double* gx = xi->requires_grad ? xi->grad_buffer().data() : nullptr;
      double* gk = ki->requires_grad ? ki->grad_buffer().data() : nullptr;
      double* gb = bi->requires_grad ? bi->grad_buffer().data() : nullptr;
      for (std::size_t ti = 0; ti < t; ++ti) {
        for (std::size_t d = 0; d < 3; ++d) {
          if (ti + d < 1 || ti + d - 1 >= t) continue;
          for (std::size_t ch = 0; ch < c; ++ch) {
            const double go = g[ti * c + ch];
            if (gx) gx[(ti + d - 1) * c + ch] += ki->data[d * c + ch] * go;
            if (gk) gk[d * c + ch] += xi->data[(ti + d - 1) * c + ch] * go;
          }
        }
        if (gb)
          for (std::size_t ch = 0; ch < c; ++ch) gb[ch] += g[ti * c + ch];
      }
    });
  }
  return result;
}

Tensor max_pool1d(const Tensor& x) {
  require(x.rank() == 2 && x.dim(0) >= 2,
          [&] { return "max_pool1d expects [T >= 2, C], got " + shape_str(x.shape()); });
  const std::size_t t = x.dim(0) / 2, c = x.dim(1);
  const auto& xd = x.impl()->data;
  std::vector<double> out(t * c);
  auto arg = std::make_shared<std::vector<std::size_t>>(t * c);
  for (std::size_t ti = 0; ti < t; ++ti)
    for (std::size_t ch = 0; ch < c; ++ch) {
      const std::size_t i0 = 2 * ti * c + ch, i1 = i0 + c;
      const std::size_t pick = xd[i1] > xd[i0] ? i1 : i0;
      (*arg)[ti * c + ch] = pick;
      out[ti * c + ch] = xd[pick];
    }
  const bool track = detail::should_record({&x});
  Tensor result = detail::make_result(Shape{t, c}, std::move(out), track);
  if (track) {
    Impl xi = x.impl(), oi = result.impl();
    detail::record(result, [xi, oi, arg] {
      if (oi->grad.empty()) return;
      auto& gx = xi->grad_buffer();
      for (std::size_t i = 0; i < arg->size(); ++i) gx[(*arg)[i]] += oi->grad[i];
    });
  }
  return result;
}

}  // namespace inti
