#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "inti/errors.hpp"

namespace inti {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

namespace detail {

struct TensorImpl {
  Shape shape;
  std::vector<double> data;
  // Empty until the first gradient is accumulated.
  std::vector<double> grad;
  bool requires_grad = false;
  bool is_leaf = true;
  std::optional<std::size_t> node_id;

  std::vector<double>& grad_buffer() {
    if (grad.empty()) grad.assign(data.size(), 0.0);
    return grad;
  }
};

}  // namespace detail

// Dense row-major array of doubles. Copies of a Tensor share storage; use
// clone() for an independent copy.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, double fill = 0.0);
  Tensor(Shape shape, std::vector<double> data);

  static Tensor scalar(double value);
  // Leaf tensor that accumulates gradients on backward().
  static Tensor parameter(Shape shape, std::vector<double> data);

  bool defined() const noexcept { return impl_ != nullptr; }
  const Shape& shape() const { return impl_->shape; }
  std::size_t rank() const { return impl_->shape.size(); }
  std::size_t dim(std::size_t axis) const;
  std::size_t numel() const { return impl_->data.size(); }

  std::span<const double> data() const { return impl_->data; }
  std::span<double> mutable_data() { return impl_->data; }
  double operator[](std::size_t i) const { return impl_->data[i]; }
  double item() const;

  bool requires_grad() const { return impl_->requires_grad; }
  void set_requires_grad(bool on) { impl_->requires_grad = on; }
  bool is_leaf() const { return impl_->is_leaf; }
  bool has_grad() const { return !impl_->grad.empty(); }
  // Zero-filled view when no gradient has been accumulated yet.
  std::span<const double> grad() const;
  void zero_grad() { impl_->grad.clear(); }
  std::optional<std::size_t> node_id() const { return impl_->node_id; }

  // Independent copy of the values, detached from any tape.
  Tensor clone() const;

  const std::shared_ptr<detail::TensorImpl>& impl() const { return impl_; }

 private:
  explicit Tensor(std::shared_ptr<detail::TensorImpl> impl) : impl_(std::move(impl)) {}
  friend Tensor detail_wrap(std::shared_ptr<detail::TensorImpl> impl);

  std::shared_ptr<detail::TensorImpl> impl_;
};

Tensor detail_wrap(std::shared_ptr<detail::TensorImpl> impl);

// Ordered record of differentiable operations for one forward pass.
// Nodes are appended in execution order, so reverse order is a valid
// topological order for backpropagation.
class Tape {
 public:
  using BackwardFn = std::function<void()>;

  std::size_t record(BackwardFn fn);
  std::size_t size() const { return nodes_.size(); }

  // Seeds d(loss)/d(loss) = 1 and replays every node once in reverse.
  // Returns the number of nodes visited; the tape is cleared afterwards.
  std::size_t backward(const Tensor& loss);
  void clear() { nodes_.clear(); }

  // Tape recording on this thread, or nullptr in inference mode.
  static Tape* active();

 private:
  friend class TapeScope;
  std::vector<BackwardFn> nodes_;
};

// Activates a tape on the current thread for its lifetime. Not reentrant.
class TapeScope {
 public:
  explicit TapeScope(Tape& tape);
  ~TapeScope();
  TapeScope(const TapeScope&) = delete;
  TapeScope& operator=(const TapeScope&) = delete;
};

// Backward on the active tape.
std::size_t backward(const Tensor& loss);

namespace detail {

// True when an op over these inputs must be recorded on the active tape.
bool should_record(std::initializer_list<const Tensor*> inputs);
bool should_record(std::span<const Tensor> inputs);

// Wraps op output; marks it as a non-leaf that requires grad when `track`.
Tensor make_result(Shape shape, std::vector<double> data, bool track);

// Registers `fn` on the active tape and binds its node id to `out`.
void record(const Tensor& out, Tape::BackwardFn fn);

}  // namespace detail

// Multiply-accumulate counter incremented by matmul-like kernels on this
// thread. Elementwise ops are not counted.
std::uint64_t mac_count();
void reset_mac_count();
void add_macs(std::uint64_t n);

}  // namespace inti
