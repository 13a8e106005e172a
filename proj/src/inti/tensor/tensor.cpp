#include "inti/tensor/tensor.hpp"

#include <numeric>
#include <sstream>

namespace inti {

namespace {
thread_local Tape* g_active_tape = nullptr;
thread_local std::uint64_t g_macs = 0;
}  // namespace

std::size_t shape_numel(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                         std::multiplies<>());
}

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ", ";
    os << shape[i];
  }
  os << ']';
  return os.str();
}

Tensor::Tensor(Shape shape, double fill)
    : impl_(std::make_shared<detail::TensorImpl>()) {
  for (auto d : shape)
    if (d == 0) throw ShapeError("zero-length dimension in shape " + shape_str(shape));
  impl_->data.assign(shape_numel(shape), fill);
  impl_->shape = std::move(shape);
}

Tensor::Tensor(Shape shape, std::vector<double> data)
    : impl_(std::make_shared<detail::TensorImpl>()) {
  for (auto d : shape)
    if (d == 0) throw ShapeError("zero-length dimension in shape " + shape_str(shape));
  if (shape_numel(shape) != data.size()) {
    throw ShapeError("data length " + std::to_string(data.size()) +
                     " does not match shape " + shape_str(shape));
  }
  impl_->shape = std::move(shape);
  impl_->data = std::move(data);
}

Tensor Tensor::scalar(double value) { return Tensor(Shape{1}, std::vector<double>{value}); }

Tensor Tensor::parameter(Shape shape, std::vector<double> data) {
  Tensor t(std::move(shape), std::move(data));
  t.impl_->requires_grad = true;
  return t;
}

std::size_t Tensor::dim(std::size_t axis) const {
  if (axis >= rank())
    throw ShapeError("axis " + std::to_string(axis) + " out of range for " + shape_str(shape()));
  return impl_->shape[axis];
}

double Tensor::item() const {
  if (numel() != 1) throw ShapeError("item() on tensor of shape " + shape_str(shape()));
  return impl_->data[0];
}

std::span<const double> Tensor::grad() const {
  if (impl_->grad.empty()) impl_->grad.assign(impl_->data.size(), 0.0);
  return impl_->grad;
}

Tensor Tensor::clone() const { return Tensor(impl_->shape, impl_->data); }

Tensor detail_wrap(std::shared_ptr<detail::TensorImpl> impl) { return Tensor(std::move(impl)); }

std::size_t Tape::record(BackwardFn fn) {
  nodes_.push_back(std::move(fn));
  return nodes_.size() - 1;
}

std::size_t Tape::backward(const Tensor& loss) {
  if (!loss.defined() || loss.numel() != 1) {
    throw ContractError("backward() needs a scalar loss, got shape " +
                        (loss.defined() ? shape_str(loss.shape()) : std::string("<undefined>")));
  }
  std::size_t visited = 0;
  if (loss.requires_grad()) {
    loss.impl()->grad_buffer()[0] += 1.0;
    for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
      (*it)();
      ++visited;
    }
  }
  nodes_.clear();
  return visited;
}

Tape* Tape::active() { return g_active_tape; }

TapeScope::TapeScope(Tape& tape) {
  if (g_active_tape != nullptr) throw ContractError("a tape is already active on this thread");
  g_active_tape = &tape;
}

TapeScope::~TapeScope() { g_active_tape = nullptr; }

std::size_t backward(const Tensor& loss) {
  Tape* tape = Tape::active();
  if (tape == nullptr) throw ContractError("backward() without an active tape");
  return tape->backward(loss);
}

namespace detail {

bool should_record(std::initializer_list<const Tensor*> inputs) {
  if (g_active_tape == nullptr) return false;
  for (const Tensor* t : inputs)
    if (t->defined() && t->requires_grad()) return true;
  return false;
}

bool should_record(std::span<const Tensor> inputs) {
  if (g_active_tape == nullptr) return false;
  for (const Tensor& t : inputs)
    if (t.requires_grad()) return true;
  return false;
}

Tensor make_result(Shape shape, std::vector<double> data, bool track) {
  auto impl = std::make_shared<TensorImpl>();
  impl->shape = std::move(shape);
  impl->data = std::move(data);
  impl->requires_grad = track;
  impl->is_leaf = !track;
  return detail_wrap(std::move(impl));
}

void record(const Tensor& out, Tape::BackwardFn fn) {
  out.impl()->node_id = g_active_tape->record(std::move(fn));
}

}  // namespace detail

std::uint64_t mac_count() { return g_macs; }
void reset_mac_count() { g_macs = 0; }
void add_macs(std::uint64_t n) { g_macs += n; }

}  // namespace inti
