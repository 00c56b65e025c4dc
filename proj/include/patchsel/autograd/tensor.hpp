#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace patchsel::ag {

using Shape = std::vector<std::size_t>;

std::size_t numel_of(const Shape& shape);
std::string shape_str(const Shape& shape);

struct TensorImpl;

// Recorded backward closure of a non-leaf tensor. `apply` reads the owning
// tensor's grad and accumulates into the grads of `inputs`.
struct GradFn {
  std::vector<std::shared_ptr<TensorImpl>> inputs;
  std::function<void(const TensorImpl& out)> apply;
  const char* op_name = "";
};

struct TensorImpl {
  Shape shape;
  std::vector<double> data;
  std::vector<double> grad;  // empty until a gradient is accumulated
  bool requires_grad = false;
  std::unique_ptr<GradFn> grad_fn;

  // Returns the grad buffer, allocating zeros on first use.
  std::vector<double>& grad_buffer();
};

// Dense row-major float64 tensor with shared ownership semantics: copies of a
// Tensor alias the same storage, as with framework tensors.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::shared_ptr<TensorImpl> impl) : impl_(std::move(impl)) {}

  static Tensor zeros(Shape shape);
  static Tensor full(Shape shape, double value);
  static Tensor from(Shape shape, std::vector<double> values);
  static Tensor scalar(double value);
  // Leaf tensor that accumulates gradients.
  static Tensor param(Shape shape, std::vector<double> values);

  bool defined() const noexcept { return impl_ != nullptr; }
  const Shape& shape() const { return impl_->shape; }
  std::size_t dim(std::size_t i) const { return impl_->shape.at(i); }
  std::size_t rank() const { return impl_->shape.size(); }
  std::size_t numel() const { return impl_->data.size(); }

  std::span<double> data() { return impl_->data; }
  std::span<const double> data() const { return impl_->data; }
  double item() const;
  double at(std::size_t flat) const { return impl_->data.at(flat); }

  bool has_grad() const { return !impl_->grad.empty(); }
  // Gradient view; all zeros if nothing has been accumulated yet.
  std::span<double> grad() { return impl_->grad_buffer(); }
  std::vector<double> grad_copy() const;
  void zero_grad() { impl_->grad.clear(); }

  bool requires_grad() const { return impl_->requires_grad; }
  void set_requires_grad(bool on) { impl_->requires_grad = on; }
  bool is_leaf() const { return impl_->grad_fn == nullptr; }

  // Same values, no history.
  Tensor detach() const;
  Tensor clone() const;

  TensorImpl* impl() const { return impl_.get(); }
  const std::shared_ptr<TensorImpl>& impl_ptr() const { return impl_; }

 private:
  std::shared_ptr<TensorImpl> impl_;
};

// Disables graph recording on the current thread for its lifetime.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

bool grad_mode_enabled();

// Builds the output of a differentiable op. The closure is attached only when
// grad mode is on and some input requires grad; otherwise the result is a
// plain constant.
Tensor make_result(Shape shape, std::vector<double> values, std::vector<Tensor> inputs,
                   std::function<void(const TensorImpl& out)> backward, const char* op_name);

// Reverse-mode accumulation from a scalar loss. Leaf grads accumulate across
// calls; intermediate grads are reset at the start of every call.
void backward(const Tensor& loss);

}  // namespace patchsel::ag
