#include "patchsel/autograd/tensor.hpp"

#include <algorithm>
#include <sstream>
#include <unordered_map>
#include <utility>

#include "patchsel/error.hpp"

namespace patchsel::ag {

namespace {
thread_local bool g_grad_enabled = true;
}

std::size_t numel_of(const Shape& shape) {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '(';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ',';
    os << shape[i];
  }
  os << ')';
  return os.str();
}

std::vector<double>& TensorImpl::grad_buffer() {
  if (grad.empty()) grad.assign(data.size(), 0.0);
  return grad;
}

Tensor Tensor::zeros(Shape shape) { return full(std::move(shape), 0.0); }

Tensor Tensor::full(Shape shape, double value) {
  auto impl = std::make_shared<TensorImpl>();
  impl->data.assign(numel_of(shape), value);
  impl->shape = std::move(shape);
  return Tensor(std::move(impl));
}

Tensor Tensor::from(Shape shape, std::vector<double> values) {
  if (numel_of(shape) != values.size()) {
    throw ShapeError("tensor shape " + shape_str(shape) + " does not match " +
                     std::to_string(values.size()) + " values");
  }
  auto impl = std::make_shared<TensorImpl>();
  impl->shape = std::move(shape);
  impl->data = std::move(values);
  return Tensor(std::move(impl));
}

Tensor Tensor::scalar(double value) { return from({1}, {value}); }

Tensor Tensor::param(Shape shape, std::vector<double> values) {
  Tensor t = from(std::move(shape), std::move(values));
  t.set_requires_grad(true);
  return t;
}

double Tensor::item() const {
  if (numel() != 1) throw ShapeError("item() on tensor of shape " + shape_str(shape()));
  return impl_->data[0];
}

std::vector<double> Tensor::grad_copy() const {
  if (impl_->grad.empty()) return std::vector<double>(numel(), 0.0);
  return impl_->grad;
}

Tensor Tensor::detach() const { return from(shape(), impl_->data); }

Tensor Tensor::clone() const {
  Tensor t = detach();
  t.set_requires_grad(requires_grad());
  return t;
}

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

bool grad_mode_enabled() { return g_grad_enabled; }

Tensor make_result(Shape shape, std::vector<double> values, std::vector<Tensor> inputs,
                   std::function<void(const TensorImpl& out)> backward, const char* op_name) {
  Tensor out = Tensor::from(std::move(shape), std::move(values));
  if (!g_grad_enabled) return out;
  const bool any = std::any_of(inputs.begin(), inputs.end(), [](const Tensor& t) {
    return t.defined() && t.requires_grad();
  });
  if (!any) return out;
  auto fn = std::make_unique<GradFn>();
  for (auto& in : inputs) {
    if (in.defined()) fn->inputs.push_back(in.impl_ptr());
  }
  fn->apply = std::move(backward);
  fn->op_name = op_name;
  out.impl()->grad_fn = std::move(fn);
  out.set_requires_grad(true);
  return out;
}

namespace {

// Iterative post-order DFS; grey nodes on the stack detect cycles.
std::vector<TensorImpl*> topo_order(TensorImpl* root) {
  enum class Mark { kGrey, kBlack };
  std::unordered_map<TensorImpl*, Mark> marks;
  std::vector<TensorImpl*> order;
  std::vector<std::pair<TensorImpl*, std::size_t>> stack;
  stack.emplace_back(root, 0);
  marks[root] = Mark::kGrey;
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    const std::size_t n_inputs = node->grad_fn ? node->grad_fn->inputs.size() : 0;
    if (next < n_inputs) {
      TensorImpl* child = node->grad_fn->inputs[next++].get();
      if (!child->requires_grad) continue;
      auto it = marks.find(child);
      if (it == marks.end()) {
        marks[child] = Mark::kGrey;
        stack.emplace_back(child, 0);
      } else if (it->second == Mark::kGrey) {
        throw InternalError("cycle detected in differentiation graph");
      }
      continue;
    }
    marks[node] = Mark::kBlack;
    order.push_back(node);
    stack.pop_back();
  }
  return order;  // inputs before consumers
}

}  // namespace

void backward(const Tensor& loss) {
  if (!loss.defined()) throw UsageError("backward() on undefined tensor");
  if (loss.numel() != 1) {
    throw UsageError("backward() requires a scalar loss, got shape " + shape_str(loss.shape()));
  }
  if (!loss.requires_grad()) {
    throw UsageError("backward() on a tensor that does not require grad");
  }
  auto order = topo_order(loss.impl());
  for (TensorImpl* node : order) {
    if (node->grad_fn) node->grad.clear();
  }
  loss.impl()->grad.assign(1, 1.0);
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    TensorImpl* node = *it;
    if (!node->grad_fn || node->grad.empty()) continue;
    node->grad_fn->apply(*node);
  }
}

}  // namespace patchsel::ag
