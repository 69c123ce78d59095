#include "mtseg/tensor.hpp"

#include <algorithm>
#include <stdexcept>
#include <unordered_set>
#include <utility>

namespace mtseg {
inline namespace MTSEG_ABI {

namespace {
thread_local bool g_grad_enabled = true;
}

std::string Shape::str() const {
  return "(" + std::to_string(n) + "," + std::to_string(c) + "," + std::to_string(x) + "," + std::to_string(y) + "," +
         std::to_string(z) + ")";
}

std::span<Real> detail::TensorImpl::grad_buffer() {
  if (grad.empty()) grad.assign(values.size(), Real(0));
  return grad;
}

Tensor::Tensor(Shape shape, std::vector<Real> values, bool requires_grad)
    : impl_(std::make_shared<detail::TensorImpl>()) {
  if (shape.n < 1 || shape.c < 1 || shape.x < 1 || shape.y < 1 || shape.z < 1) {
    throw std::invalid_argument("tensor shape must be positive: " + shape.str());
  }
  if (values.size() != shape.count()) {
    throw std::invalid_argument("tensor shape " + shape.str() + " needs " + std::to_string(shape.count()) +
                                " values, got " + std::to_string(values.size()));
  }
  impl_->shape = shape;
  impl_->values = std::move(values);
  impl_->requires_grad = requires_grad;
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) { return full(shape, Real(0), requires_grad); }

Tensor Tensor::full(Shape shape, Real value, bool requires_grad) {
  return Tensor(shape, std::vector<Real>(shape.count(), value), requires_grad);
}

Tensor Tensor::scalar(Real value, bool requires_grad) { return Tensor(Shape{}, {value}, requires_grad); }

Tensor Tensor::make_result(Shape shape, std::vector<Real> values, std::vector<Tensor> parents, BackwardFn backward) {
  Tensor out(shape, std::move(values));
  const bool needs_grad = g_grad_enabled && std::any_of(parents.begin(), parents.end(), [](const Tensor& p) {
                            return p.defined() && p.requires_grad();
                          });
  if (needs_grad) {
    out.impl_->requires_grad = true;
    out.impl_->backward = std::move(backward);
    out.impl_->parents.reserve(parents.size());
    for (auto& p : parents) out.impl_->parents.push_back(p.impl_);
  }
  return out;
}

Real Tensor::item() const {
  if (size() != 1) throw std::invalid_argument("item() on non-scalar tensor " + shape().str());
  return impl_->values[0];
}

Tensor Tensor::detach() const { return Tensor(shape(), impl_->values, false); }

Tensor Tensor::clone() const { return Tensor(shape(), impl_->values, requires_grad()); }

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

bool grad_enabled() { return g_grad_enabled; }

void backward(const Tensor& loss) {
  if (!loss.defined() || loss.size() != 1) throw std::invalid_argument("backward() needs a scalar loss");
  if (!loss.requires_grad()) return;

  // Iterative post-order DFS gives a topological order (parents before children).
  std::vector<detail::TensorImpl*> order;
  std::unordered_set<detail::TensorImpl*> visited;
  std::vector<std::pair<detail::TensorImpl*, std::size_t>> stack{{loss.impl_ptr().get(), 0}};
  visited.insert(loss.impl_ptr().get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      detail::TensorImpl* parent = node->parents[next++].get();
      if (parent->requires_grad && visited.insert(parent).second) stack.emplace_back(parent, 0);
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  loss.impl().grad_buffer()[0] += Real(1);
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    detail::TensorImpl* node = *it;
    if (node->backward && !node->grad.empty()) node->backward(*node);
  }
}

}  // namespace MTSEG_ABI
}  // namespace mtseg
