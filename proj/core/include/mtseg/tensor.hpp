#pragma once

#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "mtseg/common.hpp"

namespace mtseg {
inline namespace MTSEG_ABI {

/// Rank-5 extent (batch, channel, x, y, z); x is the fastest-varying axis.
struct Shape {
  int n = 1;
  int c = 1;
  int x = 1;
  int y = 1;
  int z = 1;

  std::size_t spatial() const {
    return static_cast<std::size_t>(x) * static_cast<std::size_t>(y) * static_cast<std::size_t>(z);
  }
  std::size_t count() const { return static_cast<std::size_t>(n) * static_cast<std::size_t>(c) * spatial(); }
  std::string str() const;
  friend bool operator==(const Shape&, const Shape&) = default;
};

class Tensor;

namespace detail {

struct TensorImpl {
  Shape shape;
  std::vector<Real> values;
  std::vector<Real> grad;
  bool requires_grad = false;
  std::vector<std::shared_ptr<TensorImpl>> parents;
  // Reads this node's grad and accumulates into the parents' grads.
  std::function<void(TensorImpl&)> backward;

  /// Gradient buffer, zero-initialized on first use.
  std::span<Real> grad_buffer();
};

}  // namespace detail

/// Dense tensor handle. Copies share storage and graph node; use `detach()`
/// or `clone()` for an independent value copy.
class Tensor {
 public:
  using BackwardFn = std::function<void(detail::TensorImpl&)>;

  Tensor() = default;
  Tensor(Shape shape, std::vector<Real> values, bool requires_grad = false);

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, Real value, bool requires_grad = false);
  static Tensor scalar(Real value, bool requires_grad = false);

  /// Result of a differentiable operation. Records `backward` and the parents
  /// only when gradients are enabled and some parent requires them.
  static Tensor make_result(Shape shape, std::vector<Real> values, std::vector<Tensor> parents, BackwardFn backward);

  bool defined() const { return impl_ != nullptr; }
  const Shape& shape() const { return impl_->shape; }
  std::size_t size() const { return impl_->values.size(); }
  std::span<const Real> values() const { return impl_->values; }
  /// In-place access for leaf tensors (parameters, optimizer updates).
  std::span<Real> mutable_values() { return impl_->values; }
  Real item() const;

  bool requires_grad() const { return impl_->requires_grad; }
  bool has_grad() const { return !impl_->grad.empty(); }
  std::span<const Real> grad() const { return impl_->grad; }
  void zero_grad() { impl_->grad.clear(); }

  /// Value copy without graph history.
  Tensor detach() const;
  /// Value copy that keeps the requires_grad flag, as a fresh leaf.
  Tensor clone() const;

  detail::TensorImpl& impl() const { return *impl_; }
  const std::shared_ptr<detail::TensorImpl>& impl_ptr() const { return impl_; }

 private:
  std::shared_ptr<detail::TensorImpl> impl_;
};

/// Disables graph recording on this thread while alive.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

bool grad_enabled();

/// Reverse-mode sweep from a scalar: seeds d(loss)/d(loss) = 1 and visits nodes
/// in reverse topological order. Gradients accumulate into existing buffers.
void backward(const Tensor& loss);

}  // namespace MTSEG_ABI
}  // namespace mtseg
