#pragma once

#include <cstddef>
#include <functional>
#include <initializer_list>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "dalnet/errors.hpp"

namespace dalnet {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

struct TensorImpl;

// Record of the op that produced a tensor. `backward` reads the output's grad
// and accumulates into the grads of `inputs`.
struct OpNode {
  std::string name;
  std::vector<std::shared_ptr<TensorImpl>> inputs;
  std::function<void(const TensorImpl& out)> backward;
};

struct TensorImpl {
  Shape shape;
  std::vector<double> data;
  std::vector<double> grad;  // empty until a backward pass touches it
  bool requires_grad = false;
  std::shared_ptr<OpNode> producer;

  void ensure_grad() {
    if (grad.empty()) grad.assign(data.size(), 0.0);
  }
};

/// Shared handle to a row-major float64 array with an optional gradient.
///
/// Copies alias the same storage. Values are fixed after construction except
/// through `mutable_data()`, which the optimizer and checkpoint loader use on
/// leaf parameters.
class Tensor {
 public:
  Tensor() = default;
  Tensor(Shape shape, std::vector<double> data, bool requires_grad = false);

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double value, bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);
  static Tensor vector(std::vector<double> values, bool requires_grad = false);
  static Tensor matrix(std::initializer_list<std::initializer_list<double>> rows,
                       bool requires_grad = false);

  bool defined() const { return impl_ != nullptr; }
  const Shape& shape() const;
  std::size_t ndim() const { return shape().size(); }
  std::size_t dim(std::size_t axis) const;
  std::size_t numel() const;

  std::span<const double> data() const;
  std::span<double> mutable_data();
  double item() const;
  double operator[](std::size_t i) const { return data()[i]; }
  double at(std::size_t row, std::size_t col) const;

  bool requires_grad() const;
  void set_requires_grad(bool value);
  bool is_leaf() const;
  bool has_grad() const;
  std::span<const double> grad() const;
  void zero_grad();

  // Same values, no history.
  Tensor detach() const;

  const std::shared_ptr<TensorImpl>& impl() const { return impl_; }
  explicit Tensor(std::shared_ptr<TensorImpl> impl) : impl_(std::move(impl)) {}

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

bool grad_enabled();

// Builds an op result. When recording is enabled and any input requires grad,
// the result carries an OpNode with `backward`; otherwise it is a plain leaf.
Tensor make_op_result(Shape shape, std::vector<double> data, std::string name,
                      std::vector<Tensor> inputs,
                      std::function<void(const TensorImpl& out)> backward);

/// Topologically ordered record of the ops in a tensor's ancestry.
/// Every entry's inputs appear before it.
class Tape {
 public:
  static Tape record(const Tensor& root);

  std::size_t size() const { return order_.size(); }
  const std::vector<std::shared_ptr<TensorImpl>>& entries() const { return order_; }
  // Number of entries with a producing op.
  std::size_t op_count() const;

 private:
  std::vector<std::shared_ptr<TensorImpl>> order_;
};

// Populates grads of every requires-grad leaf in the ancestry of `loss`.
// Leaf grads accumulate across calls until `zero_grad()`; intermediate grads
// are released when the pass finishes.
void backward(const Tensor& loss);
void backward(const Tensor& loss, const Tape& tape);

}  // namespace dalnet
