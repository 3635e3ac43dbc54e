#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <functional>
#include <memory>
#include <vector>

#include "lsno/errors.hpp"

namespace lsno {

using Index = std::int64_t;
using Shape = std::vector<Index>;

inline Index shape_size(const Shape& s) {
  Index n = 1;
  for (Index e : s) n *= e;
  return n;
}

/// Dense 64-bit tensor with an optional gradient buffer. Copies share
/// storage (handle semantics); the values of a tensor that participates in
/// a recorded graph must not be mutated until the tape is cleared.
class Tensor {
 public:
  Tensor() : d_(std::make_shared<Data>()) {}

  static Tensor zeros(Shape shape, bool requires_grad = false) {
    return Tensor(std::move(shape), Eigen::ArrayXd(), requires_grad, true);
  }
  static Tensor full(Shape shape, double value, bool requires_grad = false) {
    Eigen::ArrayXd v = Eigen::ArrayXd::Constant(shape_size(shape), value);
    return Tensor(std::move(shape), std::move(v), requires_grad, false);
  }
  static Tensor scalar(double value, bool requires_grad = false) {
    return full({1}, value, requires_grad);
  }
  static Tensor from_array(Shape shape, Eigen::ArrayXd values, bool requires_grad = false) {
    if (shape_size(shape) != values.size())
      throw DimensionError("tensor shape does not match value count");
    return Tensor(std::move(shape), std::move(values), requires_grad, false);
  }

  const Shape& shape() const { return d_->shape; }
  Index rank() const { return static_cast<Index>(d_->shape.size()); }
  Index size() const { return d_->values.size(); }
  bool is_scalar() const { return size() == 1; }

  const Eigen::ArrayXd& values() const { return d_->values; }
  /// Mutable access for optimizers; never call while a tape referencing
  /// this tensor is still live.
  Eigen::ArrayXd& mutable_values() { return d_->values; }

  double item() const {
    if (!is_scalar()) throw ContractError("item() requires a scalar tensor");
    return d_->values[0];
  }

  bool requires_grad() const { return d_->requires_grad; }
  /// True when gradients must flow through this tensor (leaf flag or any
  /// upstream leaf). Outputs of primitives inherit it from their inputs.
  bool needs_grad() const { return d_->needs_grad; }

  bool has_grad() const { return d_->grad.size() == d_->values.size() && size() > 0; }
  const Eigen::ArrayXd& grad() const {
    if (!has_grad()) throw ContractError("gradient has not been populated");
    return d_->grad;
  }
  // Handles have shallow-const semantics: grad mutation goes through the
  // shared storage, so these are callable on captured copies.
  void zero_grad() const {
    if (has_grad()) d_->grad.setZero();
  }

  /// Allocates (zero-filled) on first use; accumulation is always +=.
  Eigen::ArrayXd& ensure_grad() const {
    if (!has_grad()) d_->grad = Eigen::ArrayXd::Zero(d_->values.size());
    return d_->grad;
  }

  bool same_storage(const Tensor& other) const { return d_ == other.d_; }

 private:
  struct Data {
    Shape shape;
    Eigen::ArrayXd values;
    Eigen::ArrayXd grad;  // empty until first accumulation
    bool requires_grad = false;
    bool needs_grad = false;
  };

  Tensor(Shape shape, Eigen::ArrayXd values, bool requires_grad, bool zero_fill)
      : d_(std::make_shared<Data>()) {
    d_->shape = std::move(shape);
    if (zero_fill)
      d_->values = Eigen::ArrayXd::Zero(shape_size(d_->shape));
    else
      d_->values = std::move(values);
    d_->requires_grad = requires_grad;
    d_->needs_grad = requires_grad;
  }

  friend Tensor make_op_output(Shape shape, Eigen::ArrayXd values, bool needs_grad);
  std::shared_ptr<Data> d_;
};

inline Tensor make_op_output(Shape shape, Eigen::ArrayXd values, bool needs_grad) {
  Tensor t = Tensor::from_array(std::move(shape), std::move(values), false);
  t.d_->needs_grad = needs_grad;
  return t;
}

/// Ordered record of primitive operations. Operations append their backward
/// step as they execute, so the record is topologically sorted by
/// construction and one reverse sweep visits every node exactly once.
/// A tape must only ever be driven from one thread.
class Tape {
 public:
  /// Appends a backward step together with the op output it writes through.
  /// Output grads are scratch: backward() zeroes them before replaying, so
  /// only leaf gradients accumulate across backward calls.
  void record(std::function<void()> backward_step, Tensor output) {
    if (recording_) steps_.push_back({std::move(backward_step), std::move(output)});
  }

  /// Seeds d(loss)/d(loss) = 1 and replays the record in reverse,
  /// accumulating (+=) into the grad of every reachable tensor that needs
  /// one. Calling twice without zero_grad doubles the leaf gradients.
  void backward(const Tensor& loss);

  void clear() { steps_.clear(); }
  std::size_t size() const { return steps_.size(); }

  bool recording() const { return recording_; }
  void set_recording(bool on) { recording_ = on; }

 private:
  struct Step {
    std::function<void()> fn;
    Tensor out;
  };
  std::vector<Step> steps_;
  bool recording_ = true;
};

// ---- primitives -----------------------------------------------------------
// Elementwise binaries accept equal shapes or scalar-with-tensor; no other
// broadcasting exists.

Tensor matmul(Tape& tape, const Tensor& a, const Tensor& b);

/// Valid (no-padding) cross-correlation. x is [c_in, L], kernel is
/// [c_out, c_in, w]; the output length is floor((L - w)/stride) + 1.
Tensor conv1d(Tape& tape, const Tensor& x, const Tensor& kernel, Index stride);

Tensor add(Tape& tape, const Tensor& a, const Tensor& b);
Tensor sub(Tape& tape, const Tensor& a, const Tensor& b);
Tensor mul(Tape& tape, const Tensor& a, const Tensor& b);
Tensor div(Tape& tape, const Tensor& a, const Tensor& b);

Tensor tanh(Tape& tape, const Tensor& x);
Tensor sigmoid(Tape& tape, const Tensor& x);
Tensor relu(Tape& tape, const Tensor& x);
Tensor softplus(Tape& tape, const Tensor& x);
Tensor abs(Tape& tape, const Tensor& x);
/// x^p for p >= 1 on nonnegative inputs; negative entries raise DomainError.
Tensor pow_p(Tape& tape, const Tensor& x, double p);
/// max(x, floor) elementwise; gradient passes through where x > floor.
Tensor clamp_min(Tape& tape, const Tensor& x, double floor);

Tensor sum(Tape& tape, const Tensor& x);
Tensor mean(Tape& tape, const Tensor& x);
Tensor sum(Tape& tape, const Tensor& x, Index axis);
Tensor mean(Tape& tape, const Tensor& x, Index axis);

/// Concatenate along axis 0; all parts share the remaining extents.
Tensor concat(Tape& tape, const std::vector<Tensor>& parts);
Tensor reshape(Tape& tape, const Tensor& x, Shape shape);

// ---- deterministic kernels -------------------------------------------------
// All contractions run through this fixed-order dot so that a value computed
// for one grid node is bit-identical no matter which other nodes are in the
// batch (mesh-free evaluation depends on it).
inline double fixed_dot(const double* a, const double* b, Index n) {
  double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0;
  Index i = 0;
  for (; i + 4 <= n; i += 4) {
    s0 += a[i] * b[i];
    s1 += a[i + 1] * b[i + 1];
    s2 += a[i + 2] * b[i + 2];
    s3 += a[i + 3] * b[i + 3];
  }
  for (; i < n; ++i) s0 += a[i] * b[i];
  return (s0 + s1) + (s2 + s3);
}

}  // namespace lsno
