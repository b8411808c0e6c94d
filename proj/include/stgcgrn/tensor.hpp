#pragma once

// Dense float64 tensors with a tape-based reverse-mode autodiff engine.
//
// A Tensor is a shared handle: copies alias the same storage. Operations in
// stgcgrn::ops record a backward rule on the thread's active Tape (see
// TapeScope) whenever at least one input requires a gradient. Without an
// active tape the ops evaluate eagerly and nothing is tracked.

#include <cstddef>
#include <functional>
#include <initializer_list>
#include <iosfwd>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace stgcgrn {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

namespace detail {
struct TensorImpl {
  Shape shape;
  std::vector<double> values;
  std::vector<double> grad;  // empty until a gradient is first written
  bool requires_grad = false;
};
}  // namespace detail

class Tensor {
 public:
  Tensor() = default;
  Tensor(Shape shape, std::vector<double> values, bool requires_grad = false);

  static Tensor zeros(const Shape& shape, bool requires_grad = false);
  static Tensor full(const Shape& shape, double value, bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);
  static Tensor eye(std::size_t n);

  bool defined() const { return impl_ != nullptr; }
  const Shape& shape() const;
  std::size_t rank() const { return shape().size(); }
  std::size_t dim(std::size_t axis) const;
  std::size_t numel() const { return values().size(); }

  std::span<const double> values() const;
  std::span<double> mutable_values() const;  // handles share storage
  double item() const;
  double at(std::initializer_list<std::size_t> index) const;

  bool requires_grad() const;
  Tensor& set_requires_grad(bool flag);
  bool has_grad() const;
  std::span<const double> grad() const;
  std::span<double> mutable_grad() const;  // allocates zeros on first use
  void zero_grad() const;

  // Deep copy of values; the copy is a fresh leaf with no gradient.
  Tensor clone() const;

  bool same_storage(const Tensor& other) const { return impl_ == other.impl_; }
  detail::TensorImpl* impl() const { return impl_.get(); }

 private:
  std::shared_ptr<detail::TensorImpl> impl_;
};

// Ordered log of executed primitives. Rebuilt for every forward pass.
class Tape {
 public:
  using BackwardFn = std::function<void()>;

  void record(const Tensor& output, BackwardFn fn);
  std::size_t size() const { return records_.size(); }
  void clear() { records_.clear(); }

 private:
  struct Record {
    Tensor output;
    BackwardFn backward;
  };
  std::vector<Record> records_;

  friend void backward(const Tensor& loss, Tape& tape);
};

// Makes `tape` the active tape on the calling thread for the scope's lifetime.
class TapeScope {
 public:
  explicit TapeScope(Tape& tape);
  ~TapeScope();
  TapeScope(const TapeScope&) = delete;
  TapeScope& operator=(const TapeScope&) = delete;

 private:
  Tape* previous_;
};

Tape* active_tape();

// Accumulates d(loss)/d(leaf) into every requires_grad leaf reached by the
// tape. Intermediate gradients are reset at the start of each call, so
// repeated calls accumulate only into leaves.
void backward(const Tensor& loss, Tape& tape);

// Shape line followed by one value per line, 17 significant digits.
void write_text(std::ostream& os, const Tensor& t);
Tensor read_text(std::istream& is);

namespace debug {
// Deliberate gradient corruption used to validate the gradient checker.
enum class Fault { none, negate_tanh_backward, negate_matmul_backward };
void set_fault(Fault fault);
Fault fault();
}  // namespace debug

}  // namespace stgcgrn
