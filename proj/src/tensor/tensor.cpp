#include "stgcgrn/tensor.hpp"

#include <algorithm>
#include <iomanip>
#include <istream>
#include <ostream>
#include <sstream>

#include "stgcgrn/errors.hpp"

namespace stgcgrn {

std::size_t shape_numel(const Shape& shape) {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << 'x';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

Tensor::Tensor(Shape shape, std::vector<double> values, bool requires_grad) {
  if (shape.empty()) throw ShapeError("tensor shape must have at least one axis");
  for (auto d : shape)
    if (d == 0) throw ShapeError("tensor dimensions must be positive, got " + shape_str(shape));
  if (shape_numel(shape) != values.size())
    throw ShapeError("shape " + shape_str(shape) + " needs " + std::to_string(shape_numel(shape)) +
                     " values, got " + std::to_string(values.size()));
  impl_ = std::make_shared<detail::TensorImpl>();
  impl_->shape = std::move(shape);
  impl_->values = std::move(values);
  impl_->requires_grad = requires_grad;
}

Tensor Tensor::zeros(const Shape& shape, bool requires_grad) {
  return Tensor(shape, std::vector<double>(shape_numel(shape), 0.0), requires_grad);
}

Tensor Tensor::full(const Shape& shape, double value, bool requires_grad) {
  return Tensor(shape, std::vector<double>(shape_numel(shape), value), requires_grad);
}

Tensor Tensor::scalar(double value, bool requires_grad) { return Tensor({1}, {value}, requires_grad); }

Tensor Tensor::eye(std::size_t n) {
  Tensor t = zeros({n, n});
  auto v = t.mutable_values();
  for (std::size_t i = 0; i < n; ++i) v[i * n + i] = 1.0;
  return t;
}

const Shape& Tensor::shape() const {
  if (!impl_) throw std::logic_error("use of undefined tensor");
  return impl_->shape;
}

std::size_t Tensor::dim(std::size_t axis) const {
  const auto& s = shape();
  if (axis >= s.size())
    throw ShapeError("axis " + std::to_string(axis) + " out of range for " + shape_str(s));
  return s[axis];
}

std::span<const double> Tensor::values() const {
  if (!impl_) throw std::logic_error("use of undefined tensor");
  return impl_->values;
}

std::span<double> Tensor::mutable_values() const {
  if (!impl_) throw std::logic_error("use of undefined tensor");
  return impl_->values;
}

double Tensor::item() const {
  if (numel() != 1) throw ShapeError("item() on tensor of shape " + shape_str(shape()));
  return impl_->values[0];
}

double Tensor::at(std::initializer_list<std::size_t> index) const {
  const auto& s = shape();
  if (index.size() != s.size()) throw ShapeError("index rank does not match " + shape_str(s));
  std::size_t flat = 0;
  std::size_t axis = 0;
  for (auto i : index) {
    if (i >= s[axis]) throw ShapeError("index out of range for " + shape_str(s));
    flat = flat * s[axis] + i;
    ++axis;
  }
  return impl_->values[flat];
}

bool Tensor::requires_grad() const { return impl_ && impl_->requires_grad; }

Tensor& Tensor::set_requires_grad(bool flag) {
  if (!impl_) throw std::logic_error("use of undefined tensor");
  impl_->requires_grad = flag;
  return *this;
}

bool Tensor::has_grad() const { return impl_ && !impl_->grad.empty(); }

std::span<const double> Tensor::grad() const {
  if (!impl_) throw std::logic_error("use of undefined tensor");
  return impl_->grad;
}

std::span<double> Tensor::mutable_grad() const {
  if (!impl_) throw std::logic_error("use of undefined tensor");
  if (impl_->grad.empty()) impl_->grad.assign(impl_->values.size(), 0.0);
  return impl_->grad;
}

void Tensor::zero_grad() const {
  if (impl_ && !impl_->grad.empty()) std::fill(impl_->grad.begin(), impl_->grad.end(), 0.0);
}

Tensor Tensor::clone() const { return Tensor(shape(), impl_->values, false); }

// ---------------------------------------------------------------------------

namespace {
thread_local Tape* g_active_tape = nullptr;
thread_local debug::Fault g_fault = debug::Fault::none;
}  // namespace

void Tape::record(const Tensor& output, BackwardFn fn) {
  records_.push_back(Record{output, std::move(fn)});
}

TapeScope::TapeScope(Tape& tape) : previous_(g_active_tape) { g_active_tape = &tape; }
TapeScope::~TapeScope() { g_active_tape = previous_; }

Tape* active_tape() { return g_active_tape; }

void backward(const Tensor& loss, Tape& tape) {
  if (!loss.defined() || loss.numel() != 1)
    throw ShapeError("backward needs a scalar loss, got " +
                     (loss.defined() ? shape_str(loss.shape()) : std::string("undefined")));
  const auto produced = std::find_if(tape.records_.begin(), tape.records_.end(),
                                     [&](const auto& r) { return r.output.same_storage(loss); });
  if (produced == tape.records_.end())
    throw std::invalid_argument("backward: loss was not produced on this tape");

  for (auto& r : tape.records_) {
    auto g = r.output.impl();
    g->grad.assign(g->values.size(), 0.0);
  }
  loss.impl()->grad[0] = 1.0;
  for (auto it = tape.records_.rbegin(); it != tape.records_.rend(); ++it) it->backward();
}

void write_text(std::ostream& os, const Tensor& t) {
  const auto& s = t.shape();
  for (std::size_t i = 0; i < s.size(); ++i) os << (i ? " " : "") << s[i];
  os << '\n' << std::setprecision(17);
  for (double v : t.values()) os << v << '\n';
}

Tensor read_text(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) throw DataError("tensor text: missing shape line");
  std::istringstream ls(line);
  Shape shape;
  std::size_t d;
  while (ls >> d) shape.push_back(d);
  std::vector<double> values(shape_numel(shape));
  for (auto& v : values)
    if (!(is >> v)) throw DataError("tensor text: fewer values than shape " + shape_str(shape));
  return Tensor(std::move(shape), std::move(values));
}

namespace debug {
void set_fault(Fault fault) { g_fault = fault; }
Fault fault() { return g_fault; }
}  // namespace debug

}  // namespace stgcgrn
