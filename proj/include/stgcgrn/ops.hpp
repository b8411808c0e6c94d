#pragma once

#include <cstddef>
#include <optional>
#include <vector>

#include "stgcgrn/tensor.hpp"

namespace stgcgrn::ops {

enum class Binary { add, sub, mul };
enum class Unary { sigmoid, tanh, relu, abs };
enum class Reduce { sum, mean };

// [m x k] . [k x n] -> [m x n]
Tensor matmul(const Tensor& a, const Tensor& b);

// `b` must match `a` exactly or be a rank-1 vector matching a's last axis.
Tensor elementwise(Binary op, const Tensor& a, const Tensor& b);
Tensor elementwise(Unary op, const Tensor& a);

inline Tensor add(const Tensor& a, const Tensor& b) { return elementwise(Binary::add, a, b); }
inline Tensor sub(const Tensor& a, const Tensor& b) { return elementwise(Binary::sub, a, b); }
inline Tensor mul(const Tensor& a, const Tensor& b) { return elementwise(Binary::mul, a, b); }
inline Tensor sigmoid(const Tensor& a) { return elementwise(Unary::sigmoid, a); }
inline Tensor tanh(const Tensor& a) { return elementwise(Unary::tanh, a); }
inline Tensor relu(const Tensor& a) { return elementwise(Unary::relu, a); }
inline Tensor abs(const Tensor& a) { return elementwise(Unary::abs, a); }

// scale * a + shift
Tensor affine(const Tensor& a, double scale, double shift = 0.0);

Tensor softmax(const Tensor& a, std::size_t axis);
Tensor concat(const std::vector<Tensor>& parts, std::size_t axis);
Tensor slice(const Tensor& a, std::size_t axis, std::size_t begin, std::size_t end);
Tensor reduce(Reduce op, const Tensor& a, std::optional<std::size_t> axis = std::nullopt);

inline Tensor sum(const Tensor& a, std::optional<std::size_t> axis = std::nullopt) {
  return reduce(Reduce::sum, a, axis);
}
inline Tensor mean(const Tensor& a, std::optional<std::size_t> axis = std::nullopt) {
  return reduce(Reduce::mean, a, axis);
}

Tensor reshape(const Tensor& a, const Shape& shape);
Tensor transpose(const Tensor& a);  // rank 2 only

// a[i, :] * s[i] for a [m x n] and s of m elements ([m] or [m x 1]).
Tensor scale_rows(const Tensor& a, const Tensor& s);

// Node mixing for a stacked batch: x is [(G*N) x d], viewed as G blocks of
// N rows; each block is replaced by adj . block, with adj [N x N].
Tensor propagate(const Tensor& adj, const Tensor& x);

}  // namespace stgcgrn::ops
