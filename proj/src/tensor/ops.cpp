#include "stgcgrn/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "stgcgrn/errors.hpp"

namespace stgcgrn::ops {
namespace {

bool tracking(std::initializer_list<const Tensor*> inputs) {
  if (active_tape() == nullptr) return false;
  return std::any_of(inputs.begin(), inputs.end(), [](const Tensor* t) { return t->requires_grad(); });
}

bool tracking(const std::vector<Tensor>& inputs) {
  if (active_tape() == nullptr) return false;
  return std::any_of(inputs.begin(), inputs.end(), [](const Tensor& t) { return t.requires_grad(); });
}

void record(Tensor& out, Tape::BackwardFn fn) {
  out.set_requires_grad(true);
  active_tape()->record(out, std::move(fn));
}

double fault_sign(debug::Fault which) { return debug::fault() == which ? -1.0 : 1.0; }

// Splits a shape around `axis` into (outer, extent, inner) for strided loops.
struct AxisView {
  std::size_t outer = 1, extent = 1, inner = 1;
};

AxisView axis_view(const Shape& s, std::size_t axis) {
  if (axis >= s.size()) throw ShapeError("axis " + std::to_string(axis) + " out of range for " + shape_str(s));
  AxisView v;
  for (std::size_t i = 0; i < axis; ++i) v.outer *= s[i];
  v.extent = s[axis];
  for (std::size_t i = axis + 1; i < s.size(); ++i) v.inner *= s[i];
  return v;
}

void require_rank(const Tensor& t, std::size_t rank, const char* op) {
  if (t.rank() != rank)
    throw ShapeError(std::string(op) + ": expected rank " + std::to_string(rank) + ", got " + shape_str(t.shape()));
}

// c[m x n] += a[m x k] . b[k x n]
void gemm_nn(const double* a, const double* b, double* c, std::size_t m, std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    double* ci = c + i * n;
    const double* ai = a + i * k;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = ai[p];
      if (av == 0.0) continue;
      const double* bp = b + p * n;
      for (std::size_t j = 0; j < n; ++j) ci[j] += av * bp[j];
    }
  }
}

// c[m x k] += g[m x n] . b[k x n]^T
void gemm_nt(const double* g, const double* b, double* c, std::size_t m, std::size_t n, std::size_t k) {
  for (std::size_t i = 0; i < m; ++i) {
    const double* gi = g + i * n;
    double* ci = c + i * k;
    for (std::size_t p = 0; p < k; ++p) {
      const double* bp = b + p * n;
      double acc = 0.0;
      for (std::size_t j = 0; j < n; ++j) acc += gi[j] * bp[j];
      ci[p] += acc;
    }
  }
}

// c[k x n] += a[m x k]^T . g[m x n]
void gemm_tn(const double* a, const double* g, double* c, std::size_t m, std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    const double* ai = a + i * k;
    const double* gi = g + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = ai[p];
      if (av == 0.0) continue;
      double* cp = c + p * n;
      for (std::size_t j = 0; j < n; ++j) cp[j] += av * gi[j];
    }
  }
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_rank(a, 2, "matmul");
  require_rank(b, 2, "matmul");
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  if (b.dim(0) != k)
    throw ShapeError("matmul: inner dimensions differ, " + shape_str(a.shape()) + " . " + shape_str(b.shape()));
  std::vector<double> out(m * n, 0.0);
  gemm_nn(a.values().data(), b.values().data(), out.data(), m, k, n);
  Tensor c({m, n}, std::move(out));
  if (tracking({&a, &b})) {
    record(c, [a, b, c, m, k, n]() mutable {
      const double sign = fault_sign(debug::Fault::negate_matmul_backward);
      std::vector<double> g(c.grad().begin(), c.grad().end());
      if (sign < 0)
        for (auto& x : g) x = -x;
      if (a.requires_grad()) gemm_nt(g.data(), b.values().data(), a.mutable_grad().data(), m, n, k);
      if (b.requires_grad()) gemm_tn(a.values().data(), g.data(), b.mutable_grad().data(), m, k, n);
    });
  }
  return c;
}

Tensor elementwise(Binary op, const Tensor& a, const Tensor& b) {
  const bool same = a.shape() == b.shape();
  const bool trailing = !same && b.rank() == 1 && b.dim(0) == a.shape().back();
  if (!same && !trailing)
    throw ShapeError("elementwise: incompatible shapes " + shape_str(a.shape()) + " and " + shape_str(b.shape()));
  const std::size_t n = a.numel();
  const std::size_t period = b.numel();
  auto av = a.values();
  auto bv = b.values();
  std::vector<double> out(n);
  switch (op) {
    case Binary::add:
      for (std::size_t i = 0; i < n; ++i) out[i] = av[i] + bv[i % period];
      break;
    case Binary::sub:
      for (std::size_t i = 0; i < n; ++i) out[i] = av[i] - bv[i % period];
      break;
    case Binary::mul:
      for (std::size_t i = 0; i < n; ++i) out[i] = av[i] * bv[i % period];
      break;
  }
  Tensor c(a.shape(), std::move(out));
  if (tracking({&a, &b})) {
    record(c, [op, a, b, c, n, period]() mutable {
      auto g = c.grad();
      if (a.requires_grad()) {
        auto ga = a.mutable_grad();
        if (op == Binary::mul) {
          auto bv = b.values();
          for (std::size_t i = 0; i < n; ++i) ga[i] += g[i] * bv[i % period];
        } else {
          for (std::size_t i = 0; i < n; ++i) ga[i] += g[i];
        }
      }
      if (b.requires_grad()) {
        auto gb = b.mutable_grad();
        if (op == Binary::mul) {
          auto av = a.values();
          for (std::size_t i = 0; i < n; ++i) gb[i % period] += g[i] * av[i];
        } else {
          const double s = op == Binary::sub ? -1.0 : 1.0;
          for (std::size_t i = 0; i < n; ++i) gb[i % period] += s * g[i];
        }
      }
    });
  }
  return c;
}

Tensor elementwise(Unary op, const Tensor& a) {
  const std::size_t n = a.numel();
  auto av = a.values();
  std::vector<double> out(n);
  switch (op) {
    case Unary::sigmoid:
      for (std::size_t i = 0; i < n; ++i) {
        const double x = av[i];
        // split by sign so exp never overflows
        out[i] = x >= 0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
      }
      break;
    case Unary::tanh:
      for (std::size_t i = 0; i < n; ++i) out[i] = std::tanh(av[i]);
      break;
    case Unary::relu:
      for (std::size_t i = 0; i < n; ++i) out[i] = av[i] > 0 ? av[i] : 0.0;
      break;
    case Unary::abs:
      for (std::size_t i = 0; i < n; ++i) out[i] = std::fabs(av[i]);
      break;
  }
  Tensor c(a.shape(), std::move(out));
  if (tracking({&a})) {
    record(c, [op, a, c, n]() mutable {
      auto g = c.grad();
      auto y = c.values();
      auto x = a.values();
      auto ga = a.mutable_grad();
      switch (op) {
        case Unary::sigmoid:
          for (std::size_t i = 0; i < n; ++i) ga[i] += g[i] * y[i] * (1.0 - y[i]);
          break;
        case Unary::tanh: {
          const double sign = fault_sign(debug::Fault::negate_tanh_backward);
          for (std::size_t i = 0; i < n; ++i) ga[i] += sign * g[i] * (1.0 - y[i] * y[i]);
          break;
        }
        case Unary::relu:
          for (std::size_t i = 0; i < n; ++i)
            if (x[i] > 0) ga[i] += g[i];
          break;
        case Unary::abs:
          for (std::size_t i = 0; i < n; ++i) {
            if (x[i] > 0)
              ga[i] += g[i];
            else if (x[i] < 0)
              ga[i] -= g[i];
          }
          break;
      }
    });
  }
  return c;
}

Tensor affine(const Tensor& a, double scale, double shift) {
  const std::size_t n = a.numel();
  auto av = a.values();
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = scale * av[i] + shift;
  Tensor c(a.shape(), std::move(out));
  if (tracking({&a})) {
    record(c, [a, c, n, scale]() mutable {
      auto g = c.grad();
      auto ga = a.mutable_grad();
      for (std::size_t i = 0; i < n; ++i) ga[i] += scale * g[i];
    });
  }
  return c;
}

Tensor softmax(const Tensor& a, std::size_t axis) {
  const AxisView v = axis_view(a.shape(), axis);
  auto av = a.values();
  std::vector<double> out(a.numel());
  for (std::size_t o = 0; o < v.outer; ++o) {
    for (std::size_t in = 0; in < v.inner; ++in) {
      const std::size_t base = o * v.extent * v.inner + in;
      double mx = -std::numeric_limits<double>::infinity();
      for (std::size_t e = 0; e < v.extent; ++e) mx = std::max(mx, av[base + e * v.inner]);
      double total = 0.0;
      for (std::size_t e = 0; e < v.extent; ++e) {
        const double x = std::exp(av[base + e * v.inner] - mx);
        out[base + e * v.inner] = x;
        total += x;
      }
      for (std::size_t e = 0; e < v.extent; ++e) out[base + e * v.inner] /= total;
    }
  }
  Tensor c(a.shape(), std::move(out));
  if (tracking({&a})) {
    record(c, [a, c, v]() mutable {
      auto g = c.grad();
      auto y = c.values();
      auto ga = a.mutable_grad();
      for (std::size_t o = 0; o < v.outer; ++o) {
        for (std::size_t in = 0; in < v.inner; ++in) {
          const std::size_t base = o * v.extent * v.inner + in;
          double dot = 0.0;
          for (std::size_t e = 0; e < v.extent; ++e) dot += g[base + e * v.inner] * y[base + e * v.inner];
          for (std::size_t e = 0; e < v.extent; ++e) {
            const std::size_t i = base + e * v.inner;
            ga[i] += y[i] * (g[i] - dot);
          }
        }
      }
    });
  }
  return c;
}

Tensor concat(const std::vector<Tensor>& parts, std::size_t axis) {
  if (parts.empty()) throw ShapeError("concat: no tensors");
  const Shape& first = parts.front().shape();
  if (axis >= first.size()) throw ShapeError("concat: axis out of range for " + shape_str(first));
  Shape out_shape = first;
  out_shape[axis] = 0;
  for (const auto& p : parts) {
    const Shape& s = p.shape();
    bool ok = s.size() == first.size();
    for (std::size_t i = 0; ok && i < s.size(); ++i)
      if (i != axis && s[i] != first[i]) ok = false;
    if (!ok) throw ShapeError("concat: " + shape_str(s) + " does not match " + shape_str(first) + " off axis " +
                              std::to_string(axis));
    out_shape[axis] += s[axis];
  }
  const AxisView ov = axis_view(out_shape, axis);
  std::vector<double> out(shape_numel(out_shape));
  std::vector<std::size_t> offsets;
  std::size_t offset = 0;
  for (const auto& p : parts) {
    offsets.push_back(offset);
    const std::size_t chunk = p.dim(axis) * ov.inner;
    auto pv = p.values();
    for (std::size_t o = 0; o < ov.outer; ++o)
      std::copy_n(pv.begin() + o * chunk, chunk, out.begin() + o * ov.extent * ov.inner + offset * ov.inner);
    offset += p.dim(axis);
  }
  Tensor c(std::move(out_shape), std::move(out));
  if (tracking(parts)) {
    record(c, [parts, c, ov, offsets, axis]() mutable {
      auto g = c.grad();
      for (std::size_t k = 0; k < parts.size(); ++k) {
        if (!parts[k].requires_grad()) continue;
        const std::size_t chunk = parts[k].dim(axis) * ov.inner;
        auto gp = parts[k].mutable_grad();
        for (std::size_t o = 0; o < ov.outer; ++o) {
          const double* src = g.data() + o * ov.extent * ov.inner + offsets[k] * ov.inner;
          double* dst = gp.data() + o * chunk;
          for (std::size_t i = 0; i < chunk; ++i) dst[i] += src[i];
        }
      }
    });
  }
  return c;
}

Tensor slice(const Tensor& a, std::size_t axis, std::size_t begin, std::size_t end) {
  const AxisView v = axis_view(a.shape(), axis);
  if (begin >= end || end > v.extent)
    throw ShapeError("slice: range [" + std::to_string(begin) + ", " + std::to_string(end) + ") invalid for " +
                     shape_str(a.shape()) + " axis " + std::to_string(axis));
  Shape out_shape = a.shape();
  out_shape[axis] = end - begin;
  const std::size_t chunk = (end - begin) * v.inner;
  auto av = a.values();
  std::vector<double> out(v.outer * chunk);
  for (std::size_t o = 0; o < v.outer; ++o)
    std::copy_n(av.begin() + o * v.extent * v.inner + begin * v.inner, chunk, out.begin() + o * chunk);
  Tensor c(std::move(out_shape), std::move(out));
  if (tracking({&a})) {
    record(c, [a, c, v, begin, chunk]() mutable {
      auto g = c.grad();
      auto ga = a.mutable_grad();
      for (std::size_t o = 0; o < v.outer; ++o) {
        double* dst = ga.data() + o * v.extent * v.inner + begin * v.inner;
        const double* src = g.data() + o * chunk;
        for (std::size_t i = 0; i < chunk; ++i) dst[i] += src[i];
      }
    });
  }
  return c;
}

Tensor reduce(Reduce op, const Tensor& a, std::optional<std::size_t> axis) {
  const Shape& s = a.shape();
  AxisView v;
  Shape out_shape;
  if (axis) {
    v = axis_view(s, *axis);
    for (std::size_t i = 0; i < s.size(); ++i)
      if (i != *axis) out_shape.push_back(s[i]);
    if (out_shape.empty()) out_shape = {1};
  } else {
    v.extent = a.numel();
    out_shape = {1};
  }
  const double factor = op == Reduce::mean ? 1.0 / static_cast<double>(v.extent) : 1.0;
  auto av = a.values();
  std::vector<double> out(v.outer * v.inner, 0.0);
  for (std::size_t o = 0; o < v.outer; ++o)
    for (std::size_t e = 0; e < v.extent; ++e)
      for (std::size_t in = 0; in < v.inner; ++in)
        out[o * v.inner + in] += av[(o * v.extent + e) * v.inner + in];
  if (factor != 1.0)
    for (auto& x : out) x *= factor;
  Tensor c(std::move(out_shape), std::move(out));
  if (tracking({&a})) {
    record(c, [a, c, v, factor]() mutable {
      auto g = c.grad();
      auto ga = a.mutable_grad();
      for (std::size_t o = 0; o < v.outer; ++o)
        for (std::size_t e = 0; e < v.extent; ++e)
          for (std::size_t in = 0; in < v.inner; ++in)
            ga[(o * v.extent + e) * v.inner + in] += factor * g[o * v.inner + in];
    });
  }
  return c;
}

Tensor reshape(const Tensor& a, const Shape& shape) {
  if (shape_numel(shape) != a.numel())
    throw ShapeError("reshape: " + shape_str(a.shape()) + " cannot become " + shape_str(shape));
  auto av = a.values();
  Tensor c(shape, std::vector<double>(av.begin(), av.end()));
  if (tracking({&a})) {
    record(c, [a, c]() mutable {
      auto g = c.grad();
      auto ga = a.mutable_grad();
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
    });
  }
  return c;
}

Tensor transpose(const Tensor& a) {
  require_rank(a, 2, "transpose");
  const std::size_t m = a.dim(0), n = a.dim(1);
  auto av = a.values();
  std::vector<double> out(m * n);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out[j * m + i] = av[i * n + j];
  Tensor c({n, m}, std::move(out));
  if (tracking({&a})) {
    record(c, [a, c, m, n]() mutable {
      auto g = c.grad();
      auto ga = a.mutable_grad();
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) ga[i * n + j] += g[j * m + i];
    });
  }
  return c;
}

Tensor scale_rows(const Tensor& a, const Tensor& s) {
  require_rank(a, 2, "scale_rows");
  const std::size_t m = a.dim(0), n = a.dim(1);
  if (s.numel() != m || s.rank() > 2 || (s.rank() == 2 && s.dim(1) != 1))
    throw ShapeError("scale_rows: scale " + shape_str(s.shape()) + " does not match rows of " + shape_str(a.shape()));
  auto av = a.values();
  auto sv = s.values();
  std::vector<double> out(m * n);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out[i * n + j] = av[i * n + j] * sv[i];
  Tensor c({m, n}, std::move(out));
  if (tracking({&a, &s})) {
    record(c, [a, s, c, m, n]() mutable {
      auto g = c.grad();
      if (a.requires_grad()) {
        auto ga = a.mutable_grad();
        auto sv = s.values();
        for (std::size_t i = 0; i < m; ++i)
          for (std::size_t j = 0; j < n; ++j) ga[i * n + j] += g[i * n + j] * sv[i];
      }
      if (s.requires_grad()) {
        auto gs = s.mutable_grad();
        auto av = a.values();
        for (std::size_t i = 0; i < m; ++i) {
          double acc = 0.0;
          for (std::size_t j = 0; j < n; ++j) acc += g[i * n + j] * av[i * n + j];
          gs[i] += acc;
        }
      }
    });
  }
  return c;
}

Tensor propagate(const Tensor& adj, const Tensor& x) {
  require_rank(adj, 2, "propagate");
  require_rank(x, 2, "propagate");
  const std::size_t nodes = adj.dim(0);
  if (adj.dim(1) != nodes) throw ShapeError("propagate: adjacency must be square, got " + shape_str(adj.shape()));
  if (x.dim(0) % nodes != 0)
    throw ShapeError("propagate: rows of " + shape_str(x.shape()) + " not a multiple of " + std::to_string(nodes));
  const std::size_t groups = x.dim(0) / nodes, d = x.dim(1);
  const std::size_t block = nodes * d;
  std::vector<double> out(x.numel(), 0.0);
  for (std::size_t g = 0; g < groups; ++g)
    gemm_nn(adj.values().data(), x.values().data() + g * block, out.data() + g * block, nodes, nodes, d);
  Tensor c(x.shape(), std::move(out));
  if (tracking({&adj, &x})) {
    record(c, [adj, x, c, nodes, groups, d, block]() mutable {
      auto gc = c.grad();
      if (adj.requires_grad()) {
        auto ga = adj.mutable_grad();
        for (std::size_t g = 0; g < groups; ++g)
          gemm_nt(gc.data() + g * block, x.values().data() + g * block, ga.data(), nodes, d, nodes);
      }
      if (x.requires_grad()) {
        auto gx = x.mutable_grad();
        for (std::size_t g = 0; g < groups; ++g)
          gemm_tn(adj.values().data(), gc.data() + g * block, gx.data() + g * block, nodes, nodes, d);
      }
    });
  }
  return c;
}

}  // namespace stgcgrn::ops
