#include <cmath>

#include "stgcgrn/errors.hpp"
#include "stgcgrn/ops.hpp"
#include "stgcgrn/trainer.hpp"

namespace stgcgrn::train {

Tensor mae_loss(const Tensor& pred, const Tensor& target) {
  if (pred.shape() != target.shape())
    throw ShapeError("mae_loss: prediction " + shape_str(pred.shape()) + " vs target " + shape_str(target.shape()));
  return ops::mean(ops::abs(ops::sub(pred, target)));
}

namespace {

struct Accumulator {
  double abs = 0.0, sq = 0.0, pct = 0.0;
  std::size_t n = 0, n_pct = 0;

  void add(double p, double y, double floor) {
    const double e = p - y;
    abs += std::fabs(e);
    sq += e * e;
    ++n;
    if (std::fabs(y) > floor) {
      pct += std::fabs(e / y);
      ++n_pct;
    }
  }

  MetricSet result() const {
    MetricSet m;
    if (n == 0) return m;
    m.mae = abs / static_cast<double>(n);
    m.rmse = std::sqrt(sq / static_cast<double>(n));
    m.mape = n_pct ? 100.0 * pct / static_cast<double>(n_pct) : 0.0;
    return m;
  }
};

}  // namespace

MetricReport metrics(const Tensor& pred, const Tensor& target, const data::Normalizer& normalizer,
                     double mape_floor) {
  if (pred.shape() != target.shape())
    throw ShapeError("metrics: prediction " + shape_str(pred.shape()) + " vs target " + shape_str(target.shape()));
  if (pred.rank() != 4) throw ShapeError("metrics: expected [B x Q x N x C], got " + shape_str(pred.shape()));
  const Tensor p = normalizer.inverse(pred);
  const Tensor y = normalizer.inverse(target);
  const std::size_t b = pred.dim(0), q = pred.dim(1), frame = pred.dim(2) * pred.dim(3);
  auto pv = p.values();
  auto yv = y.values();
  Accumulator total;
  std::vector<Accumulator> steps(q);
  for (std::size_t i = 0; i < b; ++i)
    for (std::size_t t = 0; t < q; ++t)
      for (std::size_t k = 0; k < frame; ++k) {
        const std::size_t idx = (i * q + t) * frame + k;
        total.add(pv[idx], yv[idx], mape_floor);
        steps[t].add(pv[idx], yv[idx], mape_floor);
      }
  MetricReport r;
  r.overall = total.result();
  for (const auto& s : steps) r.per_step.push_back(s.result());
  r.count = total.n;
  r.mape_count = total.n_pct;
  return r;
}

std::vector<std::size_t> horizon_steps(std::size_t Q) {
  std::vector<std::size_t> out;
  for (std::size_t k = 1; k <= 4; ++k) {
    const std::size_t s = (k * Q + 3) / 4;
    if (s >= 1 && (out.empty() || out.back() != s)) out.push_back(s);
  }
  return out;
}

}  // namespace stgcgrn::train
