#include "stgcgrn/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "stgcgrn/errors.hpp"

namespace stgcgrn {

double relative_error(double analytic, double numeric, double floor) {
  const double denom = std::max({std::fabs(analytic), std::fabs(numeric), floor});
  return std::fabs(analytic - numeric) / denom;
}

namespace {

double eval_without_tape(const std::function<Tensor()>& loss) {
  Tensor out = loss();
  return out.item();
}

void note(GradCheckReport& report, double analytic, double numeric, std::size_t index, double floor) {
  const double rel = relative_error(analytic, numeric, floor);
  const double abs = std::fabs(analytic - numeric);
  if (std::isnan(rel) || rel > report.max_rel_error) {
    report.max_rel_error = std::isnan(rel) ? INFINITY : rel;
    report.worst_index = index;
  }
  report.max_abs_error = std::max(report.max_abs_error, abs);
  ++report.checked;
}

}  // namespace

GradCheckReport finite_diff_check(const ScalarFn& f, Tensor x, const GradCheckOptions& opts) {
  const bool had_flag = x.requires_grad();
  x.set_requires_grad(true);
  x.zero_grad();
  std::vector<double> analytic;
  {
    Tape tape;
    TapeScope scope(tape);
    Tensor out = f(x);
    if (out.numel() != 1) throw ShapeError("finite_diff_check: f must be scalar-valued");
    backward(out, tape);
    analytic.assign(x.grad().begin(), x.grad().end());
  }
  x.zero_grad();
  x.set_requires_grad(had_flag);

  std::vector<std::size_t> indices = opts.indices;
  if (indices.empty()) {
    indices.resize(x.numel());
    std::iota(indices.begin(), indices.end(), 0);
  }
  GradCheckReport report;
  auto v = x.mutable_values();
  for (std::size_t i : indices) {
    const double orig = v[i];
    v[i] = orig + opts.step;
    const double up = f(x).item();
    v[i] = orig - opts.step;
    const double down = f(x).item();
    v[i] = orig;
    note(report, analytic[i], (up - down) / (2.0 * opts.step), i, opts.floor);
  }
  report.passed = report.max_rel_error <= opts.tolerance;
  return report;
}

GradCheckReport finite_diff_check_params(const std::function<Tensor()>& loss, const std::vector<Tensor>& params,
                                         const std::vector<ParamProbe>& probes, const GradCheckOptions& opts) {
  for (auto p : params) p.zero_grad();
  {
    Tape tape;
    TapeScope scope(tape);
    Tensor out = loss();
    backward(out, tape);
  }
  std::vector<double> analytic;
  for (const auto& probe : probes) {
    analytic.push_back(probe.param.has_grad() ? probe.param.grad()[probe.index] : 0.0);
  }
  for (auto p : params) p.zero_grad();

  GradCheckReport report;
  for (std::size_t k = 0; k < probes.size(); ++k) {
    Tensor p = probes[k].param;
    auto v = p.mutable_values();
    const std::size_t i = probes[k].index;
    const double orig = v[i];
    v[i] = orig + opts.step;
    const double up = eval_without_tape(loss);
    v[i] = orig - opts.step;
    const double down = eval_without_tape(loss);
    v[i] = orig;
    note(report, analytic[k], (up - down) / (2.0 * opts.step), k, opts.floor);
  }
  report.passed = report.max_rel_error <= opts.tolerance;
  return report;
}

}  // namespace stgcgrn
