#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <vector>

#include "stgcgrn/tensor.hpp"

namespace stgcgrn {

struct GradCheckReport {
  double max_rel_error = 0.0;
  double max_abs_error = 0.0;
  std::size_t worst_index = 0;
  std::size_t checked = 0;
  bool passed = false;
};

struct GradCheckOptions {
  double step = 1e-5;
  double tolerance = 1e-6;
  // Relative error is |analytic - numeric| / max(|analytic|, |numeric|, floor).
  double floor = 1e-4;
  // Check only these flat indices of x (all when empty).
  std::vector<std::size_t> indices;
};

using ScalarFn = std::function<Tensor(const Tensor&)>;

double relative_error(double analytic, double numeric, double floor);

// Compares the tape gradient of f at x with central differences. `x` is
// perturbed in place and restored; f must build its graph from x on the
// active tape and return a one-element tensor.
GradCheckReport finite_diff_check(const ScalarFn& f, Tensor x, const GradCheckOptions& opts = {});

// Multi-parameter variant: `loss` closes over `params`; every listed
// (parameter, flat index) pair is checked against central differences.
struct ParamProbe {
  Tensor param;
  std::size_t index;
};
GradCheckReport finite_diff_check_params(const std::function<Tensor()>& loss, const std::vector<Tensor>& params,
                                         const std::vector<ParamProbe>& probes, const GradCheckOptions& opts = {});

}  // namespace stgcgrn
