#pragma once

// Finite-difference checks over every primitive op and over the full model
// on a toy instance. Shared by the CLI, the unit tests and the acceptance run.

#include <cstdint>
#include <string>
#include <vector>

#include "stgcgrn/gradcheck.hpp"
#include "stgcgrn/model.hpp"

namespace stgcgrn::checks {

struct NamedCheck {
  std::string name;
  GradCheckReport report;
};

std::vector<NamedCheck> primitive_suite(std::uint64_t seed = 1, double tolerance = 1e-6);

struct ToyOptions {
  std::size_t probes = 32;  // sampled (parameter, index) pairs
  std::uint64_t seed = 1;
  double tolerance = 1e-4;
  model::Ablation ablation;
  model::LayerOrder order = model::LayerOrder::attention_then_dgc;
  std::size_t Q = 3;
};

// N=4, C=1, d_h=8, P=3, S=1, K=2, two heads, MAE loss on a batch of two.
model::ModelConfig toy_config(std::size_t Q = 3);

NamedCheck model_check(const ToyOptions& opts = {});

}  // namespace stgcgrn::checks
