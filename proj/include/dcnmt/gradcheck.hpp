#pragma once

#include <functional>
#include <span>
#include <string>

#include "dcnmt/graph.hpp"
#include "dcnmt/param.hpp"

namespace dcnmt {

struct GradCheckResult {
  double max_relative_error = 0.0;
  std::string worst_parameter;
  std::size_t worst_index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
  std::size_t entries_checked = 0;
};

// Builds the loss on the given graph and returns it as a 1×1 Var. Must be
// deterministic (no dropout).
using LossBuilder = std::function<Var(Graph&)>;

// Compares the tape gradient of every parameter entry with the central
// difference (f(θ+eps) − f(θ−eps)) / 2eps. Relative error per entry is
// |a − n| / max(|a|, |n|, 1e-8). Parameter values are restored afterwards.
GradCheckResult grad_check(const LossBuilder& loss, std::span<Parameter* const> params,
                           double eps = 1e-5);

}  // namespace dcnmt
