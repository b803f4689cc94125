#include "dcnmt/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "dcnmt/error.hpp"

namespace dcnmt {

namespace {

double evaluate(const LossBuilder& loss) {
  Graph g(false);
  const double v = loss(g).value()[0];
  if (!std::isfinite(v)) throw NumericError("grad_check: non-finite loss");
  return v;
}

}  // namespace

GradCheckResult grad_check(const LossBuilder& loss, std::span<Parameter* const> params,
                           double eps) {
  if (!(eps > 0.0)) throw ParameterError("grad_check: eps must be positive");
  zero_grads(params);
  {
    Graph g(true);
    Var l = loss(g);
    if (!std::isfinite(l.value()[0])) throw NumericError("grad_check: non-finite loss");
    g.backward(l);
  }
  GradCheckResult result;
  for (Parameter* p : params) {
    for (std::size_t i = 0; i < p->value.size(); ++i) {
      const double saved = p->value[i];
      p->value[i] = saved + eps;
      const double up = evaluate(loss);
      p->value[i] = saved - eps;
      const double down = evaluate(loss);
      p->value[i] = saved;
      const double numeric = (up - down) / (2.0 * eps);
      const double analytic = p->grad[i];
      const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-8});
      const double rel = std::abs(analytic - numeric) / denom;
      ++result.entries_checked;
      if (rel > result.max_relative_error) {
        result.max_relative_error = rel;
        result.worst_parameter = p->name;
        result.worst_index = i;
        result.analytic = analytic;
        result.numeric = numeric;
      }
    }
  }
  return result;
}

}  // namespace dcnmt
