#include "dcnmt/param.hpp"

#include <cmath>

namespace dcnmt {

void Parameter::init_uniform(Rng& rng, double range) {
  for (double& v : value.data()) v = rng.uniform(-range, range);
  if (!grad.same_shape(value)) grad = Tensor(value.rows(), value.cols());
}

void zero_grads(std::span<Parameter* const> params) {
  for (Parameter* p : params) {
    if (!p->grad.same_shape(p->value)) p->grad = Tensor(p->value.rows(), p->value.cols());
    p->zero_grad();
  }
}

double global_grad_norm(std::span<Parameter* const> params) {
  double sq = 0.0;
  for (const Parameter* p : params)
    for (double g : p->grad.data()) sq += g * g;
  return std::sqrt(sq);
}

double clip_grad_norm(std::span<Parameter* const> params, double max_norm) {
  const double norm = global_grad_norm(params);
  if (max_norm > 0.0 && norm > max_norm) {
    const double factor = max_norm / norm;
    for (Parameter* p : params) p->grad *= factor;
  }
  return norm;
}

void sgd_update(std::span<Parameter* const> params, double lr) {
  for (Parameter* p : params) {
    auto v = p->value.data();
    auto g = p->grad.data();
    for (std::size_t i = 0; i < v.size(); ++i) v[i] -= lr * g[i];
  }
}

}  // namespace dcnmt
