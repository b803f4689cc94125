#pragma once

#include <span>
#include <string>
#include <vector>

#include "dcnmt/rng.hpp"
#include "dcnmt/tensor.hpp"

namespace dcnmt {

// A trainable tensor with its gradient accumulator.
struct Parameter {
  std::string name;
  Tensor value;
  Tensor grad;

  Parameter() = default;
  Parameter(std::string name, std::size_t rows, std::size_t cols)
      : name(std::move(name)), value(rows, cols), grad(rows, cols) {}

  void zero_grad() { grad.fill(0.0); }
  void init_uniform(Rng& rng, double range);
};

void zero_grads(std::span<Parameter* const> params);
double global_grad_norm(std::span<Parameter* const> params);
// Scales all gradients so the global norm is at most max_norm. Returns the
// norm before clipping.
double clip_grad_norm(std::span<Parameter* const> params, double max_norm);
// value -= lr * grad
void sgd_update(std::span<Parameter* const> params, double lr);

}  // namespace dcnmt
