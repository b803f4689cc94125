#pragma once

#include <random>

#include "dcnmt/lstm.hpp"
#include "dcnmt/tensor.hpp"
#include "oracles.hpp"

namespace testutil {

inline dcnmt::Tensor random_tensor(std::size_t r, std::size_t c, std::mt19937_64& gen,
                                   double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> d(lo, hi);
  dcnmt::Tensor t(r, c);
  for (double& v : t.data()) v = d(gen);
  return t;
}

inline oracle::Mat to_mat(const dcnmt::Tensor& t) {
  oracle::Mat m(t.rows(), oracle::Vec(t.cols()));
  for (std::size_t r = 0; r < t.rows(); ++r)
    for (std::size_t c = 0; c < t.cols(); ++c) m[r][c] = t(r, c);
  return m;
}

inline oracle::Vec to_vec(const dcnmt::Tensor& t) { return {t.data().begin(), t.data().end()}; }

// Directional outputs of one stack computed with the scalar oracle.
// The final state returned is that of layer `layer_of_final`.
inline std::vector<oracle::Vec> oracle_direction(const std::vector<dcnmt::LstmCell>& stack,
                                                 std::vector<oracle::Vec> inputs, bool reverse,
                                                 oracle::Vec& final_h, oracle::Vec& final_c,
                                                 std::size_t layer_of_final) {
  const std::size_t J = inputs.size();
  for (std::size_t l = 0; l < stack.size(); ++l) {
    const auto W = to_mat(stack[l].W.value), U = to_mat(stack[l].U.value);
    const auto b = to_vec(stack[l].b.value);
    oracle::Vec h(stack[l].hidden_dim(), 0.0), c(stack[l].hidden_dim(), 0.0);
    std::vector<oracle::Vec> outs(J);
    for (std::size_t k = 0; k < J; ++k) {
      const std::size_t t = reverse ? J - 1 - k : k;
      oracle::Vec h2, c2;
      oracle::lstm(inputs[t], h, c, W, U, b, h2, c2);
      h = h2;
      c = c2;
      outs[t] = h;
    }
    if (l == layer_of_final) {
      final_h = h;
      final_c = c;
    }
    inputs = outs;
  }
  return inputs;
}

}  // namespace testutil
