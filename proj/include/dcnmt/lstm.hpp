#pragma once

#include <span>
#include <string>
#include <utility>
#include <vector>

#include "dcnmt/graph.hpp"
#include "dcnmt/param.hpp"
#include "dcnmt/rng.hpp"
#include "dcnmt/tensor.hpp"

namespace dcnmt {

// One LSTM layer. Gate blocks are laid out [input | forget | output | candidate]
// along the 4h columns of W, U and b; the order is part of the model format.
struct LstmCell {
  Parameter W;  // input_dim × 4h
  Parameter U;  // hidden_dim × 4h
  Parameter b;  // 1 × 4h

  LstmCell() = default;
  LstmCell(const std::string& name, std::size_t input_dim, std::size_t hidden_dim);

  std::size_t input_dim() const { return W.value.rows(); }
  std::size_t hidden_dim() const { return U.value.rows(); }

  // Uniform(−range, range) weights, forget-gate bias 1.
  void init(Rng& rng, double range);
  void check_shapes() const;
  std::vector<Parameter*> params() { return {&W, &U, &b}; }
};

// c′ = f⊙c + i⊙g and h′ = o⊙tanh(c′) for one row of pre-activation gates.
void lstm_gate_forward(std::span<const double> gates, std::span<const double> c,
                       std::span<double> h_out, std::span<double> c_out);

// Tensor-level step on a single row (or a batch of rows).
std::pair<Tensor, Tensor> lstm_step(const LstmCell& cell, const Tensor& x, const Tensor& h,
                                    const Tensor& c);

// Graph-level counterpart.
struct LstmState {
  Var h;
  Var c;
};

struct BoundLstm {
  Var W, U, b;
};

BoundLstm bind(Graph& g, LstmCell& cell);
LstmState lstm_step(const BoundLstm& cell, Var x, const LstmState& state);

}  // namespace dcnmt
