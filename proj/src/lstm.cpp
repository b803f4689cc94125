#include "dcnmt/lstm.hpp"

#include <cmath>

#include "dcnmt/error.hpp"

namespace dcnmt {

LstmCell::LstmCell(const std::string& name, std::size_t input_dim, std::size_t hidden_dim)
    : W(name + ".W", input_dim, 4 * hidden_dim),
      U(name + ".U", hidden_dim, 4 * hidden_dim),
      b(name + ".b", 1, 4 * hidden_dim) {}

void LstmCell::init(Rng& rng, double range) {
  W.init_uniform(rng, range);
  U.init_uniform(rng, range);
  b.value.fill(0.0);
  const std::size_t h = hidden_dim();
  for (std::size_t k = 0; k < h; ++k) b.value[h + k] = 1.0;
}

void LstmCell::check_shapes() const {
  const std::size_t h = U.value.rows();
  if (U.value.cols() != 4 * h || W.value.cols() != 4 * h || b.value.rows() != 1 ||
      b.value.cols() != 4 * h) {
    throw ShapeError("LSTM cell '" + W.name + "' has inconsistent shapes W " +
                     W.value.shape_string() + ", U " + U.value.shape_string() + ", b " +
                     b.value.shape_string());
  }
}

void lstm_gate_forward(std::span<const double> gates, std::span<const double> c,
                       std::span<double> h_out, std::span<double> c_out) {
  const std::size_t h = c.size();
  for (std::size_t k = 0; k < h; ++k) {
    const double i = sigmoid(gates[k]);
    const double f = sigmoid(gates[h + k]);
    const double o = sigmoid(gates[2 * h + k]);
    const double g = std::tanh(gates[3 * h + k]);
    c_out[k] = f * c[k] + i * g;
    h_out[k] = o * std::tanh(c_out[k]);
  }
}

std::pair<Tensor, Tensor> lstm_step(const LstmCell& cell, const Tensor& x, const Tensor& h,
                                    const Tensor& c) {
  cell.check_shapes();
  const std::size_t hd = cell.hidden_dim();
  if (x.cols() != cell.input_dim() || h.cols() != hd || c.cols() != hd || h.rows() != x.rows() ||
      c.rows() != x.rows()) {
    throw ShapeError("lstm_step: x " + x.shape_string() + ", h " + h.shape_string() + ", c " +
                     c.shape_string() + " for cell " + cell.W.value.shape_string());
  }
  Tensor gates = matmul(x, cell.W.value);
  matmul_acc(h, cell.U.value, gates);
  Tensor h_out(x.rows(), hd), c_out(x.rows(), hd);
  for (std::size_t r = 0; r < x.rows(); ++r) {
    auto z = gates.row(r);
    for (std::size_t k = 0; k < z.size(); ++k) z[k] += cell.b.value[k];
    lstm_gate_forward(z, c.row(r), h_out.row(r), c_out.row(r));
  }
  return {std::move(h_out), std::move(c_out)};
}

BoundLstm bind(Graph& g, LstmCell& cell) {
  cell.check_shapes();
  return {g.param(cell.W), g.param(cell.U), g.param(cell.b)};
}

LstmState lstm_step(const BoundLstm& cell, Var x, const LstmState& state) {
  Var gates = ops::add_bias(ops::add(ops::matmul(x, cell.W), ops::matmul(state.h, cell.U)), cell.b);
  Var hc = ops::lstm_pointwise(gates, state.c);
  const std::size_t h = state.c.cols();
  return {ops::slice_cols(hc, 0, h), ops::slice_cols(hc, h, h)};
}

}  // namespace dcnmt
