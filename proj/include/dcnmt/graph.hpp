#pragma once

#include <cstddef>
#include <cstdint>
#include <deque>
#include <functional>
#include <span>
#include <vector>

#include "dcnmt/param.hpp"
#include "dcnmt/rng.hpp"
#include "dcnmt/tensor.hpp"

namespace dcnmt {

class Graph;

// Handle to a value recorded on a Graph.
class Var {
 public:
  Var() = default;
  Var(Graph* graph, std::uint32_t id) : graph_(graph), id_(id) {}

  Graph& graph() const { return *graph_; }
  std::uint32_t id() const { return id_; }
  const Tensor& value() const;
  std::size_t rows() const { return value().rows(); }
  std::size_t cols() const { return value().cols(); }
  bool valid() const { return graph_ != nullptr; }

 private:
  Graph* graph_ = nullptr;
  std::uint32_t id_ = 0;
};

// Reverse-mode tape. Every op records its output and an explicit backward
// function; Graph::backward replays them in reverse creation order. Leaves
// bound to a Parameter accumulate straight into Parameter::grad.
//
// A graph built with record_gradients = false keeps forward values only.
class Graph {
 public:
  using BackwardFn = std::function<void(Graph&, std::uint32_t self)>;

  explicit Graph(bool record_gradients = true) : recording_(record_gradients) {}
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  Var constant(Tensor value);
  Var param(Parameter& p);

  const Tensor& value(std::uint32_t id) const;
  bool requires_grad(std::uint32_t id) const { return nodes_[id].requires_grad; }
  bool recording() const { return recording_; }
  std::size_t size() const { return nodes_.size(); }

  // Gradient of a node, allocated as zeros on first access.
  Tensor& grad(std::uint32_t id);

  // Records an op output. `parents` decide whether the node needs a gradient;
  // the backward function is dropped when none of them does.
  Var record(Tensor value, std::initializer_list<Var> parents, BackwardFn backward);
  Var record(Tensor value, std::span<const Var> parents, BackwardFn backward);

  // Seeds d(loss)/d(loss) = 1 for a 1×1 loss and propagates.
  void backward(Var loss);

 private:
  struct Node {
    Tensor value;
    const Tensor* external_value = nullptr;
    Tensor grad;
    Tensor* external_grad = nullptr;
    bool requires_grad = false;
    bool has_grad = false;
    BackwardFn backward;
  };

  bool recording_;
  std::deque<Node> nodes_;
};

// Differentiable ops. Shapes follow the batch-major convention: B×n tensors
// hold one row per sentence in the batch.
namespace ops {

Var matmul(Var a, Var b);
Var add(Var a, Var b);
Var sub(Var a, Var b);
// a (B×n) + bias (1×n) broadcast over rows.
Var add_bias(Var a, Var bias);
Var mul(Var a, Var b);
Var scale(Var a, double factor);
Var sigmoid(Var a);
Var tanh(Var a);
Var slice_cols(Var a, std::size_t begin, std::size_t count);
Var concat_cols(std::span<const Var> parts);
Var concat_cols(Var a, Var b);
// Rows of an embedding table selected by ids; one output row per id.
Var embedding(Graph& g, Parameter& table, std::span<const int> ids);
// Row b of the result is a.row(b) where mask[b] != 0, else b.row(b).
Var where_rows(std::span<const char> mask, Var a, Var b);
// Row-wise dot product: (B×n, B×n) -> B×1.
Var row_dot(Var a, Var b);
// a (B×n) with row b scaled by w(b, 0), w is B×1.
Var scale_rows(Var a, Var w);
// Row-wise softmax; entries with mask == 0 get exactly zero weight.
// mask may be empty (no masking) or hold rows×cols entries.
Var masked_softmax(Var scores, std::span<const char> mask);
// Σ_b weight[b] · −log softmax(logits.row(b))[target[b]], as a 1×1 tensor.
Var cross_entropy(Var logits, std::span<const int> targets, std::span<const double> weights);
// Fused LSTM pointwise stage. gates is B×4h laid out [i | f | o | g]
// (pre-activation), c is B×h. Returns B×2h holding [h′ | c′].
Var lstm_pointwise(Var gates, Var c);
// Inverted dropout; identity when !training or p == 0.
Var dropout(Var a, double p, Rng& rng, bool training);
Var sum(Var a);
// scores(b, s) = query.row(b) · keys[s].row(b), giving B×J.
Var attention_scores(Var query, std::span<const Var> keys);
// context.row(b) = Σ_s weights(b, s) · values[s].row(b), giving B×n.
Var attention_context(Var weights, std::span<const Var> values);

}  // namespace ops

}  // namespace dcnmt
