#include "dcnmt/graph.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "dcnmt/error.hpp"
#include "dcnmt/lstm.hpp"

namespace dcnmt {

const Tensor& Var::value() const { return graph_->value(id_); }

Var Graph::constant(Tensor value) {
  Node node;
  node.value = std::move(value);
  nodes_.push_back(std::move(node));
  return Var(this, static_cast<std::uint32_t>(nodes_.size() - 1));
}

Var Graph::param(Parameter& p) {
  Node node;
  node.external_value = &p.value;
  if (recording_) {
    if (!p.grad.same_shape(p.value)) p.grad = Tensor(p.value.rows(), p.value.cols());
    node.external_grad = &p.grad;
    node.requires_grad = true;
  }
  nodes_.push_back(std::move(node));
  return Var(this, static_cast<std::uint32_t>(nodes_.size() - 1));
}

const Tensor& Graph::value(std::uint32_t id) const {
  const Node& n = nodes_[id];
  return n.external_value ? *n.external_value : n.value;
}

Tensor& Graph::grad(std::uint32_t id) {
  Node& n = nodes_[id];
  n.has_grad = true;
  if (n.external_grad) return *n.external_grad;
  if (n.grad.empty() && !value(id).empty()) {
    const Tensor& v = value(id);
    n.grad = Tensor(v.rows(), v.cols());
  }
  return n.grad;
}

Var Graph::record(Tensor value, std::initializer_list<Var> parents, BackwardFn backward) {
  return record(std::move(value), std::span<const Var>(parents.begin(), parents.size()),
                std::move(backward));
}

Var Graph::record(Tensor value, std::span<const Var> parents, BackwardFn backward) {
  Node node;
  node.value = std::move(value);
  if (recording_) {
    node.requires_grad = std::any_of(parents.begin(), parents.end(),
                                     [this](const Var& p) { return requires_grad(p.id()); });
    if (node.requires_grad) node.backward = std::move(backward);
  }
  nodes_.push_back(std::move(node));
  return Var(this, static_cast<std::uint32_t>(nodes_.size() - 1));
}

void Graph::backward(Var loss) {
  if (!recording_) throw ParameterError("backward on a graph built without gradients");
  const Tensor& v = value(loss.id());
  if (v.rows() != 1 || v.cols() != 1) {
    throw ShapeError("backward needs a 1x1 loss, got " + v.shape_string());
  }
  if (!std::isfinite(v[0])) throw NumericError("non-finite loss in backward");
  grad(loss.id())[0] += 1.0;
  for (std::uint32_t i = loss.id() + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (n.has_grad && n.backward) n.backward(*this, i);
  }
}

namespace ops {

namespace {

void require_cols(const Tensor& t, std::size_t cols, const char* what) {
  if (t.cols() != cols) {
    throw ShapeError(std::string(what) + ": expected " + std::to_string(cols) + " columns, got " +
                     t.shape_string());
  }
}

template <typename F>
Var unary(Var a, F&& f, Graph::BackwardFn back) {
  const Tensor& x = a.value();
  Tensor out(x.rows(), x.cols());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = f(x[i]);
  return a.graph().record(std::move(out), {a}, std::move(back));
}

}  // namespace

Var matmul(Var a, Var b) {
  Graph& g = a.graph();
  Tensor out = dcnmt::matmul(a.value(), b.value());
  const auto ia = a.id(), ib = b.id();
  return g.record(std::move(out), {a, b}, [ia, ib](Graph& g, std::uint32_t self) {
    const Tensor& dy = g.grad(self);
    if (g.requires_grad(ia)) matmul_nt_acc(dy, g.value(ib), g.grad(ia));
    if (g.requires_grad(ib)) matmul_tn_acc(g.value(ia), dy, g.grad(ib));
  });
}

Var add(Var a, Var b) {
  require_same_shape(a.value(), b.value(), "add");
  Tensor out = a.value() + b.value();
  const auto ia = a.id(), ib = b.id();
  return a.graph().record(std::move(out), {a, b}, [ia, ib](Graph& g, std::uint32_t self) {
    const Tensor& dy = g.grad(self);
    if (g.requires_grad(ia)) g.grad(ia) += dy;
    if (g.requires_grad(ib)) g.grad(ib) += dy;
  });
}

Var sub(Var a, Var b) {
  require_same_shape(a.value(), b.value(), "sub");
  Tensor out = a.value() - b.value();
  const auto ia = a.id(), ib = b.id();
  return a.graph().record(std::move(out), {a, b}, [ia, ib](Graph& g, std::uint32_t self) {
    const Tensor& dy = g.grad(self);
    if (g.requires_grad(ia)) g.grad(ia) += dy;
    if (g.requires_grad(ib)) g.grad(ib) -= dy;
  });
}

Var add_bias(Var a, Var bias) {
  const Tensor& x = a.value();
  const Tensor& b = bias.value();
  if (b.rows() != 1) throw ShapeError("add_bias: bias must be 1xn, got " + b.shape_string());
  require_cols(x, b.cols(), "add_bias");
  Tensor out = x;
  for (std::size_t r = 0; r < out.rows(); ++r) {
    auto row = out.row(r);
    for (std::size_t c = 0; c < row.size(); ++c) row[c] += b[c];
  }
  const auto ia = a.id(), ib = bias.id();
  return a.graph().record(std::move(out), {a, bias}, [ia, ib](Graph& g, std::uint32_t self) {
    const Tensor& dy = g.grad(self);
    if (g.requires_grad(ia)) g.grad(ia) += dy;
    if (g.requires_grad(ib)) {
      Tensor& db = g.grad(ib);
      for (std::size_t r = 0; r < dy.rows(); ++r) {
        auto row = dy.row(r);
        for (std::size_t c = 0; c < row.size(); ++c) db[c] += row[c];
      }
    }
  });
}

Var mul(Var a, Var b) {
  require_same_shape(a.value(), b.value(), "mul");
  const Tensor& x = a.value();
  const Tensor& y = b.value();
  Tensor out(x.rows(), x.cols());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] * y[i];
  const auto ia = a.id(), ib = b.id();
  return a.graph().record(std::move(out), {a, b}, [ia, ib](Graph& g, std::uint32_t self) {
    const Tensor& dy = g.grad(self);
    if (g.requires_grad(ia)) {
      Tensor& da = g.grad(ia);
      const Tensor& y = g.value(ib);
      for (std::size_t i = 0; i < dy.size(); ++i) da[i] += dy[i] * y[i];
    }
    if (g.requires_grad(ib)) {
      Tensor& db = g.grad(ib);
      const Tensor& x = g.value(ia);
      for (std::size_t i = 0; i < dy.size(); ++i) db[i] += dy[i] * x[i];
    }
  });
}

Var scale(Var a, double factor) {
  const auto ia = a.id();
  return unary(a, [factor](double x) { return x * factor; },
               [ia, factor](Graph& g, std::uint32_t self) {
                 const Tensor& dy = g.grad(self);
                 Tensor& da = g.grad(ia);
                 for (std::size_t i = 0; i < dy.size(); ++i) da[i] += dy[i] * factor;
               });
}

Var sigmoid(Var a) {
  const auto ia = a.id();
  return unary(a, [](double x) { return dcnmt::sigmoid(x); }, [ia](Graph& g, std::uint32_t self) {
    const Tensor& dy = g.grad(self);
    const Tensor& y = g.value(self);
    Tensor& da = g.grad(ia);
    for (std::size_t i = 0; i < dy.size(); ++i) da[i] += dy[i] * y[i] * (1.0 - y[i]);
  });
}

Var tanh(Var a) {
  const auto ia = a.id();
  return unary(a, [](double x) { return std::tanh(x); }, [ia](Graph& g, std::uint32_t self) {
    const Tensor& dy = g.grad(self);
    const Tensor& y = g.value(self);
    Tensor& da = g.grad(ia);
    for (std::size_t i = 0; i < dy.size(); ++i) da[i] += dy[i] * (1.0 - y[i] * y[i]);
  });
}

Var slice_cols(Var a, std::size_t begin, std::size_t count) {
  const Tensor& x = a.value();
  if (begin + count > x.cols()) {
    throw ShapeError("slice_cols [" + std::to_string(begin) + ", " +
                     std::to_string(begin + count) + ") out of range for " + x.shape_string());
  }
  Tensor out(x.rows(), count);
  for (std::size_t r = 0; r < x.rows(); ++r) {
    std::copy_n(x.row(r).begin() + static_cast<std::ptrdiff_t>(begin), count, out.row(r).begin());
  }
  const auto ia = a.id();
  return a.graph().record(std::move(out), {a}, [ia, begin, count](Graph& g, std::uint32_t self) {
    const Tensor& dy = g.grad(self);
    Tensor& da = g.grad(ia);
    for (std::size_t r = 0; r < dy.rows(); ++r) {
      auto src = dy.row(r);
      auto dst = da.row(r);
      for (std::size_t c = 0; c < count; ++c) dst[begin + c] += src[c];
    }
  });
}

Var concat_cols(std::span<const Var> parts) {
  if (parts.empty()) throw ShapeError("concat_cols of nothing");
  const std::size_t rows = parts.front().rows();
  std::size_t cols = 0;
  for (const Var& p : parts) {
    if (p.rows() != rows) {
      throw ShapeError("concat_cols: row mismatch " + parts.front().value().shape_string() +
                       " and " + p.value().shape_string());
    }
    cols += p.cols();
  }
  Tensor out(rows, cols);
  std::vector<std::uint32_t> ids;
  std::vector<std::size_t> offsets;
  std::size_t offset = 0;
  for (const Var& p : parts) {
    const Tensor& x = p.value();
    for (std::size_t r = 0; r < rows; ++r) {
      std::copy(x.row(r).begin(), x.row(r).end(),
                out.row(r).begin() + static_cast<std::ptrdiff_t>(offset));
    }
    ids.push_back(p.id());
    offsets.push_back(offset);
    offset += x.cols();
  }
  return parts.front().graph().record(
      std::move(out), parts, [ids, offsets](Graph& g, std::uint32_t self) {
        const Tensor& dy = g.grad(self);
        for (std::size_t k = 0; k < ids.size(); ++k) {
          if (!g.requires_grad(ids[k])) continue;
          Tensor& dp = g.grad(ids[k]);
          for (std::size_t r = 0; r < dy.rows(); ++r) {
            auto src = dy.row(r);
            auto dst = dp.row(r);
            for (std::size_t c = 0; c < dst.size(); ++c) dst[c] += src[offsets[k] + c];
          }
        }
      });
}

Var concat_cols(Var a, Var b) {
  const Var parts[] = {a, b};
  return concat_cols(std::span<const Var>(parts));
}

Var embedding(Graph& g, Parameter& table, std::span<const int> ids) {
  const Tensor& t = table.value;
  Tensor out(ids.size(), t.cols());
  for (std::size_t r = 0; r < ids.size(); ++r) {
    if (ids[r] < 0 || static_cast<std::size_t>(ids[r]) >= t.rows()) {
      throw InputError("embedding id " + std::to_string(ids[r]) + " out of range for table '" +
                       table.name + "' with " + std::to_string(t.rows()) + " rows");
    }
    auto src = t.row(static_cast<std::size_t>(ids[r]));
    std::copy(src.begin(), src.end(), out.row(r).begin());
  }
  Var leaf = g.param(table);
  std::vector<int> saved(ids.begin(), ids.end());
  // The leaf is a parent only for gradient routing; rows are scattered here
  // instead of materialising a dense table gradient per lookup.
  Parameter* target = &table;
  return g.record(std::move(out), {leaf}, [saved = std::move(saved), target](Graph& g,
                                                                               std::uint32_t self) {
    const Tensor& dy = g.grad(self);
    for (std::size_t r = 0; r < saved.size(); ++r) {
      auto src = dy.row(r);
      auto dst = target->grad.row(static_cast<std::size_t>(saved[r]));
      for (std::size_t c = 0; c < dst.size(); ++c) dst[c] += src[c];
    }
  });
}

Var where_rows(std::span<const char> mask, Var a, Var b) {
  require_same_shape(a.value(), b.value(), "where_rows");
  if (mask.size() != a.rows()) throw ShapeError("where_rows: mask length does not match rows");
  Tensor out = b.value();
  const Tensor& x = a.value();
  for (std::size_t r = 0; r < out.rows(); ++r) {
    if (mask[r]) std::copy(x.row(r).begin(), x.row(r).end(), out.row(r).begin());
  }
  std::vector<char> m(mask.begin(), mask.end());
  const auto ia = a.id(), ib = b.id();
  return a.graph().record(std::move(out), {a, b},
                          [m = std::move(m), ia, ib](Graph& g, std::uint32_t self) {
                            const Tensor& dy = g.grad(self);
                            for (std::size_t r = 0; r < dy.rows(); ++r) {
                              const auto id = m[r] ? ia : ib;
                              if (!g.requires_grad(id)) continue;
                              auto src = dy.row(r);
                              auto dst = g.grad(id).row(r);
                              for (std::size_t c = 0; c < dst.size(); ++c) dst[c] += src[c];
                            }
                          });
}

Var row_dot(Var a, Var b) {
  require_same_shape(a.value(), b.value(), "row_dot");
  const Tensor& x = a.value();
  const Tensor& y = b.value();
  Tensor out(x.rows(), 1);
  for (std::size_t r = 0; r < x.rows(); ++r) {
    double s = 0.0;
    auto xr = x.row(r);
    auto yr = y.row(r);
    for (std::size_t c = 0; c < xr.size(); ++c) s += xr[c] * yr[c];
    out[r] = s;
  }
  const auto ia = a.id(), ib = b.id();
  return a.graph().record(std::move(out), {a, b}, [ia, ib](Graph& g, std::uint32_t self) {
    const Tensor& dy = g.grad(self);
    const Tensor& x = g.value(ia);
    const Tensor& y = g.value(ib);
    const bool ga = g.requires_grad(ia), gb = g.requires_grad(ib);
    for (std::size_t r = 0; r < x.rows(); ++r) {
      const double d = dy[r];
      if (ga) {
        auto dst = g.grad(ia).row(r);
        auto yr = y.row(r);
        for (std::size_t c = 0; c < dst.size(); ++c) dst[c] += d * yr[c];
      }
      if (gb) {
        auto dst = g.grad(ib).row(r);
        auto xr = x.row(r);
        for (std::size_t c = 0; c < dst.size(); ++c) dst[c] += d * xr[c];
      }
    }
  });
}

Var scale_rows(Var a, Var w) {
  const Tensor& x = a.value();
  const Tensor& s = w.value();
  if (s.cols() != 1 || s.rows() != x.rows()) {
    throw ShapeError("scale_rows: weights " + s.shape_string() + " for " + x.shape_string());
  }
  Tensor out(x.rows(), x.cols());
  for (std::size_t r = 0; r < x.rows(); ++r) {
    auto src = x.row(r);
    auto dst = out.row(r);
    for (std::size_t c = 0; c < src.size(); ++c) dst[c] = src[c] * s[r];
  }
  const auto ia = a.id(), iw = w.id();
  return a.graph().record(std::move(out), {a, w}, [ia, iw](Graph& g, std::uint32_t self) {
    const Tensor& dy = g.grad(self);
    const Tensor& x = g.value(ia);
    const Tensor& s = g.value(iw);
    const bool ga = g.requires_grad(ia), gw = g.requires_grad(iw);
    for (std::size_t r = 0; r < x.rows(); ++r) {
      auto dyr = dy.row(r);
      if (ga) {
        auto dst = g.grad(ia).row(r);
        for (std::size_t c = 0; c < dst.size(); ++c) dst[c] += dyr[c] * s[r];
      }
      if (gw) {
        auto xr = x.row(r);
        double acc = 0.0;
        for (std::size_t c = 0; c < xr.size(); ++c) acc += dyr[c] * xr[c];
        g.grad(iw)[r] += acc;
      }
    }
  });
}

Var masked_softmax(Var scores, std::span<const char> mask) {
  const Tensor& x = scores.value();
  if (x.cols() == 0) throw InputError("softmax of an empty input");
  if (!mask.empty() && mask.size() != x.size()) {
    throw ShapeError("masked_softmax: mask size does not match " + x.shape_string());
  }
  Tensor out(x.rows(), x.cols());
  for (std::size_t r = 0; r < x.rows(); ++r) {
    auto in = x.row(r);
    auto dst = out.row(r);
    const char* m = mask.empty() ? nullptr : mask.data() + r * x.cols();
    double mx = -INFINITY;
    for (std::size_t c = 0; c < in.size(); ++c)
      if (!m || m[c]) mx = std::max(mx, in[c]);
    if (mx == -INFINITY) throw InputError("masked_softmax: every entry of a row is masked");
    double z = 0.0;
    for (std::size_t c = 0; c < in.size(); ++c) {
      dst[c] = (!m || m[c]) ? std::exp(in[c] - mx) : 0.0;
      z += dst[c];
    }
    for (double& v : dst) v /= z;
  }
  const auto is = scores.id();
  return scores.graph().record(std::move(out), {scores}, [is](Graph& g, std::uint32_t self) {
    const Tensor& dy = g.grad(self);
    const Tensor& y = g.value(self);
    Tensor& dx = g.grad(is);
    for (std::size_t r = 0; r < y.rows(); ++r) {
      auto yr = y.row(r);
      auto dyr = dy.row(r);
      double dot = 0.0;
      for (std::size_t c = 0; c < yr.size(); ++c) dot += yr[c] * dyr[c];
      auto dst = dx.row(r);
      for (std::size_t c = 0; c < yr.size(); ++c) dst[c] += yr[c] * (dyr[c] - dot);
    }
  });
}

Var cross_entropy(Var logits, std::span<const int> targets, std::span<const double> weights) {
  const Tensor& x = logits.value();
  if (targets.size() != x.rows() || weights.size() != x.rows()) {
    throw ShapeError("cross_entropy: " + std::to_string(targets.size()) + " targets for " +
                     x.shape_string() + " logits");
  }
  Tensor probs = softmax(x);
  double total = 0.0;
  for (std::size_t r = 0; r < x.rows(); ++r) {
    if (weights[r] == 0.0) continue;
    const int t = targets[r];
    if (t < 0 || static_cast<std::size_t>(t) >= x.cols()) {
      throw InputError("cross_entropy target " + std::to_string(t) + " out of range");
    }
    total -= weights[r] * std::log(probs(r, static_cast<std::size_t>(t)));
  }
  std::vector<int> tg(targets.begin(), targets.end());
  std::vector<double> w(weights.begin(), weights.end());
  const auto il = logits.id();
  return logits.graph().record(
      Tensor(1, 1, total), {logits},
      [il, probs = std::move(probs), tg = std::move(tg), w = std::move(w)](Graph& g,
                                                                            std::uint32_t self) {
        const double d = g.grad(self)[0];
        Tensor& dx = g.grad(il);
        for (std::size_t r = 0; r < probs.rows(); ++r) {
          if (w[r] == 0.0) continue;
          auto pr = probs.row(r);
          auto dst = dx.row(r);
          const double s = d * w[r];
          for (std::size_t c = 0; c < pr.size(); ++c) dst[c] += s * pr[c];
          dst[static_cast<std::size_t>(tg[r])] -= s;
        }
      });
}

Var lstm_pointwise(Var gates, Var c) {
  const Tensor& z = gates.value();
  const Tensor& cv = c.value();
  const std::size_t h = cv.cols();
  if (z.cols() != 4 * h || z.rows() != cv.rows()) {
    throw ShapeError("lstm_pointwise: gates " + z.shape_string() + " for cell " +
                     cv.shape_string());
  }
  Tensor out(cv.rows(), 2 * h);
  for (std::size_t r = 0; r < cv.rows(); ++r) {
    auto o = out.row(r);
    lstm_gate_forward(z.row(r), cv.row(r), o.subspan(0, h), o.subspan(h, h));
  }
  const auto iz = gates.id(), ic = c.id();
  return gates.graph().record(std::move(out), {gates, c}, [iz, ic, h](Graph& g,
                                                                       std::uint32_t self) {
    const Tensor& dy = g.grad(self);
    const Tensor& z = g.value(iz);
    const Tensor& cv = g.value(ic);
    const Tensor& y = g.value(self);
    const bool gz = g.requires_grad(iz), gc = g.requires_grad(ic);
    for (std::size_t r = 0; r < cv.rows(); ++r) {
      auto zr = z.row(r);
      auto cr = cv.row(r);
      auto yr = y.row(r);
      auto dyr = dy.row(r);
      for (std::size_t k = 0; k < h; ++k) {
        const double i = dcnmt::sigmoid(zr[k]);
        const double f = dcnmt::sigmoid(zr[h + k]);
        const double o = dcnmt::sigmoid(zr[2 * h + k]);
        const double gg = std::tanh(zr[3 * h + k]);
        const double tc = std::tanh(yr[h + k]);
        const double dh = dyr[k];
        const double dc = dyr[h + k] + dh * o * (1.0 - tc * tc);
        if (gz) {
          auto dz = g.grad(iz).row(r);
          dz[k] += dc * gg * i * (1.0 - i);
          dz[h + k] += dc * cr[k] * f * (1.0 - f);
          dz[2 * h + k] += dh * tc * o * (1.0 - o);
          dz[3 * h + k] += dc * i * (1.0 - gg * gg);
        }
        if (gc) g.grad(ic).row(r)[k] += dc * f;
      }
    }
  });
}

Var dropout(Var a, double p, Rng& rng, bool training) {
  if (!(p >= 0.0 && p < 1.0)) {
    throw ParameterError("dropout probability must lie in [0, 1), got " + std::to_string(p));
  }
  if (!training || p == 0.0) return a;
  const Tensor& x = a.value();
  Tensor mask(x.rows(), x.cols());
  const double keep = 1.0 / (1.0 - p);
  for (std::size_t i = 0; i < mask.size(); ++i) mask[i] = rng.bernoulli(p) ? 0.0 : keep;
  Tensor out(x.rows(), x.cols());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] * mask[i];
  const auto ia = a.id();
  return a.graph().record(std::move(out), {a},
                          [ia, mask = std::move(mask)](Graph& g, std::uint32_t self) {
                            const Tensor& dy = g.grad(self);
                            Tensor& da = g.grad(ia);
                            for (std::size_t i = 0; i < dy.size(); ++i) da[i] += dy[i] * mask[i];
                          });
}

Var sum(Var a) {
  const auto ia = a.id();
  return a.graph().record(Tensor(1, 1, dcnmt::sum(a.value())), {a},
                          [ia](Graph& g, std::uint32_t self) {
                            const double d = g.grad(self)[0];
                            for (double& v : g.grad(ia).data()) v += d;
                          });
}

Var attention_scores(Var query, std::span<const Var> keys) {
  if (keys.empty()) throw InputError("attention over an empty source");
  const Tensor& q = query.value();
  Tensor out(q.rows(), keys.size());
  std::vector<std::uint32_t> ids;
  for (std::size_t s = 0; s < keys.size(); ++s) {
    const Tensor& k = keys[s].value();
    require_same_shape(q, k, "attention_scores");
    for (std::size_t r = 0; r < q.rows(); ++r) {
      auto qr = q.row(r);
      auto kr = k.row(r);
      double acc = 0.0;
      for (std::size_t c = 0; c < qr.size(); ++c) acc += qr[c] * kr[c];
      out(r, s) = acc;
    }
    ids.push_back(keys[s].id());
  }
  std::vector<Var> parents(keys.begin(), keys.end());
  parents.push_back(query);
  const auto iq = query.id();
  return query.graph().record(std::move(out), parents, [iq, ids](Graph& g, std::uint32_t self) {
    const Tensor& dy = g.grad(self);
    const Tensor& q = g.value(iq);
    const bool gq = g.requires_grad(iq);
    for (std::size_t s = 0; s < ids.size(); ++s) {
      const Tensor& k = g.value(ids[s]);
      const bool gk = g.requires_grad(ids[s]);
      for (std::size_t r = 0; r < q.rows(); ++r) {
        const double d = dy(r, s);
        if (d == 0.0) continue;
        if (gq) {
          auto dst = g.grad(iq).row(r);
          auto kr = k.row(r);
          for (std::size_t c = 0; c < dst.size(); ++c) dst[c] += d * kr[c];
        }
        if (gk) {
          auto dst = g.grad(ids[s]).row(r);
          auto qr = q.row(r);
          for (std::size_t c = 0; c < dst.size(); ++c) dst[c] += d * qr[c];
        }
      }
    }
  });
}

Var attention_context(Var weights, std::span<const Var> values) {
  const Tensor& w = weights.value();
  if (values.empty() || w.cols() != values.size()) {
    throw ShapeError("attention_context: weights " + w.shape_string() + " for " +
                     std::to_string(values.size()) + " source positions");
  }
  const std::size_t n = values.front().cols();
  Tensor out(w.rows(), n);
  std::vector<std::uint32_t> ids;
  for (std::size_t s = 0; s < values.size(); ++s) {
    const Tensor& v = values[s].value();
    if (v.rows() != w.rows() || v.cols() != n) {
      throw ShapeError("attention_context: value " + v.shape_string() + " does not match " +
                       out.shape_string());
    }
    for (std::size_t r = 0; r < w.rows(); ++r) {
      const double a = w(r, s);
      auto vr = v.row(r);
      auto dst = out.row(r);
      for (std::size_t c = 0; c < n; ++c) dst[c] += a * vr[c];
    }
    ids.push_back(values[s].id());
  }
  std::vector<Var> parents(values.begin(), values.end());
  parents.push_back(weights);
  const auto iw = weights.id();
  return weights.graph().record(std::move(out), parents, [iw, ids](Graph& g, std::uint32_t self) {
    const Tensor& dy = g.grad(self);
    const Tensor& w = g.value(iw);
    const bool gw = g.requires_grad(iw);
    for (std::size_t s = 0; s < ids.size(); ++s) {
      const Tensor& v = g.value(ids[s]);
      const bool gv = g.requires_grad(ids[s]);
      for (std::size_t r = 0; r < w.rows(); ++r) {
        auto dyr = dy.row(r);
        if (gw) {
          auto vr = v.row(r);
          double acc = 0.0;
          for (std::size_t c = 0; c < vr.size(); ++c) acc += dyr[c] * vr[c];
          g.grad(iw)(r, s) += acc;
        }
        if (gv) {
          const double a = w(r, s);
          auto dst = g.grad(ids[s]).row(r);
          for (std::size_t c = 0; c < dst.size(); ++c) dst[c] += a * dyr[c];
        }
      }
    }
  });
}

}  // namespace ops

}  // namespace dcnmt
