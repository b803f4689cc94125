#include "dcnmt/model.hpp"

#include <algorithm>
#include <fstream>
#include <istream>
#include <ostream>

#include "dcnmt/error.hpp"
#include "dcnmt/serialize.hpp"

namespace dcnmt {

namespace {

constexpr std::string_view kMagic = "DCNMT";
constexpr std::uint32_t kVersion = 1;

struct Bound {
  Model* model;
  std::vector<BoundLstm> fwd, bwd, dec;
  Var W_a, W_c, W_out, b_out;
};

Bound bind_model(Graph& g, Model& m) {
  Bound b{&m, {}, {}, {}, {}, {}, {}, {}};
  for (auto& cell : m.params.enc_fwd) b.fwd.push_back(bind(g, cell));
  for (auto& cell : m.params.enc_bwd) b.bwd.push_back(bind(g, cell));
  for (auto& cell : m.params.dec) b.dec.push_back(bind(g, cell));
  b.W_a = g.param(m.params.W_a);
  b.W_c = g.param(m.params.W_c);
  b.W_out = g.param(m.params.W_out);
  b.b_out = g.param(m.params.b_out);
  return b;
}

struct Encoded {
  std::vector<Var> hbar;
  std::vector<Var> fwd_top;
  std::vector<Var> bwd_top;
  std::vector<LstmState> init;
  std::vector<char> attn_mask;  // B×J, empty when nothing is padded
};

bool all_set(const std::vector<char>& m) {
  return std::all_of(m.begin(), m.end(), [](char c) { return c != 0; });
}

// Runs one direction of the stacked encoder. Padded positions carry the
// previous state forward, so a reversed pass starts at each sentence's end.
std::vector<Var> run_direction(Graph& g, const std::vector<BoundLstm>& cells,
                               const std::vector<Var>& inputs,
                               const std::vector<std::vector<char>>* masks, bool reverse,
                               double dropout_p, Rng& rng, bool training,
                               std::vector<LstmState>& finals) {
  const std::size_t J = inputs.size();
  const std::size_t B = inputs.front().rows();
  std::vector<Var> layer_in = inputs;
  std::vector<Var> outs(J);
  finals.clear();
  for (std::size_t l = 0; l < cells.size(); ++l) {
    const std::size_t h = cells[l].U.rows();
    LstmState state{g.constant(Tensor(B, h)), g.constant(Tensor(B, h))};
    for (std::size_t k = 0; k < J; ++k) {
      const std::size_t t = reverse ? J - 1 - k : k;
      LstmState next = lstm_step(cells[l], layer_in[t], state);
      if (masks && !all_set((*masks)[t])) {
        next.h = ops::where_rows((*masks)[t], next.h, state.h);
        next.c = ops::where_rows((*masks)[t], next.c, state.c);
      }
      state = next;
      outs[t] = state.h;
    }
    finals.push_back(state);
    if (l + 1 < cells.size()) {
      for (std::size_t t = 0; t < J; ++t) layer_in[t] = ops::dropout(outs[t], dropout_p, rng, training);
    }
  }
  return outs;
}

Encoded run_encoder(Graph& g, const Bound& b, const std::vector<Var>& inputs,
                    const std::vector<std::vector<char>>* masks, Rng& rng, bool training) {
  if (inputs.empty()) throw InputError("encode: empty source sequence");
  const double p = b.model->config.dropout_p;
  Encoded enc;
  std::vector<LstmState> ff, bf;
  enc.fwd_top = run_direction(g, b.fwd, inputs, masks, false, p, rng, training, ff);
  enc.bwd_top = run_direction(g, b.bwd, inputs, masks, true, p, rng, training, bf);
  for (std::size_t t = 0; t < inputs.size(); ++t) {
    enc.hbar.push_back(ops::add(enc.fwd_top[t], enc.bwd_top[t]));
  }
  for (std::size_t l = 0; l < ff.size(); ++l) {
    enc.init.push_back({ops::add(ff[l].h, bf[l].h), ops::add(ff[l].c, bf[l].c)});
  }
  if (masks) {
    const std::size_t J = inputs.size();
    const std::size_t B = inputs.front().rows();
    bool any_pad = false;
    enc.attn_mask.assign(B * J, 1);
    for (std::size_t t = 0; t < J; ++t)
      for (std::size_t r = 0; r < B; ++r)
        if (!(*masks)[t][r]) {
          enc.attn_mask[r * J + t] = 0;
          any_pad = true;
        }
    if (!any_pad) enc.attn_mask.clear();
  }
  return enc;
}

struct Attn {
  Var weights;
  Var context;
};

Attn attend_vars(const Bound& b, Var h_t, const std::vector<Var>& hbar,
                 const std::vector<char>& mask) {
  Var proj = ops::matmul(h_t, b.W_a);
  Var scores = ops::attention_scores(proj, hbar);
  Var weights = ops::masked_softmax(scores, mask);
  return {weights, ops::attention_context(weights, hbar)};
}

struct StepOut {
  Var logits;
  std::vector<LstmState> state;
  Attn attn;
};

StepOut decoder_step(Graph& g, const Bound& b, std::span<const int> prev,
                     const std::vector<LstmState>& state, const std::vector<Var>& hbar,
                     const std::vector<char>& mask, Rng& rng, bool training) {
  Model& m = *b.model;
  const double p = m.config.dropout_p;
  Var x = ops::embedding(g, m.params.tgt_embed, prev);
  StepOut out;
  for (std::size_t l = 0; l < b.dec.size(); ++l) {
    LstmState s = lstm_step(b.dec[l], x, state[l]);
    out.state.push_back(s);
    x = s.h;
    if (l + 1 < b.dec.size()) x = ops::dropout(x, p, rng, training);
  }
  out.attn = attend_vars(b, x, hbar, mask);
  Var attentional = ops::tanh(ops::matmul(ops::concat_cols(out.attn.context, x), b.W_c));
  attentional = ops::dropout(attentional, p, rng, training);
  out.logits = ops::add_bias(ops::matmul(attentional, b.W_out), b.b_out);
  return out;
}

std::vector<Var> embed_batch(Graph& g, Model& m, const std::vector<std::vector<int>>& src,
                             const std::vector<std::vector<int>>& features) {
  const bool feat = m.config.mode == Mode::feature;
  std::vector<Var> inputs;
  for (std::size_t t = 0; t < src.size(); ++t) {
    Var w = ops::embedding(g, m.params.src_embed, src[t]);
    if (feat) {
      for (int f : features[t]) m.config.tags.name(f);
      w = ops::concat_cols(w, ops::embedding(g, m.params.feat_embed, features[t]));
    }
    inputs.push_back(w);
  }
  return inputs;
}

// The tensor-level API runs on gradient-free graphs, which never write to
// the parameters they read.
Model& mutable_view(const Model& m) { return const_cast<Model&>(m); }

std::vector<Var> constants(Graph& g, const std::vector<Tensor>& ts) {
  std::vector<Var> out;
  for (const auto& t : ts) out.push_back(g.constant(t));
  return out;
}

}  // namespace

void ModelConfig::validate() const {
  if (word_dim == 0 || hidden_dim == 0 || num_layers == 0) {
    throw ConfigError("word_dim, hidden_dim and num_layers must be positive");
  }
  if ((mode == Mode::feature) != (feature_dim > 0)) {
    throw ConfigError("feature_dim must be positive in feature mode and zero otherwise");
  }
  if (mode == Mode::feature && tags.empty()) throw ConfigError("feature mode needs domain tags");
  if (!(dropout_p >= 0.0 && dropout_p < 1.0)) throw ConfigError("dropout_p must lie in [0, 1)");
  if (vocab.size() <= Vocabulary::kNumReserved) throw ConfigError("vocabulary holds no words");
  if (max_decode_len == 0) throw ConfigError("max_decode_len must be positive");
}

ModelParams ModelParams::shaped_for(const ModelConfig& c) {
  c.validate();
  const std::size_t V = c.vocab.size();
  const std::size_t h = c.hidden_dim;
  ModelParams p;
  p.src_embed = Parameter("src_embed", V, c.word_dim);
  p.tgt_embed = Parameter("tgt_embed", V, c.word_dim);
  if (c.mode == Mode::feature) p.feat_embed = Parameter("feat_embed", c.tags.size(), c.feature_dim);
  for (std::size_t l = 0; l < c.num_layers; ++l) {
    const std::size_t in = l == 0 ? c.encoder_input_dim() : h;
    p.enc_fwd.emplace_back("enc_fwd." + std::to_string(l), in, h);
    p.enc_bwd.emplace_back("enc_bwd." + std::to_string(l), in, h);
    p.dec.emplace_back("dec." + std::to_string(l), l == 0 ? c.word_dim : h, h);
  }
  p.W_a = Parameter("W_a", h, h);
  p.W_c = Parameter("W_c", 2 * h, h);
  p.W_out = Parameter("W_out", h, V);
  p.b_out = Parameter("b_out", 1, V);
  return p;
}

void ModelParams::init(Rng& rng, double range) {
  src_embed.init_uniform(rng, range);
  tgt_embed.init_uniform(rng, range);
  if (!feat_embed.value.empty()) feat_embed.init_uniform(rng, range);
  for (auto* stack : {&enc_fwd, &enc_bwd, &dec})
    for (auto& cell : *stack) cell.init(rng, range);
  W_a.init_uniform(rng, range);
  W_c.init_uniform(rng, range);
  W_out.init_uniform(rng, range);
  b_out.value.fill(0.0);
}

std::vector<Parameter*> ModelParams::all() {
  std::vector<Parameter*> out{&src_embed, &tgt_embed};
  if (!feat_embed.name.empty()) out.push_back(&feat_embed);
  for (auto* stack : {&enc_fwd, &enc_bwd, &dec})
    for (auto& cell : *stack)
      for (Parameter* p : cell.params()) out.push_back(p);
  for (Parameter* p : {&W_a, &W_c, &W_out, &b_out}) out.push_back(p);
  return out;
}

std::vector<const Parameter*> ModelParams::all() const {
  auto ptrs = const_cast<ModelParams*>(this)->all();
  return {ptrs.begin(), ptrs.end()};
}

Model Model::create(ModelConfig config, std::uint64_t seed) {
  Model m{std::move(config), {}};
  m.params = ModelParams::shaped_for(m.config);
  Rng rng(seed);
  m.params.init(rng);
  return m;
}

std::vector<Tensor> embed_source(const Model& model, std::span<const int> src,
                                 std::span<const int> features) {
  if (model.config.mode == Mode::feature && features.size() != src.size()) {
    throw AnnotationError("feature sequence of length " + std::to_string(features.size()) +
                          " for a source of length " + std::to_string(src.size()));
  }
  Graph g(false);
  Model& m = mutable_view(model);
  std::vector<std::vector<int>> s, f;
  for (std::size_t t = 0; t < src.size(); ++t) {
    s.push_back({src[t]});
    f.push_back({model.config.mode == Mode::feature ? features[t] : 0});
  }
  std::vector<Tensor> out;
  for (Var v : embed_batch(g, m, s, f)) out.push_back(v.value());
  return out;
}

EncoderOutputs encode(const Model& model, const std::vector<Tensor>& inputs, Rng& rng,
                      bool training) {
  if (inputs.empty()) throw InputError("encode: empty source sequence");
  Graph g(false);
  Bound b = bind_model(g, mutable_view(model));
  Encoded enc = run_encoder(g, b, constants(g, inputs), nullptr, rng, training);
  EncoderOutputs out;
  for (std::size_t t = 0; t < inputs.size(); ++t) {
    out.hbar.push_back(enc.hbar[t].value());
    out.fwd_out.push_back(enc.fwd_top[t].value());
    out.bwd_out.push_back(enc.bwd_top[t].value());
  }
  for (const auto& s : enc.init) {
    out.final_h.push_back(s.h.value());
    out.final_c.push_back(s.c.value());
  }
  return out;
}

AttentionResult attend(const Model& model, const Tensor& h_t, const EncoderOutputs& enc) {
  if (enc.hbar.empty()) throw InputError("attend: empty encoder outputs");
  Graph g(false);
  Bound b = bind_model(g, mutable_view(model));
  Attn a = attend_vars(b, g.constant(h_t), constants(g, enc.hbar), {});
  return {a.weights.value(), a.context.value()};
}

DecoderState initial_state(const EncoderOutputs& enc) { return {enc.final_h, enc.final_c}; }

std::pair<Tensor, DecoderState> decode_step(const Model& model, int prev_token,
                                            const DecoderState& state, const EncoderOutputs& enc,
                                            Rng& rng, bool training) {
  if (!state.initialized() || state.h.size() != model.config.num_layers) {
    throw UsageError("decode_step called with an uninitialized decoder state");
  }
  Graph g(false);
  Bound b = bind_model(g, mutable_view(model));
  std::vector<LstmState> s;
  for (std::size_t l = 0; l < state.h.size(); ++l) {
    s.push_back({g.constant(state.h[l]), g.constant(state.c[l])});
  }
  const int prev[] = {prev_token};
  StepOut step = decoder_step(g, b, prev, s, constants(g, enc.hbar), {}, rng, training);
  DecoderState next;
  for (const auto& ls : step.state) {
    next.h.push_back(ls.h.value());
    next.c.push_back(ls.c.value());
  }
  return {softmax(step.logits.value()), std::move(next)};
}

std::vector<int> greedy_decode(const Model& model, std::span<const int> src_words,
                               std::optional<int> domain) {
  if (src_words.empty()) throw InputError("greedy_decode: empty source sentence");
  const ModelConfig& c = model.config;
  FramedSource framed = frame_source(src_words, domain, c.mode, c.vocab, c.tags);
  Graph g(false);
  Model& m = mutable_view(model);
  Bound b = bind_model(g, m);
  std::vector<std::vector<int>> s, f;
  for (std::size_t t = 0; t < framed.ids.size(); ++t) {
    s.push_back({framed.ids[t]});
    f.push_back({framed.features.empty() ? 0 : framed.features[t]});
  }
  Rng unused(0);
  Encoded enc = run_encoder(g, b, embed_batch(g, m, s, f), nullptr, unused, false);
  std::vector<LstmState> state = enc.init;
  std::vector<int> out;
  int prev = Vocabulary::kBos;
  for (std::size_t step = 0; step < c.max_decode_len; ++step) {
    const int p[] = {prev};
    StepOut o = decoder_step(g, b, p, state, enc.hbar, {}, unused, false);
    const int next = static_cast<int>(argmax(o.logits.value()));
    if (next == Vocabulary::kEos) break;
    if (next != Vocabulary::kPad && next != Vocabulary::kBos) out.push_back(next);
    state = std::move(o.state);
    prev = next;
  }
  return out;
}

Batch make_batch(std::span<const AnnotatedPair* const> pairs, Mode mode) {
  Batch b;
  b.size = pairs.size();
  for (const auto* p : pairs) {
    b.src_len = std::max(b.src_len, p->src.size());
    b.tgt_len = std::max(b.tgt_len, p->tgt.size());
  }
  b.src.assign(b.src_len, std::vector<int>(b.size, Vocabulary::kPad));
  b.features.assign(b.src_len, std::vector<int>(b.size, 0));
  b.src_mask.assign(b.src_len, std::vector<char>(b.size, 0));
  b.tgt_in.assign(b.tgt_len, std::vector<int>(b.size, Vocabulary::kPad));
  b.tgt_out.assign(b.tgt_len, std::vector<int>(b.size, Vocabulary::kPad));
  b.tgt_weight.assign(b.tgt_len, std::vector<double>(b.size, 0.0));
  for (std::size_t r = 0; r < b.size; ++r) {
    const AnnotatedPair& p = *pairs[r];
    if (mode == Mode::feature && p.src_features.size() != p.src.size()) {
      throw AnnotationError("feature-mode pair without one feature per source token");
    }
    for (std::size_t t = 0; t < p.src.size(); ++t) {
      b.src[t][r] = p.src[t];
      b.src_mask[t][r] = 1;
      if (mode == Mode::feature) b.features[t][r] = p.src_features[t];
    }
    for (std::size_t t = 0; t < p.tgt.size(); ++t) {
      b.tgt_in[t][r] = t == 0 ? Vocabulary::kBos : p.tgt[t - 1];
      b.tgt_out[t][r] = p.tgt[t];
      b.tgt_weight[t][r] = 1.0;
      ++b.num_target_tokens;
    }
  }
  return b;
}

Var batch_loss(Graph& g, Model& model, const Batch& batch, Rng& rng, bool training) {
  Bound b = bind_model(g, model);
  std::vector<Var> inputs = embed_batch(g, model, batch.src, batch.features);
  Encoded enc = run_encoder(g, b, inputs, &batch.src_mask, rng, training);
  std::vector<LstmState> state = enc.init;
  Var total;
  for (std::size_t t = 0; t < batch.tgt_len; ++t) {
    StepOut o = decoder_step(g, b, batch.tgt_in[t], state, enc.hbar, enc.attn_mask, rng, training);
    Var ce = ops::cross_entropy(o.logits, batch.tgt_out[t], batch.tgt_weight[t]);
    total = total.valid() ? ops::add(total, ce) : ce;
    state = std::move(o.state);
  }
  return total;
}

void save_model(const Model& model, std::ostream& os) {
  const ModelConfig& c = model.config;
  BinaryWriter w(os);
  write_header(w, kMagic, kVersion);
  w.u32(static_cast<std::uint32_t>(c.word_dim));
  w.u32(static_cast<std::uint32_t>(c.feature_dim));
  w.u32(static_cast<std::uint32_t>(c.hidden_dim));
  w.u32(static_cast<std::uint32_t>(c.num_layers));
  w.u32(static_cast<std::uint32_t>(c.mode));
  w.f64(c.dropout_p);
  w.u32(static_cast<std::uint32_t>(c.max_decode_len));
  w.u32(static_cast<std::uint32_t>(c.vocab.size()));
  for (std::size_t i = 0; i < c.vocab.size(); ++i) {
    w.string(c.vocab.tokens()[i]);
    w.u8(c.vocab.is_tag_symbol(static_cast<int>(i)) ? 1 : 0);
  }
  w.u32(static_cast<std::uint32_t>(c.tags.size()));
  for (const auto& n : c.tags.names()) w.string(n);
  write_tensors(w, model.params.all());
  if (!os) throw InputError("failed writing model");
}

void save_model(const Model& model, const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw InputError("cannot write model " + path.string());
  save_model(model, os);
}

Model load_model(std::istream& is) {
  BinaryReader r(is);
  read_header(r, kMagic, kVersion);
  ModelConfig c;
  c.word_dim = r.u32("config word_dim");
  c.feature_dim = r.u32("config feature_dim");
  c.hidden_dim = r.u32("config hidden_dim");
  c.num_layers = r.u32("config num_layers");
  const std::uint32_t mode = r.u32("config mode");
  if (mode > static_cast<std::uint32_t>(Mode::feature)) throw CorruptionError("bad mode in config");
  c.mode = static_cast<Mode>(mode);
  c.dropout_p = r.f64("config dropout_p");
  c.max_decode_len = r.u32("config max_decode_len");
  const std::uint32_t vsize = r.u32("vocabulary size");
  std::vector<std::string> tokens;
  std::vector<char> is_tag;
  for (std::uint32_t i = 0; i < vsize; ++i) {
    tokens.push_back(r.string("vocabulary"));
    is_tag.push_back(static_cast<char>(r.u8("vocabulary")));
  }
  Vocabulary vocab = Vocabulary::from_tokens(tokens);
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (is_tag[i] != vocab.is_tag_symbol(static_cast<int>(i))) {
      throw CorruptionError("vocabulary tag flags disagree with token '" + tokens[i] + "'");
    }
  }
  c.vocab = std::move(vocab);
  const std::uint32_t ntags = r.u32("tag count");
  std::vector<std::string> names;
  for (std::uint32_t i = 0; i < ntags; ++i) names.push_back(r.string("tag table"));
  c.tags = DomainTagSet(names);
  c.validate();
  Model m{std::move(c), {}};
  m.params = ModelParams::shaped_for(m.config);
  read_tensors_into(r, m.params.all());
  if (!r.at_end()) throw CorruptionError("trailing bytes after the last tensor");
  return m;
}

Model load_model(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw InputError("cannot read model " + path.string());
  return load_model(is);
}

}  // namespace dcnmt
