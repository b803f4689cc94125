#include "dcnmt/classifier.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <set>

#include "dcnmt/error.hpp"
#include "dcnmt/serialize.hpp"

namespace dcnmt {

namespace {

constexpr std::string_view kMagic = "DCCLS";
constexpr std::uint32_t kVersion = 1;

void shape(Classifier& c) {
  const std::size_t V = c.vocab.size();
  const std::size_t K = c.tags.size();
  if (c.config.embed_dim == 0 || c.config.hidden_dim == 0 || c.config.num_layers == 0) {
    throw ConfigError("classifier dimensions must be positive");
  }
  if (K == 0) throw ConfigError("classifier needs at least one domain");
  c.embed = Parameter("cls.embed", V, c.config.embed_dim);
  c.rnn.clear();
  for (std::size_t l = 0; l < c.config.num_layers; ++l) {
    c.rnn.emplace_back("cls.rnn." + std::to_string(l), l == 0 ? c.config.embed_dim : c.config.hidden_dim,
                       c.config.hidden_dim);
  }
  c.W_cls = Parameter("cls.W_cls", c.config.hidden_dim, K);
}

// Final top-layer hidden state per sentence; padded steps keep the state.
Var final_hidden(Graph& g, Classifier& clf, std::span<const LabeledIds* const> batch) {
  const std::size_t B = batch.size();
  std::size_t T = 0;
  for (const auto* s : batch) {
    if (s->ids.empty()) throw InputError("classify: empty sentence");
    T = std::max(T, s->ids.size());
  }
  std::vector<BoundLstm> cells;
  for (auto& cell : clf.rnn) cells.push_back(bind(g, cell));
  std::vector<Var> inputs;
  std::vector<std::vector<char>> masks;
  for (std::size_t t = 0; t < T; ++t) {
    std::vector<int> ids(B, Vocabulary::kPad);
    std::vector<char> mask(B, 0);
    for (std::size_t r = 0; r < B; ++r) {
      if (t < batch[r]->ids.size()) {
        ids[r] = batch[r]->ids[t];
        mask[r] = 1;
      }
    }
    inputs.push_back(ops::embedding(g, clf.embed, ids));
    masks.push_back(std::move(mask));
  }
  Var top;
  for (std::size_t l = 0; l < cells.size(); ++l) {
    const std::size_t h = clf.config.hidden_dim;
    LstmState state{g.constant(Tensor(B, h)), g.constant(Tensor(B, h))};
    for (std::size_t t = 0; t < T; ++t) {
      LstmState next = lstm_step(cells[l], inputs[t], state);
      if (std::find(masks[t].begin(), masks[t].end(), 0) != masks[t].end()) {
        next.h = ops::where_rows(masks[t], next.h, state.h);
        next.c = ops::where_rows(masks[t], next.c, state.c);
      }
      state = next;
      inputs[t] = state.h;
    }
    top = state.h;
  }
  return top;
}

}  // namespace

Classifier Classifier::create(ClassifierConfig config, Vocabulary vocab, DomainTagSet tags,
                              std::uint64_t seed) {
  Classifier c{config, std::move(vocab), std::move(tags), {}, {}, {}};
  shape(c);
  Rng rng(seed);
  c.embed.init_uniform(rng, 0.1);
  for (auto& cell : c.rnn) cell.init(rng, 0.1);
  c.W_cls.init_uniform(rng, 0.1);
  return c;
}

std::vector<Parameter*> Classifier::params() {
  std::vector<Parameter*> out{&embed};
  for (auto& cell : rnn)
    for (Parameter* p : cell.params()) out.push_back(p);
  out.push_back(&W_cls);
  return out;
}

std::vector<const Parameter*> Classifier::params() const {
  auto ptrs = const_cast<Classifier*>(this)->params();
  return {ptrs.begin(), ptrs.end()};
}

Classification classify(const Classifier& clf, std::span<const int> ids) {
  if (ids.empty()) throw InputError("classify: empty sentence");
  Graph g(false);
  // Read-only: a gradient-free graph never writes to the parameters.
  Classifier& c = const_cast<Classifier&>(clf);
  LabeledIds s{std::vector<int>(ids.begin(), ids.end()), 0};
  const LabeledIds* batch[] = {&s};
  Var h = final_hidden(g, c, batch);
  Var logits = ops::matmul(h, g.param(c.W_cls));
  Classification out;
  out.posterior = softmax(logits.value());
  out.tag = static_cast<int>(argmax(out.posterior));
  return out;
}

Var classifier_loss(Graph& g, Classifier& clf, std::span<const LabeledIds* const> batch) {
  Var h = final_hidden(g, clf, batch);
  Var logits = ops::matmul(h, g.param(clf.W_cls));
  std::vector<int> targets;
  for (const auto* s : batch) {
    clf.tags.name(s->domain);
    targets.push_back(s->domain);
  }
  std::vector<double> weights(batch.size(), 1.0);
  return ops::cross_entropy(logits, targets, weights);
}

Classifier train_classifier(std::span<const LabeledIds> data, const Vocabulary& vocab,
                            const DomainTagSet& tags, const ClassifierConfig& config,
                            const TrainConfig& cfg, std::vector<EpochReport>* reports) {
  cfg.validate();
  std::set<int> present;
  for (const auto& s : data) present.insert(s.domain);
  if (present.size() < 2) {
    throw ConfigError("classifier training needs at least two domains, found " +
                      std::to_string(present.size()));
  }
  Classifier clf = Classifier::create(config, vocab, tags, cfg.seed);
  std::vector<Parameter*> params = clf.params();
  std::vector<std::size_t> lengths;
  for (const auto& s : data) lengths.push_back(s.ids.size());

  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    const double lr = lr_schedule(epoch, cfg);
    double total = 0.0;
    for (const auto& idx : make_batches(lengths, cfg.batch_size, epoch_shuffle_seed(cfg.seed, epoch))) {
      std::vector<const LabeledIds*> batch;
      for (std::size_t i : idx) batch.push_back(&data[i]);
      zero_grads(params);
      Graph g(true);
      Var loss = classifier_loss(g, clf, batch);
      if (!std::isfinite(loss.value()[0])) {
        throw NumericError("non-finite classifier loss at epoch " + std::to_string(epoch));
      }
      total += loss.value()[0];
      g.backward(ops::scale(loss, 1.0 / static_cast<double>(batch.size())));
      clip_grad_norm(params, cfg.gradient_clip_norm);
      sgd_update(params, lr);
    }
    EpochReport rep;
    rep.epoch = epoch;
    rep.mean_cross_entropy = total / static_cast<double>(data.size());
    rep.perplexity = std::exp(rep.mean_cross_entropy);
    rep.learning_rate = lr;
    if (reports) reports->push_back(rep);
    if (cfg.progress) {
      *cfg.progress << epoch << '\t' << rep.mean_cross_entropy << '\t' << rep.perplexity << '\t'
                    << lr << '\n';
    }
  }
  return clf;
}

ClassifierEvaluation evaluate_predictions(std::span<const int> predicted, std::span<const int> gold,
                                          std::size_t num_domains) {
  if (predicted.size() != gold.size()) throw InputError("prediction and gold counts differ");
  if (gold.empty()) throw InputError("empty classifier test set");
  ClassifierEvaluation ev;
  ev.confusion.assign(num_domains, std::vector<std::size_t>(num_domains, 0));
  for (std::size_t i = 0; i < gold.size(); ++i) {
    if (gold[i] < 0 || predicted[i] < 0 || static_cast<std::size_t>(gold[i]) >= num_domains ||
        static_cast<std::size_t>(predicted[i]) >= num_domains) {
      throw TagError("domain id outside [0, " + std::to_string(num_domains) + ")");
    }
    ++ev.confusion[static_cast<std::size_t>(gold[i])][static_cast<std::size_t>(predicted[i])];
  }
  std::size_t correct = 0;
  for (std::size_t k = 0; k < num_domains; ++k) {
    std::size_t row = 0;
    for (std::size_t v : ev.confusion[k]) row += v;
    correct += ev.confusion[k][k];
    ev.recall.push_back(row == 0 ? 0.0 : 100.0 * static_cast<double>(ev.confusion[k][k]) /
                                             static_cast<double>(row));
  }
  ev.total = gold.size();
  ev.accuracy = 100.0 * static_cast<double>(correct) / static_cast<double>(ev.total);
  return ev;
}

ClassifierEvaluation evaluate_classifier(const Classifier& clf, std::span<const LabeledIds> test) {
  std::vector<int> predicted, gold;
  for (const auto& s : test) {
    predicted.push_back(classify(clf, s.ids).tag);
    gold.push_back(s.domain);
  }
  return evaluate_predictions(predicted, gold, clf.tags.size());
}

void save_classifier(const Classifier& clf, std::ostream& os) {
  BinaryWriter w(os);
  write_header(w, kMagic, kVersion);
  w.u32(static_cast<std::uint32_t>(clf.config.embed_dim));
  w.u32(static_cast<std::uint32_t>(clf.config.hidden_dim));
  w.u32(static_cast<std::uint32_t>(clf.config.num_layers));
  w.u32(static_cast<std::uint32_t>(clf.vocab.size()));
  for (std::size_t i = 0; i < clf.vocab.size(); ++i) {
    w.string(clf.vocab.tokens()[i]);
    w.u8(clf.vocab.is_tag_symbol(static_cast<int>(i)) ? 1 : 0);
  }
  w.u32(static_cast<std::uint32_t>(clf.tags.size()));
  for (const auto& n : clf.tags.names()) w.string(n);
  write_tensors(w, clf.params());
  if (!os) throw InputError("failed writing classifier");
}

void save_classifier(const Classifier& clf, const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw InputError("cannot write classifier " + path.string());
  save_classifier(clf, os);
}

Classifier load_classifier(std::istream& is) {
  BinaryReader r(is);
  read_header(r, kMagic, kVersion);
  Classifier c;
  c.config.embed_dim = r.u32("config embed_dim");
  c.config.hidden_dim = r.u32("config hidden_dim");
  c.config.num_layers = r.u32("config num_layers");
  const std::uint32_t vsize = r.u32("vocabulary size");
  std::vector<std::string> tokens;
  for (std::uint32_t i = 0; i < vsize; ++i) {
    tokens.push_back(r.string("vocabulary"));
    r.u8("vocabulary");
  }
  c.vocab = Vocabulary::from_tokens(tokens);
  const std::uint32_t ntags = r.u32("tag count");
  std::vector<std::string> names;
  for (std::uint32_t i = 0; i < ntags; ++i) names.push_back(r.string("tag table"));
  c.tags = DomainTagSet(names);
  shape(c);
  read_tensors_into(r, c.params());
  if (!r.at_end()) throw CorruptionError("trailing bytes after the last tensor");
  return c;
}

Classifier load_classifier(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw InputError("cannot read classifier " + path.string());
  return load_classifier(is);
}

}  // namespace dcnmt
