#include "dcnmt/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>

#include "dcnmt/error.hpp"

namespace dcnmt {

namespace {

std::size_t lexicon_domain(const AmbiguousLexicon& lexicon, const std::string& name) {
  auto it = std::find(lexicon.domains.begin(), lexicon.domains.end(), name);
  if (it == lexicon.domains.end()) throw TagError("domain '" + name + "' is not in the lexicon");
  return static_cast<std::size_t>(it - lexicon.domains.begin());
}

std::string system_label(Mode m) {
  switch (m) {
    case Mode::single: return "Single";
    case Mode::join: return "Join";
    case Mode::token: return "Token";
    case Mode::feature: return "Feature";
  }
  return "?";
}

struct DomainSlice {
  std::vector<Sentence> sources;
  std::vector<Sentence> references;
};

std::vector<DomainSlice> slice_by_domain(std::span<const LabeledPair> test,
                                         const std::vector<std::string>& domains) {
  std::vector<DomainSlice> slices(domains.size());
  for (const auto& p : test) {
    auto it = std::find(domains.begin(), domains.end(), DomainTagSet::bare_name(p.domain));
    if (it == domains.end()) throw TagError("test sentence labeled with unknown domain '" + p.domain + "'");
    auto& s = slices[static_cast<std::size_t>(it - domains.begin())];
    s.sources.push_back(p.src);
    s.references.push_back(p.tgt);
  }
  return slices;
}

CellResult score(const std::vector<Sentence>& hyps, const std::vector<Sentence>& refs,
                 const AmbiguousLexicon* lexicon, const std::string& true_domain) {
  CellResult r;
  r.bleu = bleu(hyps, refs);
  if (lexicon) {
    std::vector<int> d(hyps.size(), static_cast<int>(lexicon_domain(*lexicon, true_domain)));
    r.ambiguous = ambiguous_accuracy(hyps, refs, *lexicon, d);
  }
  return r;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace

AmbiguousScore ambiguous_accuracy(std::span<const Sentence> hypotheses,
                                  std::span<const Sentence> references,
                                  const AmbiguousLexicon& lexicon, std::span<const int> domains) {
  if (hypotheses.size() != references.size() || hypotheses.size() != domains.size()) {
    throw InputError("ambiguous_accuracy: hypotheses, references and domains differ in count");
  }
  AmbiguousScore score;
  for (std::size_t i = 0; i < hypotheses.size(); ++i) {
    for (const auto& [word, variants] : lexicon.variants) {
      const auto d = static_cast<std::size_t>(domains[i]);
      if (domains[i] < 0 || d >= variants.size()) throw TagError("domain id outside the lexicon");
      const std::string& expected = variants[d];
      const auto in_ref = static_cast<std::size_t>(
          std::count(references[i].begin(), references[i].end(), expected));
      const auto in_hyp = static_cast<std::size_t>(
          std::count(hypotheses[i].begin(), hypotheses[i].end(), expected));
      score.occurrences += in_ref;
      score.hits += std::min(in_ref, in_hyp);
    }
  }
  return score;
}

std::string Cell::label() const {
  std::string out = system_label(system);
  if (condition == Condition::oracle) out += "(Oracle)";
  if (condition == Condition::rnn) out += "(RNN)";
  return out;
}

Cell parse_cell(std::string_view text) {
  const auto dash = text.find('-');
  const std::string_view sys = text.substr(0, dash);
  Cell cell;
  try {
    cell.system = parse_mode(sys);
  } catch (const ModeError&) {
    throw ConfigError("unknown experiment cell '" + std::string(text) + "'");
  }
  if (dash == std::string_view::npos) {
    if (uses_domain(cell.system)) cell.condition = Condition::oracle;
    return cell;
  }
  const std::string_view cond = text.substr(dash + 1);
  if (!uses_domain(cell.system)) {
    throw ConfigError("cell '" + std::string(text) + "': only token and feature take a condition");
  }
  if (cond == "oracle") {
    cell.condition = Condition::oracle;
  } else if (cond == "rnn") {
    cell.condition = Condition::rnn;
  } else {
    throw ConfigError("unknown condition in cell '" + std::string(text) + "'");
  }
  return cell;
}

const CellResult& ExperimentTable::at(std::string_view domain, const Cell& cell) const {
  auto d = std::find(domains.begin(), domains.end(), domain);
  auto c = std::find(cells.begin(), cells.end(), cell);
  if (d == domains.end() || c == cells.end()) throw InputError("no such table entry");
  return results[static_cast<std::size_t>(d - domains.begin())][static_cast<std::size_t>(c - cells.begin())];
}

void ExperimentTable::write_tsv(std::ostream& os) const {
  const auto precision = os.precision();
  os << "domain\tmetric";
  for (const auto& c : cells) os << '\t' << c.label();
  os << '\n' << std::fixed;
  for (std::size_t d = 0; d < domains.size(); ++d) {
    os << domains[d] << "\tbleu";
    for (const auto& r : results[d]) os << '\t' << std::setprecision(2) << 100.0 * r.bleu.bleu;
    os << '\n';
    const bool has_amb = std::any_of(results[d].begin(), results[d].end(),
                                     [](const CellResult& r) { return r.ambiguous.has_value(); });
    if (has_amb) {
      os << domains[d] << "\tamb_acc";
      for (const auto& r : results[d]) {
        os << '\t';
        if (r.ambiguous) os << std::setprecision(4) << r.ambiguous->accuracy();
      }
      os << '\n';
    }
    if (classifier) {
      os << domains[d] << "\tcls_acc";
      for (std::size_t c = 0; c < cells.size(); ++c) {
        os << '\t';
        if (cells[c].condition == Condition::rnn) os << std::setprecision(2) << classifier->recall[d];
      }
      os << '\n';
    }
  }
  os.unsetf(std::ios::floatfield);
  os.precision(precision);
}

ExperimentTable run_experiment(const ExperimentSpec& spec, const ModelSet& models) {
  if (!spec.bpe) throw ConfigError("experiment needs a BPE model");
  if (spec.domains.empty()) throw ConfigError("experiment needs at least one domain");
  if (spec.cells.empty()) throw ConfigError("experiment needs at least one cell");

  // Resolve every model up front so a missing one fails before any work.
  auto model_for = [&](const Cell& cell, const std::string& domain) -> const Model& {
    const Model* m = nullptr;
    switch (cell.system) {
      case Mode::single: {
        auto it = models.single.find(domain);
        if (it != models.single.end()) m = it->second;
        break;
      }
      case Mode::join: m = models.join; break;
      case Mode::token: m = models.token; break;
      case Mode::feature: m = models.feature; break;
    }
    if (!m) throw ConfigError("missing model for cell " + cell.label() + " on domain " + domain);
    if (m->config.mode != cell.system) {
      throw ConfigError("model for cell " + cell.label() + " was trained in " +
                        std::string(to_string(m->config.mode)) + " mode");
    }
    return *m;
  };
  bool needs_classifier = false;
  for (const auto& cell : spec.cells) {
    for (const auto& d : spec.domains) model_for(cell, d);
    if (cell.condition == Condition::rnn) needs_classifier = true;
  }
  if (needs_classifier && !models.classifier) {
    throw ConfigError("missing classifier for the RNN cells");
  }

  const auto slices = slice_by_domain(spec.test, spec.domains);
  ExperimentTable table;
  table.domains = spec.domains;
  table.cells = spec.cells;
  table.results.assign(spec.domains.size(), std::vector<CellResult>(spec.cells.size()));

  // Predicted tag names per domain slice, shared by all RNN cells.
  std::vector<std::vector<std::string>> predicted(spec.domains.size());
  if (needs_classifier) {
    const Classifier& clf = *models.classifier;
    std::vector<int> pred, gold;
    for (std::size_t d = 0; d < spec.domains.size(); ++d) {
      const int gold_id = clf.tags.id_of(spec.domains[d]);
      for (const auto& src : slices[d].sources) {
        const int tag = classify(clf, encode_words(*spec.bpe, clf.vocab, src)).tag;
        predicted[d].push_back(clf.tags.name(tag));
        pred.push_back(tag);
        gold.push_back(gold_id);
      }
    }
    table.classifier = evaluate_predictions(pred, gold, clf.tags.size());
    // Recall is reported per experiment domain, in experiment order.
    std::vector<double> recall;
    for (const auto& d : spec.domains) recall.push_back(table.classifier->recall[static_cast<std::size_t>(clf.tags.id_of(d))]);
    table.classifier->recall = std::move(recall);
  }

  for (std::size_t d = 0; d < spec.domains.size(); ++d) {
    const std::string& domain = spec.domains[d];
    for (std::size_t c = 0; c < spec.cells.size(); ++c) {
      const Cell& cell = spec.cells[c];
      const Model& model = model_for(cell, domain);
      std::vector<Sentence> hyps;
      for (std::size_t i = 0; i < slices[d].sources.size(); ++i) {
        std::optional<int> tag;
        if (cell.condition == Condition::oracle) tag = model.config.tags.id_of(domain);
        if (cell.condition == Condition::rnn) tag = model.config.tags.id_of(predicted[d][i]);
        hyps.push_back(translate_words(model, *spec.bpe, slices[d].sources[i], tag));
      }
      table.results[d][c] = score(hyps, slices[d].references, spec.lexicon, domain);
    }
  }
  return table;
}

void CrossDomainMatrix::write_tsv(std::ostream& os) const {
  const auto precision = os.precision();
  os << "row_domain\tcol_tag\tbleu\n" << std::fixed << std::setprecision(2);
  for (std::size_t r = 0; r < domains.size(); ++r) {
    for (std::size_t c = 0; c < domains.size(); ++c) {
      os << domains[r] << '\t' << DomainTagSet::surface_form(domains[c]) << '\t' << 100.0 * bleu[r][c] << '\n';
    }
  }
  os.unsetf(std::ios::floatfield);
  os.precision(precision);
}

CrossDomainMatrix cross_domain_matrix(const Model& model, const BpeModel& bpe,
                                      std::span<const LabeledPair> test,
                                      const AmbiguousLexicon* lexicon) {
  if (model.config.mode != Mode::feature) {
    throw ModeError("cross-domain matrix needs a feature-mode model, got " +
                    std::string(to_string(model.config.mode)));
  }
  CrossDomainMatrix m;
  m.domains = model.config.tags.names();
  const std::size_t K = m.domains.size();
  const auto slices = slice_by_domain(test, m.domains);
  m.bleu.assign(K, std::vector<double>(K, 0.0));
  m.ambiguous.assign(K, std::vector<std::optional<double>>(K));
  for (std::size_t r = 0; r < K; ++r) {
    for (std::size_t c = 0; c < K; ++c) {
      std::vector<Sentence> hyps;
      for (const auto& src : slices[r].sources) {
        hyps.push_back(translate_words(model, bpe, src, static_cast<int>(c)));
      }
      const CellResult res = score(hyps, slices[r].references, lexicon, m.domains[r]);
      m.bleu[r][c] = res.bleu.bleu;
      if (res.ambiguous) m.ambiguous[r][c] = res.ambiguous->accuracy();
    }
  }
  return m;
}

BenchmarkConfig default_benchmark_config() {
  BenchmarkConfig cfg;
  cfg.num_layers = 1;
  cfg.train.batch_size = 8;
  cfg.train.epochs = 10;
  cfg.train.decay_start_epoch = 8;
  cfg.classifier_train.batch_size = 32;
  cfg.classifier_train.epochs = 5;
  cfg.classifier_train.decay_start_epoch = 3;
  cfg.cells = {parse_cell("single"),        parse_cell("join"),
               parse_cell("token-oracle"),  parse_cell("token-rnn"),
               parse_cell("feature-oracle"), parse_cell("feature-rnn")};
  return cfg;
}

BenchmarkResult run_benchmark(const BenchmarkConfig& config) {
  BenchmarkResult out;
  std::ostream* log = config.log;
  auto stage = [&](const std::string& name, auto&& fn) {
    const auto t0 = std::chrono::steady_clock::now();
    if (log) *log << "[" << name << "] start\n" << std::flush;
    fn();
    out.seconds[name] = seconds_since(t0);
    if (log) {
      std::ostringstream line;
      line << "[" << name << "] " << std::fixed << std::setprecision(1) << out.seconds[name] << " s\n";
      *log << line.str() << std::flush;
    }
  };

  stage("corpus", [&] { out.corpus = generate(config.corpus); });
  stage("bpe", [&] { out.pipeline = build_pipeline(out.corpus.train, config.bpe_merges, config.max_vocab); });
  const auto subword_train = apply_bpe(out.corpus.train, out.pipeline.bpe);
  const DomainTagSet& tags = out.pipeline.tags;

  auto model_config = [&](Mode mode) {
    ModelConfig mc;
    mc.word_dim = config.word_dim;
    mc.hidden_dim = config.hidden_dim;
    mc.num_layers = config.num_layers;
    mc.feature_dim = mode == Mode::feature ? config.feature_dim : 0;
    mc.dropout_p = config.dropout_p;
    mc.mode = mode;
    mc.tags = tags;
    mc.vocab = vocab_for_mode(out.pipeline.vocab, tags, mode);
    return mc;
  };
  auto fit = [&](Mode mode, std::span<const LabeledPair> pairs, const std::string& name) {
    ModelConfig mc = model_config(mode);
    const auto data = prepare_pairs(pairs, mode, mc.vocab, tags);
    Model model = Model::create(std::move(mc), config.train.seed);
    TrainConfig tc = config.train;
    if (mode == Mode::single && config.scale_single_batch) {
      const std::size_t k = out.corpus.domains.size();
      tc.batch_size = std::max<std::size_t>(1, (tc.batch_size + k - 1) / k);
    }
    tc.progress = log;
    if (!config.work_dir.empty()) tc.checkpoint_dir = config.work_dir / ("ckpt_" + name);
    train(model, data, tc);
    if (!config.work_dir.empty()) save_model(model, config.work_dir / (name + ".bin"));
    return model;
  };

  auto wants = [&](Mode m) {
    return std::any_of(config.cells.begin(), config.cells.end(), [&](const Cell& c) { return c.system == m; });
  };
  const bool wants_rnn = std::any_of(config.cells.begin(), config.cells.end(),
                                     [](const Cell& c) { return c.condition == Condition::rnn; });

  if (wants(Mode::single)) {
    for (const auto& domain : out.corpus.domains) {
      std::vector<LabeledPair> subset;
      for (const auto& p : subword_train)
        if (p.domain == domain) subset.push_back(p);
      stage("single-" + domain, [&] { out.single.emplace(domain, fit(Mode::single, subset, "single_" + domain)); });
    }
  }
  if (wants(Mode::join)) stage("join", [&] { out.join = fit(Mode::join, subword_train, "join"); });
  if (wants(Mode::token)) stage("token", [&] { out.token = fit(Mode::token, subword_train, "token"); });
  if (wants(Mode::feature)) stage("feature", [&] { out.feature = fit(Mode::feature, subword_train, "feature"); });

  if (wants_rnn) {
    stage("classifier", [&] {
      std::vector<LabeledIds> data;
      for (const auto& p : subword_train) data.push_back({out.pipeline.vocab.encode(p.src), tags.id_of(p.domain)});
      TrainConfig tc = config.classifier_train;
      tc.progress = log;
      out.classifier = train_classifier(data, out.pipeline.vocab, tags, config.classifier, tc);
      std::vector<LabeledIds> test;
      for (const auto& p : out.corpus.test) {
        test.push_back({encode_words(out.pipeline.bpe, out.pipeline.vocab, p.src), tags.id_of(p.domain)});
      }
      out.classifier_eval = evaluate_classifier(*out.classifier, test);
      if (!config.work_dir.empty()) save_classifier(*out.classifier, config.work_dir / "classifier.bin");
    });
  }

  ModelSet models;
  for (const auto& [d, m] : out.single) models.single[d] = &m;
  if (out.join) models.join = &*out.join;
  if (out.token) models.token = &*out.token;
  if (out.feature) models.feature = &*out.feature;
  if (out.classifier) models.classifier = &*out.classifier;

  ExperimentSpec spec;
  spec.domains = out.corpus.domains;
  spec.test = out.corpus.test;
  spec.bpe = &out.pipeline.bpe;
  spec.lexicon = &out.corpus.lexicon;
  spec.cells = config.cells;
  stage("experiment", [&] { out.table = run_experiment(spec, models); });
  if (out.feature) {
    stage("cross-matrix", [&] {
      out.matrix = cross_domain_matrix(*out.feature, out.pipeline.bpe, out.corpus.test, &out.corpus.lexicon);
    });
  }

  if (!config.work_dir.empty()) {
    write_corpus(out.corpus, config.work_dir / "corpus");
    out.pipeline.bpe.save(config.work_dir / "bpe.codes");
    out.pipeline.vocab.save(config.work_dir / "vocab.txt");
    std::ofstream table(config.work_dir / "experiment.tsv");
    out.table.write_tsv(table);
    if (out.matrix) {
      std::ofstream matrix(config.work_dir / "cross_matrix.tsv");
      out.matrix->write_tsv(matrix);
    }
  }
  return out;
}

}  // namespace dcnmt
