#include <algorithm>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "dcnmt/bleu.hpp"
#include "dcnmt/classifier.hpp"
#include "dcnmt/error.hpp"
#include "dcnmt/experiment.hpp"
#include "dcnmt/pipeline.hpp"
#include "dcnmt/synthetic.hpp"
#include "dcnmt/trainer.hpp"

namespace {

using namespace dcnmt;

// Every subcommand reads `key = value` files through --config; keys are the
// long option names, unknown keys are rejected and command-line flags win.
void add_config(CLI::App& app) {
  app.set_config("--config", "", "key = value configuration file");
  app.allow_config_extras(CLI::config_extras_mode::error);
}

struct ModelFlags {
  std::size_t word_dim = 64;
  std::size_t hidden_dim = 64;
  std::size_t feature_dim = 8;
  std::size_t layers = 2;
  double dropout = 0.3;
  std::size_t max_decode_len = 100;

  void add(CLI::App& app) {
    app.add_option("--word-dim", word_dim, "word embedding size")->capture_default_str();
    app.add_option("--hidden-dim", hidden_dim, "LSTM hidden size")->capture_default_str();
    app.add_option("--feature-dim", feature_dim, "domain feature cells (feature mode)")->capture_default_str();
    app.add_option("--layers", layers, "LSTM layers per stack")->capture_default_str();
    app.add_option("--dropout", dropout, "dropout probability")->capture_default_str();
    app.add_option("--max-decode-len", max_decode_len, "decoding length limit")->capture_default_str();
  }
};

struct TrainFlags {
  TrainConfig cfg;
  std::string checkpoint_dir;

  TrainFlags(std::size_t batch, std::size_t epochs, std::size_t decay_start) {
    cfg.batch_size = batch;
    cfg.epochs = epochs;
    cfg.decay_start_epoch = decay_start;
  }
  void add(CLI::App& app) {
    app.add_option("--batch-size", cfg.batch_size, "sentences per minibatch")->capture_default_str();
    app.add_option("--epochs", cfg.epochs, "training epochs")->capture_default_str();
    app.add_option("--lr", cfg.lr0, "initial learning rate")->capture_default_str();
    app.add_option("--decay", cfg.decay_factor, "learning-rate decay factor")->capture_default_str();
    app.add_option("--decay-start", cfg.decay_start_epoch, "last epoch at the initial rate")->capture_default_str();
    app.add_option("--clip", cfg.gradient_clip_norm, "global gradient-norm clip")->capture_default_str();
    app.add_option("--seed", cfg.seed, "random seed")->capture_default_str();
  }
  TrainConfig get() const {
    TrainConfig c = cfg;
    c.checkpoint_dir = checkpoint_dir;
    c.progress = &std::cout;
    return c;
  }
};

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

DomainTagSet tags_from(const std::string& flag, std::span<const LabeledPair> data) {
  if (!flag.empty()) return DomainTagSet(split_list(flag));
  return DomainTagSet(domains_in_order(data));
}

std::vector<std::string> read_lines(std::istream& is) {
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(is, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(line);
  }
  return lines;
}

std::vector<std::string> read_lines(const std::string& path) {
  if (path == "-") return read_lines(std::cin);
  std::ifstream is(path);
  if (!is) throw InputError("cannot read " + path);
  return read_lines(is);
}

// Left-aligned first column, right-aligned remaining columns.
void print_table(std::ostream& os, const std::vector<std::vector<std::string>>& rows) {
  std::vector<std::size_t> width;
  for (const auto& r : rows)
    for (std::size_t c = 0; c < r.size(); ++c) {
      if (width.size() <= c) width.push_back(0);
      width[c] = std::max(width[c], r[c].size());
    }
  for (const auto& r : rows) {
    for (std::size_t c = 0; c < r.size(); ++c) {
      if (c == 0) {
        os << std::left << std::setw(static_cast<int>(width[c])) << r[c];
      } else {
        os << "  " << std::right << std::setw(static_cast<int>(width[c])) << r[c];
      }
    }
    os << '\n';
  }
  os << std::left;
}

std::string fmt(double v, int precision) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(precision) << v;
  return os.str();
}

void print_experiment(const ExperimentTable& table) {
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> head{"BLEU"};
  for (const auto& c : table.cells) head.push_back(c.label());
  rows.push_back(head);
  for (std::size_t d = 0; d < table.domains.size(); ++d) {
    std::vector<std::string> r{table.domains[d]};
    for (const auto& res : table.results[d]) r.push_back(fmt(100.0 * res.bleu.bleu, 2));
    rows.push_back(r);
  }
  const bool has_amb = !table.results.empty() && !table.results[0].empty() &&
                       table.results[0][0].ambiguous.has_value();
  if (has_amb) {
    head[0] = "amb. acc.";
    rows.push_back(head);
    for (std::size_t d = 0; d < table.domains.size(); ++d) {
      std::vector<std::string> r{table.domains[d]};
      for (const auto& res : table.results[d]) r.push_back(fmt(res.ambiguous->accuracy(), 3));
      rows.push_back(r);
    }
  }
  print_table(std::cout, rows);
  if (table.classifier) {
    std::cout << "classifier accuracy " << fmt(table.classifier->accuracy, 2) << "%";
    for (std::size_t d = 0; d < table.domains.size(); ++d) {
      std::cout << "  " << table.domains[d] << ' ' << fmt(table.classifier->recall[d], 2) << "%";
    }
    std::cout << '\n';
  }
}

void print_matrix(const CrossDomainMatrix& m) {
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> head{"test \\ tag"};
  for (const auto& d : m.domains) head.push_back(DomainTagSet::surface_form(d));
  rows.push_back(head);
  for (std::size_t r = 0; r < m.domains.size(); ++r) {
    std::vector<std::string> row{m.domains[r]};
    for (std::size_t c = 0; c < m.domains.size(); ++c) {
      std::string cell = fmt(100.0 * m.bleu[r][c], 2);
      if (m.ambiguous[r][c]) cell += " (" + fmt(*m.ambiguous[r][c], 2) + ")";
      row.push_back(cell);
    }
    rows.push_back(row);
  }
  print_table(std::cout, rows);
}

struct CorpusFlags {
  CorpusSpec spec;
  void add(CLI::App& app) {
    app.add_option("--domains", spec.num_domains, "number of domains")->capture_default_str();
    app.add_option("--shared-vocab", spec.shared_vocab_size, "shared words")->capture_default_str();
    app.add_option("--domain-vocab", spec.domain_vocab_size, "words per domain")->capture_default_str();
    app.add_option("--ambiguous-words", spec.ambiguous_words, "ambiguous source words")->capture_default_str();
    app.add_option("--sentences", spec.sentences_per_domain, "sentences per domain")->capture_default_str();
    app.add_option("--min-len", spec.min_length, "shortest sentence")->capture_default_str();
    app.add_option("--max-len", spec.max_length, "longest sentence")->capture_default_str();
    app.add_option("--ambiguity-prob", spec.ambiguity_prob, "chance of an ambiguous word")->capture_default_str();
    app.add_option("--domain-word-prob", spec.domain_word_prob, "chance of a domain word per position")
        ->capture_default_str();
    app.add_option("--test-fraction", spec.test_fraction, "held-out share per domain")->capture_default_str();
    app.add_option("--corpus-seed", spec.seed, "generator seed")->capture_default_str();
  }
};

int cmd_gen_corpus(CLI::App& app, std::vector<std::string> args) {
  CorpusFlags flags;
  std::string out;
  flags.add(app);
  app.add_option("--out", out, "output directory")->required();
  add_config(app);
  app.parse(args);
  const SyntheticCorpus corpus = generate(flags.spec);
  write_corpus(corpus, out);
  std::cout << "wrote " << corpus.train.size() << " training and " << corpus.test.size()
            << " test pairs to " << out << '\n';
  return 0;
}

int cmd_learn_bpe(CLI::App& app, std::vector<std::string> args) {
  std::string input, output, vocab_out;
  std::size_t merges = 500, vocab_size = 1000;
  app.add_option("--input", input, "labeled training TSV")->required();
  app.add_option("--merges", merges, "number of merge operations")->capture_default_str();
  app.add_option("--output", output, "BPE codes file")->required();
  app.add_option("--vocab-output", vocab_out, "also write the subword vocabulary");
  app.add_option("--vocab-size", vocab_size, "vocabulary limit, reserved symbols included")
      ->capture_default_str();
  add_config(app);
  app.parse(args);
  const auto train = read_labeled(input);
  const Pipeline p = build_pipeline(train, merges, vocab_size);
  p.bpe.save(output);
  if (!vocab_out.empty()) p.vocab.save(vocab_out);
  std::cout << p.bpe.merges().size() << " merges, " << p.vocab.size() << " vocabulary entries\n";
  return 0;
}

// Word vocabulary of a preprocessed corpus: tag surface forms excluded.
Vocabulary words_of(std::span<const LabeledPair> pairs, std::size_t max_size) {
  std::vector<std::vector<std::string>> sides;
  for (const auto& p : pairs) {
    std::vector<std::string> src;
    for (const auto& t : p.src)
      if (!DomainTagSet::is_surface_form(t)) src.push_back(t);
    sides.push_back(std::move(src));
    sides.push_back(p.tgt);
  }
  return Vocabulary::build(sides, max_size);
}

int cmd_preprocess(CLI::App& app, std::vector<std::string> args) {
  std::string input, output, bpe_path, mode_text = "join", tags_flag, vocab_path;
  app.add_option("--input", input, "labeled TSV of raw words")->required();
  app.add_option("--bpe", bpe_path, "BPE codes")->required();
  app.add_option("--mode", mode_text, "single, join, token or feature")->capture_default_str();
  app.add_option("--tags", tags_flag, "comma-separated domain order (default: order of appearance)");
  app.add_option("--vocab", vocab_path, "word vocabulary checked for tag collisions");
  app.add_option("--output", output, "annotated subword TSV")->required();
  add_config(app);
  app.parse(args);
  const Mode mode = parse_mode(mode_text);
  BpeModel bpe = BpeModel::load(bpe_path);
  const auto raw = read_labeled(input);
  const DomainTagSet tags = tags_from(tags_flag, raw);
  for (const auto& n : tags.names()) bpe.protect(DomainTagSet::surface_form(n));
  const auto sub = apply_bpe(raw, bpe);
  const Vocabulary words = vocab_path.empty() ? words_of(sub, 1u << 30) : Vocabulary::load(vocab_path);
  check_disjoint(words, tags);
  std::vector<LabeledPair> out;
  for (const auto& p : sub) out.push_back(annotate(p, mode, tags, words));
  write_labeled(output, out);
  return 0;
}

ModelConfig model_config(Mode mode, const ModelFlags& f, const Vocabulary& words,
                         const DomainTagSet& tags) {
  ModelConfig mc;
  mc.word_dim = f.word_dim;
  mc.hidden_dim = f.hidden_dim;
  mc.feature_dim = mode == Mode::feature ? f.feature_dim : 0;
  mc.num_layers = f.layers;
  mc.dropout_p = f.dropout;
  mc.max_decode_len = f.max_decode_len;
  mc.mode = mode;
  mc.tags = tags;
  mc.vocab = vocab_for_mode(words, tags, mode);
  return mc;
}

int cmd_train(CLI::App& app, std::vector<std::string> args) {
  std::string train_path, mode_text = "join", tags_flag, vocab_path, output, only_domain;
  std::size_t vocab_size = 1000;
  ModelFlags mf;
  TrainFlags tf(64, 18, 10);
  app.add_option("--train", train_path, "preprocessed TSV")->required();
  app.add_option("--mode", mode_text, "single, join, token or feature")->capture_default_str();
  app.add_option("--tags", tags_flag, "comma-separated domain order (default: order of appearance)");
  app.add_option("--vocab", vocab_path, "word vocabulary (default: built from the data)");
  app.add_option("--vocab-size", vocab_size, "limit when building the vocabulary")->capture_default_str();
  app.add_option("--only-domain", only_domain, "train on one domain (Single systems)");
  app.add_option("--output", output, "model file")->required();
  app.add_option("--checkpoint-dir", tf.checkpoint_dir, "per-epoch checkpoints and train_log.tsv");
  mf.add(app);
  tf.add(app);
  add_config(app);
  app.parse(args);

  const Mode mode = parse_mode(mode_text);
  auto pairs = read_labeled(train_path);
  const DomainTagSet tags = tags_from(tags_flag, pairs);
  if (!only_domain.empty()) {
    const std::string name = DomainTagSet::bare_name(only_domain);
    std::erase_if(pairs, [&](const LabeledPair& p) { return p.domain != name; });
    if (pairs.empty()) throw InputError("no training pairs for domain " + name);
  }
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const auto& p = pairs[i];
    if (mode == Mode::token &&
        (p.src.empty() || p.src.back() != DomainTagSet::surface_form(p.domain))) {
      throw AnnotationError("line " + std::to_string(i + 1) +
                            ": token-mode source does not end with its domain tag");
    }
  }
  const Vocabulary words = vocab_path.empty() ? words_of(pairs, vocab_size) : Vocabulary::load(vocab_path);
  Model model = Model::create(model_config(mode, mf, words, tags), tf.cfg.seed);
  std::vector<AnnotatedPair> data;
  for (const auto& p : pairs) data.push_back(to_annotated_pair(p, mode, model.config.vocab, tags));
  std::cout << "epoch\tcross_entropy\tperplexity\tlr\tseconds\n";
  train(model, data, tf.get());
  save_model(model, output);
  return 0;
}

int cmd_translate(CLI::App& app, std::vector<std::string> args) {
  std::string model_path, bpe_path, domain, classifier_path;
  app.add_option("--model", model_path, "model file")->required();
  app.add_option("--bpe", bpe_path, "BPE codes")->required();
  app.add_option("--domain", domain, "tag such as @MED@, or 'auto' to predict it per sentence");
  app.add_option("--classifier", classifier_path, "classifier used by --domain auto");
  add_config(app);
  app.parse(args);

  if (domain == "auto" && classifier_path.empty()) {
    throw UsageError("--domain auto needs --classifier");
  }
  const Model model = load_model(model_path);
  BpeModel bpe = BpeModel::load(bpe_path);
  const DomainTagSet& tags = model.config.tags;
  for (const auto& n : tags.names()) bpe.protect(DomainTagSet::surface_form(n));
  if (uses_domain(model.config.mode) && domain.empty()) {
    throw UsageError(std::string(to_string(model.config.mode)) + "-mode model needs --domain");
  }
  if (!uses_domain(model.config.mode) && !domain.empty()) {
    std::cerr << "warning: " << to_string(model.config.mode) << "-mode model ignores --domain\n";
  }
  std::optional<Classifier> clf;
  if (domain == "auto") clf = load_classifier(classifier_path);
  std::optional<int> fixed;
  if (!domain.empty() && domain != "auto" && uses_domain(model.config.mode)) fixed = tags.id_of(domain);

  std::string line;
  std::size_t n = 0;
  while (std::getline(std::cin, line)) {
    ++n;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto words = split_tokens(line);
    if (words.empty()) {
      std::cerr << "warning: line " << n << " is empty\n";
      std::cout << '\n';
      continue;
    }
    std::optional<int> tag = fixed;
    if (clf && uses_domain(model.config.mode)) {
      const int predicted = classify(*clf, encode_words(bpe, clf->vocab, words)).tag;
      tag = tags.id_of(clf->tags.name(predicted));
    }
    const auto out = translate_words(model, bpe, words, tag);
    std::cout << join_tokens(out) << '\n';
  }
  return 0;
}

std::vector<LabeledIds> classifier_data(std::span<const LabeledPair> pairs, const BpeModel& bpe,
                                        const Vocabulary& vocab, const DomainTagSet& tags) {
  std::vector<LabeledIds> out;
  for (const auto& p : pairs) out.push_back({encode_words(bpe, vocab, p.src), tags.id_of(p.domain)});
  return out;
}

int cmd_train_classifier(CLI::App& app, std::vector<std::string> args) {
  std::string train_path, bpe_path, vocab_path, output, tags_flag;
  std::size_t vocab_size = 1000;
  ClassifierConfig cc;
  TrainFlags tf(32, 5, 3);
  app.add_option("--train", train_path, "labeled TSV of raw words")->required();
  app.add_option("--bpe", bpe_path, "BPE codes")->required();
  app.add_option("--vocab", vocab_path, "subword vocabulary (default: built from the sources)");
  app.add_option("--vocab-size", vocab_size, "limit when building the vocabulary")->capture_default_str();
  app.add_option("--tags", tags_flag, "comma-separated domain order (default: order of appearance)");
  app.add_option("--output", output, "classifier file")->required();
  app.add_option("--embed-dim", cc.embed_dim, "embedding size")->capture_default_str();
  app.add_option("--hidden-dim", cc.hidden_dim, "LSTM hidden size")->capture_default_str();
  app.add_option("--layers", cc.num_layers, "LSTM layers")->capture_default_str();
  tf.add(app);
  add_config(app);
  app.parse(args);

  const auto pairs = read_labeled(train_path);
  const DomainTagSet tags = tags_from(tags_flag, pairs);
  BpeModel bpe = BpeModel::load(bpe_path);
  Vocabulary vocab;
  if (vocab_path.empty()) {
    std::vector<std::vector<std::string>> src;
    for (const auto& p : pairs) src.push_back(bpe.apply(p.src));
    vocab = Vocabulary::build(src, vocab_size);
  } else {
    vocab = Vocabulary::load(vocab_path);
  }
  const auto data = classifier_data(pairs, bpe, vocab, tags);
  std::cout << "epoch\tcross_entropy\tperplexity\tlr\n";
  const Classifier clf = train_classifier(data, vocab, tags, cc, tf.get());
  save_classifier(clf, output);
  return 0;
}

int cmd_classify(CLI::App& app, std::vector<std::string> args) {
  std::string clf_path, bpe_path, test_path;
  app.add_option("--classifier", clf_path, "classifier file")->required();
  app.add_option("--bpe", bpe_path, "BPE codes")->required();
  app.add_option("--test", test_path, "labeled TSV to evaluate instead of reading standard input");
  add_config(app);
  app.parse(args);

  const Classifier clf = load_classifier(clf_path);
  const BpeModel bpe = BpeModel::load(bpe_path);
  if (!test_path.empty()) {
    const auto pairs = read_labeled(test_path);
    const auto ev = evaluate_classifier(clf, classifier_data(pairs, bpe, clf.vocab, clf.tags));
    std::vector<std::vector<std::string>> rows;
    std::vector<std::string> head{"gold \\ predicted"};
    for (const auto& n : clf.tags.names()) head.push_back(n);
    head.push_back("recall %");
    rows.push_back(head);
    for (std::size_t k = 0; k < clf.tags.size(); ++k) {
      std::vector<std::string> r{clf.tags.name(static_cast<int>(k))};
      for (std::size_t v : ev.confusion[k]) r.push_back(std::to_string(v));
      r.push_back(fmt(ev.recall[k], 2));
      rows.push_back(r);
    }
    print_table(std::cout, rows);
    std::cout << "accuracy " << fmt(ev.accuracy, 2) << "% over " << ev.total << " sentences\n";
    return 0;
  }
  std::string line;
  std::size_t n = 0;
  while (std::getline(std::cin, line)) {
    ++n;
    const auto words = split_tokens(line);
    if (words.empty()) {
      std::cerr << "warning: line " << n << " is empty\n";
      std::cout << '\n';
      continue;
    }
    const auto c = classify(clf, encode_words(bpe, clf.vocab, words));
    std::cout << clf.tags.surface(c.tag) << '\t' << fmt(c.posterior[static_cast<std::size_t>(c.tag)], 4) << '\n';
  }
  return 0;
}

int cmd_bleu(CLI::App& app, std::vector<std::string> args) {
  std::string hyp = "-", ref;
  app.add_option("--hyp", hyp, "hypothesis file, one sentence per line ('-' for standard input)")
      ->capture_default_str();
  app.add_option("--ref", ref, "reference file")->required();
  add_config(app);
  app.parse(args);
  const auto r = bleu_lines(read_lines(hyp), read_lines(ref));
  std::cout << "BLEU = " << fmt(100.0 * r.bleu, 2) << ", " << fmt(100.0 * r.precision[0], 1) << '/'
            << fmt(100.0 * r.precision[1], 1) << '/' << fmt(100.0 * r.precision[2], 1) << '/'
            << fmt(100.0 * r.precision[3], 1) << " (BP=" << fmt(r.brevity_penalty, 3)
            << ", ratio=" << fmt(r.ref_len == 0 ? 0.0 : static_cast<double>(r.hyp_len) / static_cast<double>(r.ref_len), 3)
            << ", hyp_len=" << r.hyp_len << ", ref_len=" << r.ref_len << ")\n";
  return 0;
}

int run_benchmark_command(const CorpusFlags& corpus, const ModelFlags& mf, const TrainFlags& tf,
                          std::size_t merges, const std::vector<std::string>& cells,
                          const std::string& work_dir, bool full_batch_single) {
  BenchmarkConfig cfg = default_benchmark_config();
  cfg.corpus = corpus.spec;
  cfg.bpe_merges = merges;
  cfg.word_dim = mf.word_dim;
  cfg.hidden_dim = mf.hidden_dim;
  cfg.feature_dim = mf.feature_dim;
  cfg.num_layers = mf.layers;
  cfg.dropout_p = mf.dropout;
  cfg.train = tf.cfg;
  cfg.scale_single_batch = !full_batch_single;
  if (!cells.empty()) {
    cfg.cells.clear();
    for (const auto& c : cells) cfg.cells.push_back(parse_cell(c));
  }
  cfg.work_dir = work_dir;
  cfg.log = &std::cerr;
  const BenchmarkResult r = run_benchmark(cfg);
  r.table.write_tsv(std::cout);
  std::cout << '\n';
  print_experiment(r.table);
  if (r.matrix) {
    std::cout << '\n';
    print_matrix(*r.matrix);
  }
  return 0;
}

int cmd_experiment(CLI::App& app, std::vector<std::string> args) {
  std::string test_path, bpe_path, lexicon_path, classifier_path, join, token, feature, output,
      domains_flag, work_dir;
  std::vector<std::string> single, cells;
  bool benchmark = false, full_batch_single = false;
  std::size_t merges = 500;
  CorpusFlags corpus;
  ModelFlags mf;
  mf.layers = 1;
  const BenchmarkConfig defaults = default_benchmark_config();
  TrainFlags tf(defaults.train.batch_size, defaults.train.epochs, defaults.train.decay_start_epoch);

  app.set_config("--spec", "", "experiment spec: key = value lines naming the inputs below");
  app.allow_config_extras(CLI::config_extras_mode::error);
  app.add_option("--test", test_path, "labeled test TSV of raw words");
  app.add_option("--bpe", bpe_path, "BPE codes");
  app.add_option("--lexicon", lexicon_path, "ambiguous lexicon JSON, enables amb_acc rows");
  app.add_option("--classifier", classifier_path, "classifier for the RNN cells");
  app.add_option("--single", single, "DOMAIN:model pairs for the Single cell")->delimiter(',');
  app.add_option("--join", join, "Join model");
  app.add_option("--token", token, "Token model");
  app.add_option("--feature", feature, "Feature model");
  app.add_option("--cells", cells, "e.g. single,join,token-oracle,feature-rnn")->delimiter(',');
  app.add_option("--domains", domains_flag, "comma-separated row order (default: order in the test set)");
  app.add_option("--output", output, "TSV report file (default: standard output)");
  auto* bench = app.add_subcommand("benchmark", "generate, train and evaluate the synthetic benchmark");
  bench->add_option("--work-dir", work_dir, "where corpora, models and reports are written");
  bench->add_option("--merges", merges, "BPE merges")->capture_default_str();
  bench->add_option("--cells", cells, "cells to evaluate")->delimiter(',');
  bench->add_flag("--full-batch-single", full_batch_single,
                  "train Single systems with the full batch size instead of batch / domains");
  corpus.add(*bench);
  mf.add(*bench);
  tf.add(*bench);
  bench->callback([&] { benchmark = true; });
  app.parse(args);

  if (benchmark) return run_benchmark_command(corpus, mf, tf, merges, cells, work_dir, full_batch_single);
  if (test_path.empty() || bpe_path.empty()) throw UsageError("experiment needs test and bpe");
  if (cells.empty()) throw UsageError("experiment needs cells");

  ExperimentSpec spec;
  spec.test = read_labeled(test_path);
  spec.domains = domains_flag.empty() ? domains_in_order(spec.test) : split_list(domains_flag);
  BpeModel bpe = BpeModel::load(bpe_path);
  for (const auto& d : spec.domains) bpe.protect(DomainTagSet::surface_form(d));
  spec.bpe = &bpe;
  std::optional<AmbiguousLexicon> lexicon;
  if (!lexicon_path.empty()) {
    lexicon = AmbiguousLexicon::load(lexicon_path);
    spec.lexicon = &*lexicon;
  }
  for (const auto& c : cells) spec.cells.push_back(parse_cell(c));

  std::map<std::string, Model> single_models;
  std::optional<Model> join_m, token_m, feature_m;
  std::optional<Classifier> clf;
  ModelSet models;
  for (const auto& entry : single) {
    const auto colon = entry.find(':');
    if (colon == std::string::npos) throw UsageError("single entries look like DOMAIN:path, got " + entry);
    const std::string d = DomainTagSet::bare_name(entry.substr(0, colon));
    single_models.emplace(d, load_model(entry.substr(colon + 1)));
  }
  for (const auto& [d, m] : single_models) models.single[d] = &m;
  if (!join.empty()) models.join = &join_m.emplace(load_model(join));
  if (!token.empty()) models.token = &token_m.emplace(load_model(token));
  if (!feature.empty()) models.feature = &feature_m.emplace(load_model(feature));
  if (!classifier_path.empty()) models.classifier = &clf.emplace(load_classifier(classifier_path));

  const ExperimentTable table = run_experiment(spec, models);
  if (output.empty()) {
    table.write_tsv(std::cout);
  } else {
    std::ofstream os(output);
    if (!os) throw InputError("cannot write " + output);
    table.write_tsv(os);
  }
  std::cout << '\n';
  print_experiment(table);
  return 0;
}

int cmd_cross_matrix(CLI::App& app, std::vector<std::string> args) {
  std::string model_path, bpe_path, test_path, lexicon_path, output;
  app.add_option("--model", model_path, "feature-mode model")->required();
  app.add_option("--bpe", bpe_path, "BPE codes")->required();
  app.add_option("--test", test_path, "labeled test TSV of raw words")->required();
  app.add_option("--lexicon", lexicon_path, "ambiguous lexicon JSON");
  app.add_option("--output", output, "TSV report file (default: standard output)");
  add_config(app);
  app.parse(args);
  const Model model = load_model(model_path);
  const BpeModel bpe = BpeModel::load(bpe_path);
  const auto test = read_labeled(test_path);
  std::optional<AmbiguousLexicon> lexicon;
  if (!lexicon_path.empty()) lexicon = AmbiguousLexicon::load(lexicon_path);
  const CrossDomainMatrix m = cross_domain_matrix(model, bpe, test, lexicon ? &*lexicon : nullptr);
  if (output.empty()) {
    m.write_tsv(std::cout);
  } else {
    std::ofstream os(output);
    if (!os) throw InputError("cannot write " + output);
    m.write_tsv(os);
  }
  std::cout << '\n';
  print_matrix(m);
  return 0;
}

struct Command {
  std::string name;
  std::string summary;
  std::function<int(CLI::App&, std::vector<std::string>)> run;
};

const std::vector<Command>& commands() {
  static const std::vector<Command> list = {
      {"gen-corpus", "generate a synthetic multi-domain corpus", cmd_gen_corpus},
      {"learn-bpe", "learn joint BPE codes and a subword vocabulary", cmd_learn_bpe},
      {"preprocess", "apply BPE and the mode's domain annotation", cmd_preprocess},
      {"train", "train a translation model", cmd_train},
      {"translate", "translate standard input line by line", cmd_translate},
      {"train-classifier", "train the sentence domain classifier", cmd_train_classifier},
      {"classify", "predict domains, or evaluate on a labeled set", cmd_classify},
      {"bleu", "corpus BLEU of a hypothesis file", cmd_bleu},
      {"experiment", "compare systems per domain (or: experiment benchmark)", cmd_experiment},
      {"cross-matrix", "BLEU of every test domain under every tag", cmd_cross_matrix},
  };
  return list;
}

void usage(std::ostream& os) {
  os << "usage: dcnmt <command> [options]   (dcnmt <command> --help for details)\n\ncommands:\n";
  for (const auto& c : commands()) os << "  " << std::left << std::setw(18) << c.name << c.summary << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  if (argc < 2) {
    usage(std::cerr);
    return 1;
  }
  const std::string name = argv[1];
  if (name == "--help" || name == "-h" || name == "help") {
    usage(std::cout);
    return 0;
  }
  const auto& list = commands();
  auto it = std::find_if(list.begin(), list.end(), [&](const Command& c) { return c.name == name; });
  if (it == list.end()) {
    std::cerr << "dcnmt: unknown command '" << name << "'\n\n";
    usage(std::cerr);
    return 1;
  }
  CLI::App app(it->summary, "dcnmt " + it->name);
  // CLI11 parses a reversed argument vector.
  std::vector<std::string> args(argv + 2, argv + argc);
  std::reverse(args.begin(), args.end());
  try {
    return it->run(app, args);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  } catch (const UsageError& e) {
    std::cerr << "dcnmt " << it->name << ": " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "dcnmt " << it->name << ": error: " << e.what() << '\n';
    return 2;
  }
}
