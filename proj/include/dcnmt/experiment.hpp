#pragma once

#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dcnmt/bleu.hpp"
#include "dcnmt/bpe.hpp"
#include "dcnmt/classifier.hpp"
#include "dcnmt/corpus.hpp"
#include "dcnmt/model.hpp"
#include "dcnmt/pipeline.hpp"
#include "dcnmt/synthetic.hpp"
#include "dcnmt/trainer.hpp"

namespace dcnmt {

struct AmbiguousScore {
  std::size_t hits = 0;
  std::size_t occurrences = 0;
  // 1 when there is nothing to score.
  double accuracy() const {
    return occurrences == 0 ? 1.0 : static_cast<double>(hits) / static_cast<double>(occurrences);
  }
};

// For each lexicon word, the expected variant is the one of the sentence's
// true domain. Every occurrence of that variant in the reference counts once;
// it is a hit while the hypothesis still holds unmatched copies of it.
AmbiguousScore ambiguous_accuracy(std::span<const Sentence> hypotheses,
                                  std::span<const Sentence> references,
                                  const AmbiguousLexicon& lexicon, std::span<const int> domains);

enum class Condition { none, oracle, rnn };

// One column of the comparison table.
struct Cell {
  Mode system = Mode::join;
  Condition condition = Condition::none;

  std::string label() const;
  friend bool operator==(const Cell&, const Cell&) = default;
};

// Parses "single", "join", "token-oracle", "feature-rnn", ... Throws
// ConfigError.
Cell parse_cell(std::string_view text);

// Models for the cells; Single has one model per domain.
struct ModelSet {
  std::map<std::string, const Model*> single;
  const Model* join = nullptr;
  const Model* token = nullptr;
  const Model* feature = nullptr;
  const Classifier* classifier = nullptr;
};

struct ExperimentSpec {
  std::vector<std::string> domains;
  std::vector<LabeledPair> test;  // raw words, labeled with their true domain
  const BpeModel* bpe = nullptr;
  const AmbiguousLexicon* lexicon = nullptr;  // optional
  std::vector<Cell> cells;
};

struct CellResult {
  BleuReport bleu;
  std::optional<AmbiguousScore> ambiguous;
};

struct ExperimentTable {
  std::vector<std::string> domains;
  std::vector<Cell> cells;
  std::vector<std::vector<CellResult>> results;  // [domain][cell]
  // Per-domain classifier accuracy in percent, when an RNN cell ran.
  std::optional<ClassifierEvaluation> classifier;

  const CellResult& at(std::string_view domain, const Cell& cell) const;
  // Header "domain<TAB>metric<TAB>cell labels...", one bleu row (×100) and,
  // with a lexicon, one amb_acc row per domain.
  void write_tsv(std::ostream& os) const;
};

// Translates each domain's test sentences with every cell. Throws
// ConfigError naming the first cell without a model (or classifier).
ExperimentTable run_experiment(const ExperimentSpec& spec, const ModelSet& models);

struct CrossDomainMatrix {
  std::vector<std::string> domains;
  std::vector<std::vector<double>> bleu;  // [test domain][tag], in [0, 1]
  std::vector<std::vector<std::optional<double>>> ambiguous;

  // "row_domain<TAB>col_tag<TAB>bleu" with a header, BLEU ×100.
  void write_tsv(std::ostream& os) const;
};

// Translates every domain's test set under every tag. Throws ModeError for
// models that are not in Feature mode.
CrossDomainMatrix cross_domain_matrix(const Model& model, const BpeModel& bpe,
                                      std::span<const LabeledPair> test,
                                      const AmbiguousLexicon* lexicon = nullptr);

// End-to-end synthetic benchmark: corpus, BPE, every system, the classifier,
// the comparison table and the cross-domain matrix.
struct BenchmarkConfig {
  CorpusSpec corpus;
  std::size_t bpe_merges = 500;
  std::size_t max_vocab = 1000;
  std::size_t word_dim = 64;
  std::size_t hidden_dim = 64;
  std::size_t feature_dim = 8;
  std::size_t num_layers = 2;
  double dropout_p = 0.3;
  TrainConfig train;
  // Single systems see 1/K of the data; dividing their batch size by K keeps
  // the number of updates per epoch close to that of the pooled systems.
  bool scale_single_batch = true;
  ClassifierConfig classifier;
  TrainConfig classifier_train;
  std::vector<Cell> cells;
  std::filesystem::path work_dir;  // empty: nothing written
  std::ostream* log = nullptr;
};

BenchmarkConfig default_benchmark_config();

struct BenchmarkResult {
  SyntheticCorpus corpus;
  Pipeline pipeline;
  std::map<std::string, Model> single;
  std::optional<Model> join, token, feature;
  std::optional<Classifier> classifier;
  ClassifierEvaluation classifier_eval;
  ExperimentTable table;
  std::optional<CrossDomainMatrix> matrix;
  std::map<std::string, double> seconds;  // wall time per stage
};

BenchmarkResult run_benchmark(const BenchmarkConfig& config);

}  // namespace dcnmt
