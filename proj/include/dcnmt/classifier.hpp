#pragma once

#include <filesystem>
#include <iosfwd>
#include <span>
#include <vector>

#include "dcnmt/domain.hpp"
#include "dcnmt/graph.hpp"
#include "dcnmt/lstm.hpp"
#include "dcnmt/trainer.hpp"
#include "dcnmt/vocab.hpp"

namespace dcnmt {

struct ClassifierConfig {
  std::size_t embed_dim = 32;
  std::size_t hidden_dim = 32;
  std::size_t num_layers = 1;
};

// Sentence-level domain classifier: an LSTM over word embeddings whose final
// hidden state is projected onto the K domains.
struct Classifier {
  ClassifierConfig config;
  Vocabulary vocab;
  DomainTagSet tags;
  Parameter embed;            // V × d_c
  std::vector<LstmCell> rnn;
  Parameter W_cls;            // h_c × K

  static Classifier create(ClassifierConfig config, Vocabulary vocab, DomainTagSet tags,
                           std::uint64_t seed);
  std::vector<Parameter*> params();
  std::vector<const Parameter*> params() const;
};

struct LabeledIds {
  std::vector<int> ids;
  int domain = 0;
};

struct Classification {
  int tag = 0;
  Tensor posterior;  // 1×K
};

// Argmax ties go to the lowest tag id.
Classification classify(const Classifier& clf, std::span<const int> ids);

// Summed cross-entropy of the gold domains over a batch of sentences.
Var classifier_loss(Graph& g, Classifier& clf, std::span<const LabeledIds* const> batch);

// SGD with the translation trainer's schedule, clipping and seeding. The loss
// of each step is averaged over the sentences of the batch. Throws ConfigError
// unless at least two domains occur in `data`.
Classifier train_classifier(std::span<const LabeledIds> data, const Vocabulary& vocab,
                            const DomainTagSet& tags, const ClassifierConfig& config,
                            const TrainConfig& train_cfg,
                            std::vector<EpochReport>* reports = nullptr);

struct ClassifierEvaluation {
  std::vector<std::vector<std::size_t>> confusion;  // [gold][predicted]
  std::vector<double> recall;                       // per gold domain, in percent
  double accuracy = 0.0;                            // percent, trace / total
  std::size_t total = 0;
};

ClassifierEvaluation evaluate_predictions(std::span<const int> predicted, std::span<const int> gold,
                                          std::size_t num_domains);
ClassifierEvaluation evaluate_classifier(const Classifier& clf, std::span<const LabeledIds> test);

// Same named-tensor layout as translation models, magic "DCCLS".
void save_classifier(const Classifier& clf, std::ostream& os);
void save_classifier(const Classifier& clf, const std::filesystem::path& path);
Classifier load_classifier(std::istream& is);
Classifier load_classifier(const std::filesystem::path& path);

}  // namespace dcnmt
