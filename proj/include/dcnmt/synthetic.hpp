#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "dcnmt/corpus.hpp"

namespace dcnmt {

struct CorpusSpec {
  std::size_t num_domains = 3;
  std::size_t shared_vocab_size = 60;
  std::size_t domain_vocab_size = 40;  // per domain
  std::size_t ambiguous_words = 8;
  std::size_t sentences_per_domain = 2000;
  std::size_t min_length = 5;
  std::size_t max_length = 10;
  double ambiguity_prob = 0.5;
  // Chance that a non-ambiguous position holds a domain word. Every sentence
  // gets at least one domain word regardless.
  double domain_word_prob = 0.2;
  double test_fraction = 0.1;
  std::uint64_t seed = 1;

  // Throws ConfigError.
  void validate() const;
};

// Source word -> target variant per domain id.
struct AmbiguousLexicon {
  std::vector<std::string> domains;
  std::map<std::string, std::vector<std::string>> variants;

  bool contains(const std::string& source_word) const { return variants.contains(source_word); }
  const std::string& variant(const std::string& source_word, std::size_t domain) const;

  void write_json(std::ostream& os) const;
  static AmbiguousLexicon read_json(std::istream& is);
  void save(const std::filesystem::path& path) const;
  static AmbiguousLexicon load(const std::filesystem::path& path);

  friend bool operator==(const AmbiguousLexicon&, const AmbiguousLexicon&) = default;
};

struct SyntheticCorpus {
  std::vector<std::string> domains;
  std::vector<std::string> shared_words;
  std::vector<std::vector<std::string>> domain_words;  // [domain][i]
  AmbiguousLexicon lexicon;
  std::vector<LabeledPair> train;  // grouped by domain
  std::vector<LabeledPair> test;
};

// Domain names: IT, LIT, MED, NEWS, PARL, TOUR, then D7, D8, ...
std::vector<std::string> synthetic_domain_names(std::size_t k);

// Deterministic in `spec`. Each source sentence mixes shared and domain
// words, and with probability ambiguity_prob holds exactly one ambiguous
// word. Targets are a word-by-word mapping in which the ambiguous word takes
// its domain's variant.
SyntheticCorpus generate(const CorpusSpec& spec);

// Writes train.tsv, test.tsv and lexicon.json into `dir`.
void write_corpus(const SyntheticCorpus& corpus, const std::filesystem::path& dir);

}  // namespace dcnmt
