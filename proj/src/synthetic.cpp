#include "dcnmt/synthetic.hpp"

#include <algorithm>
#include <array>
#include <optional>
#include <cctype>
#include <fstream>
#include <set>

#include "json.hpp"

#include "dcnmt/error.hpp"
#include "dcnmt/rng.hpp"

namespace dcnmt {

namespace {

constexpr std::array<std::string_view, 12> kSyllables = {"ka", "lo", "mi", "ne", "ru", "sa",
                                                         "ti", "vo", "pe", "du", "go", "ba"};

std::string syllables(std::size_t i) {
  std::string out;
  out += kSyllables[i % 12];
  out += kSyllables[(i / 12) % 12];
  if (i >= 144) out += kSyllables[(i / 144) % 12];
  if (i >= 1728) out += std::to_string(i / 1728);
  return out;
}

// Vowel rotation: a bijection on strings, so distinct sources keep distinct
// targets.
std::string shift_vowels(std::string_view word) {
  std::string out(word);
  for (char& ch : out) {
    switch (ch) {
      case 'a': ch = 'e'; break;
      case 'e': ch = 'i'; break;
      case 'i': ch = 'o'; break;
      case 'o': ch = 'u'; break;
      case 'u': ch = 'a'; break;
      default: break;
    }
  }
  return out;
}

std::string lower(std::string_view s) {
  std::string out(s);
  for (char& ch : out) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
  return out;
}

}  // namespace

void CorpusSpec::validate() const {
  if (num_domains == 0) throw ConfigError("num_domains must be positive");
  if (shared_vocab_size == 0) throw ConfigError("shared_vocab_size must be positive");
  if (domain_vocab_size == 0) throw ConfigError("domain_vocab_size must be positive");
  if (sentences_per_domain < 2) throw ConfigError("sentences_per_domain must be at least 2");
  if (min_length < 1 || max_length < min_length) {
    throw ConfigError("sentence length range must satisfy 1 <= min_length <= max_length");
  }
  if (ambiguity_prob < 0.0 || ambiguity_prob > 1.0) throw ConfigError("ambiguity_prob outside [0, 1]");
  if (ambiguity_prob > 0.0 && ambiguous_words == 0) {
    throw ConfigError("ambiguity_prob > 0 requires at least one ambiguous word");
  }
  if (domain_word_prob < 0.0 || domain_word_prob > 1.0) {
    throw ConfigError("domain_word_prob outside [0, 1]");
  }
  if (test_fraction <= 0.0 || test_fraction >= 1.0) throw ConfigError("test_fraction outside (0, 1)");
}

const std::string& AmbiguousLexicon::variant(const std::string& source_word,
                                             std::size_t domain) const {
  auto it = variants.find(source_word);
  if (it == variants.end()) throw InputError("not an ambiguous word: " + source_word);
  if (domain >= it->second.size()) throw TagError("domain id out of range for lexicon");
  return it->second[domain];
}

void AmbiguousLexicon::write_json(std::ostream& os) const {
  nlohmann::ordered_json j;
  j["domains"] = domains;
  nlohmann::ordered_json entries = nlohmann::ordered_json::object();
  for (const auto& [word, targets] : variants) {
    nlohmann::ordered_json per_domain = nlohmann::ordered_json::object();
    for (std::size_t d = 0; d < targets.size(); ++d) per_domain[domains.at(d)] = targets[d];
    entries[word] = per_domain;
  }
  j["lexicon"] = entries;
  os << j.dump(2) << '\n';
}

AmbiguousLexicon AmbiguousLexicon::read_json(std::istream& is) {
  nlohmann::json j;
  try {
    is >> j;
    AmbiguousLexicon lex;
    lex.domains = j.at("domains").get<std::vector<std::string>>();
    for (const auto& [word, per_domain] : j.at("lexicon").items()) {
      std::vector<std::string> targets;
      for (const auto& d : lex.domains) targets.push_back(per_domain.at(d).get<std::string>());
      lex.variants.emplace(word, std::move(targets));
    }
    return lex;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("malformed lexicon: ") + e.what());
  }
}

void AmbiguousLexicon::save(const std::filesystem::path& path) const {
  std::ofstream os(path);
  if (!os) throw InputError("cannot write " + path.string());
  write_json(os);
}

AmbiguousLexicon AmbiguousLexicon::load(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw InputError("cannot read " + path.string());
  return read_json(is);
}

std::vector<std::string> synthetic_domain_names(std::size_t k) {
  static const std::vector<std::string> base = {"IT", "LIT", "MED", "NEWS", "PARL", "TOUR"};
  std::vector<std::string> names;
  for (std::size_t i = 0; i < k; ++i) {
    names.push_back(i < base.size() ? base[i] : "D" + std::to_string(i + 1));
  }
  return names;
}

SyntheticCorpus generate(const CorpusSpec& spec) {
  spec.validate();
  const std::size_t K = spec.num_domains;
  SyntheticCorpus corpus;
  corpus.domains = synthetic_domain_names(K);
  corpus.lexicon.domains = corpus.domains;

  for (std::size_t i = 0; i < spec.shared_vocab_size; ++i) corpus.shared_words.push_back("w" + syllables(i));
  corpus.domain_words.resize(K);
  for (std::size_t d = 0; d < K; ++d) {
    const std::string prefix = lower(corpus.domains[d]) + "x";
    for (std::size_t i = 0; i < spec.domain_vocab_size; ++i) {
      corpus.domain_words[d].push_back(prefix + syllables(i));
    }
  }
  std::vector<std::string> ambiguous;
  for (std::size_t i = 0; i < spec.ambiguous_words; ++i) {
    const std::string word = "amb" + syllables(i);
    ambiguous.push_back(word);
    std::vector<std::string> targets;
    for (std::size_t d = 0; d < K; ++d) targets.push_back(shift_vowels(word) + lower(corpus.domains[d]));
    corpus.lexicon.variants.emplace(word, std::move(targets));
  }

  // The word classes must not overlap on either side.
  std::set<std::string> sources, targets;
  auto claim = [](std::set<std::string>& seen, const std::string& w) {
    if (!seen.insert(w).second) throw ConfigError("synthetic vocabulary collision on '" + w + "'");
  };
  for (const auto& w : corpus.shared_words) {
    claim(sources, w);
    claim(targets, shift_vowels(w));
  }
  for (const auto& words : corpus.domain_words)
    for (const auto& w : words) {
      claim(sources, w);
      claim(targets, shift_vowels(w));
    }
  for (const auto& [w, variants] : corpus.lexicon.variants) {
    claim(sources, w);
    for (const auto& v : variants) claim(targets, v);
  }

  const std::size_t attempts_limit = spec.sentences_per_domain * 1000;
  for (std::size_t d = 0; d < K; ++d) {
    Rng rng(derive_seed(spec.seed, d));
    std::set<std::vector<std::string>> seen;
    std::vector<LabeledPair> pairs;
    std::size_t attempts = 0;
    while (pairs.size() < spec.sentences_per_domain) {
      if (++attempts > attempts_limit) {
        throw ConfigError("cannot draw " + std::to_string(spec.sentences_per_domain) +
                          " distinct sentences for domain " + corpus.domains[d]);
      }
      const std::size_t len = spec.min_length + rng.below(spec.max_length - spec.min_length + 1);
      std::vector<std::string> src(len);
      std::vector<char> is_domain(len, 0);
      for (std::size_t t = 0; t < len; ++t) {
        if (rng.bernoulli(spec.domain_word_prob)) {
          src[t] = corpus.domain_words[d][rng.below(spec.domain_vocab_size)];
          is_domain[t] = 1;
        } else {
          src[t] = corpus.shared_words[rng.below(spec.shared_vocab_size)];
        }
      }
      std::optional<std::size_t> amb_pos;
      if (rng.bernoulli(spec.ambiguity_prob)) {
        // Never overwrite the only domain word.
        std::vector<std::size_t> free;
        const auto domain_count = std::count(is_domain.begin(), is_domain.end(), 1);
        for (std::size_t t = 0; t < len; ++t) {
          if (!is_domain[t] || domain_count > 1) free.push_back(t);
        }
        if (!free.empty()) {
          amb_pos = free[rng.below(free.size())];
          if (is_domain[*amb_pos]) is_domain[*amb_pos] = 0;
          src[*amb_pos] = ambiguous[rng.below(ambiguous.size())];
        }
      }
      if (std::count(is_domain.begin(), is_domain.end(), 1) == 0) {
        std::vector<std::size_t> free;
        for (std::size_t t = 0; t < len; ++t) {
          if (!amb_pos || t != *amb_pos) free.push_back(t);
        }
        if (free.empty()) continue;  // length-1 sentence already used by the ambiguous word
        src[free[rng.below(free.size())]] = corpus.domain_words[d][rng.below(spec.domain_vocab_size)];
      }
      if (!seen.insert(src).second) continue;

      LabeledPair pair;
      pair.domain = corpus.domains[d];
      for (const auto& w : src) {
        pair.tgt.push_back(corpus.lexicon.contains(w) ? corpus.lexicon.variant(w, d) : shift_vowels(w));
      }
      pair.src = std::move(src);
      pairs.push_back(std::move(pair));
    }
    rng.shuffle(pairs);
    const auto n_test = std::max<std::size_t>(
        1, static_cast<std::size_t>(static_cast<double>(pairs.size()) * spec.test_fraction + 0.5));
    const std::size_t n_train = pairs.size() - n_test;
    corpus.train.insert(corpus.train.end(), pairs.begin(), pairs.begin() + static_cast<std::ptrdiff_t>(n_train));
    corpus.test.insert(corpus.test.end(), pairs.begin() + static_cast<std::ptrdiff_t>(n_train), pairs.end());
  }
  return corpus;
}

void write_corpus(const SyntheticCorpus& corpus, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  write_labeled(dir / "train.tsv", corpus.train);
  write_labeled(dir / "test.tsv", corpus.test);
  corpus.lexicon.save(dir / "lexicon.json");
}

}  // namespace dcnmt
