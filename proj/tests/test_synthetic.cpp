#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "doctest.h"
#include "dcnmt/error.hpp"
#include "dcnmt/synthetic.hpp"

using namespace dcnmt;

namespace {

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::size_t domain_index(const SyntheticCorpus& c, const std::string& name) {
  return static_cast<std::size_t>(std::find(c.domains.begin(), c.domains.end(), name) - c.domains.begin());
}

}  // namespace

TEST_CASE("generation is deterministic down to the bytes") {
  CorpusSpec spec;
  spec.sentences_per_domain = 200;
  const auto a = generate(spec), b = generate(spec);
  CHECK(a.train == b.train);
  CHECK(a.test == b.test);
  CHECK(a.lexicon == b.lexicon);

  const auto base = std::filesystem::temp_directory_path() / "dcnmt_test_synth";
  std::filesystem::remove_all(base);
  write_corpus(a, base / "a");
  write_corpus(b, base / "b");
  for (const char* f : {"train.tsv", "test.tsv", "lexicon.json"}) {
    CHECK(!slurp(base / "a" / f).empty());
    CHECK(slurp(base / "a" / f) == slurp(base / "b" / f));
  }
  CHECK(AmbiguousLexicon::load(base / "a" / "lexicon.json") == a.lexicon);
  std::filesystem::remove_all(base);

  spec.seed = 2;
  CHECK(generate(spec).train != a.train);
}

TEST_CASE("vocabularies are disjoint and sentences are domain-recoverable") {
  CorpusSpec spec;
  spec.sentences_per_domain = 300;
  const auto c = generate(spec);
  REQUIRE(c.domains == std::vector<std::string>{"IT", "LIT", "MED"});
  std::set<std::string> shared(c.shared_words.begin(), c.shared_words.end());
  std::vector<std::set<std::string>> own;
  for (const auto& words : c.domain_words) {
    own.emplace_back(words.begin(), words.end());
    CHECK(own.back().size() == spec.domain_vocab_size);
    for (const auto& w : words) CHECK(!shared.contains(w));
  }
  for (std::size_t a = 0; a < own.size(); ++a)
    for (std::size_t b = a + 1; b < own.size(); ++b)
      for (const auto& w : own[a]) CHECK(!own[b].contains(w));

  for (const auto* set : {&c.train, &c.test}) {
    for (const auto& p : *set) {
      const std::size_t d = domain_index(c, p.domain);
      REQUIRE(d < 3);
      CHECK(p.src.size() == p.tgt.size());
      CHECK(p.src.size() >= spec.min_length);
      CHECK(p.src.size() <= spec.max_length);
      std::size_t own_words = 0, ambiguous = 0;
      for (std::size_t t = 0; t < p.src.size(); ++t) {
        const auto& w = p.src[t];
        if (own[d].contains(w)) ++own_words;
        for (std::size_t e = 0; e < 3; ++e)
          if (e != d) CHECK(!own[e].contains(w));
        if (c.lexicon.contains(w)) {
          ++ambiguous;
          CHECK(p.tgt[t] == c.lexicon.variant(w, d));
        }
      }
      CHECK(own_words >= 1);
      CHECK(ambiguous <= 1);
    }
  }
}

TEST_CASE("lexicon variants are distinct per domain") {
  const auto c = generate(CorpusSpec{});
  CHECK(c.lexicon.variants.size() == 8);
  for (const auto& [word, variants] : c.lexicon.variants) {
    CHECK(variants.size() == 3);
    CHECK(std::set<std::string>(variants.begin(), variants.end()).size() == 3);
  }
}

TEST_CASE("ambiguous words occur in about half the sentences") {
  const auto c = generate(CorpusSpec{});
  std::vector<std::size_t> counts(3, 0), totals(3, 0);
  for (const auto* set : {&c.train, &c.test}) {
    for (const auto& p : *set) {
      const std::size_t d = domain_index(c, p.domain);
      ++totals[d];
      for (const auto& w : p.src)
        if (c.lexicon.contains(w)) ++counts[d];
    }
  }
  for (std::size_t d = 0; d < 3; ++d) {
    CHECK(totals[d] == 2000);
    MESSAGE(c.domains[d] << " ambiguous occurrences " << counts[d]);
    CHECK(counts[d] >= 950);
    CHECK(counts[d] <= 1050);
  }
}

TEST_CASE("train and test are disjoint and split 90/10") {
  const auto c = generate(CorpusSpec{});
  CHECK(c.test.size() == 600);
  CHECK(c.train.size() == 5400);
  std::set<std::vector<std::string>> train;
  for (const auto& p : c.train) train.insert(p.src);
  CHECK(train.size() == c.train.size());
  for (const auto& p : c.test) CHECK(!train.contains(p.src));
}

TEST_CASE("a single domain degenerates to a plain corpus") {
  CorpusSpec spec;
  spec.num_domains = 1;
  spec.sentences_per_domain = 300;
  const auto c = generate(spec);
  CHECK(c.domains == std::vector<std::string>{"IT"});
  for (const auto& [word, variants] : c.lexicon.variants) CHECK(variants.size() == 1);
  for (const auto& p : c.train)
    for (std::size_t t = 0; t < p.src.size(); ++t)
      if (c.lexicon.contains(p.src[t])) CHECK(p.tgt[t] == c.lexicon.variant(p.src[t], 0));
}

TEST_CASE("invalid specs are rejected") {
  auto rejects = [](auto edit) {
    CorpusSpec s;
    edit(s);
    CHECK_THROWS_AS(generate(s), ConfigError);
  };
  rejects([](CorpusSpec& s) { s.num_domains = 0; });
  rejects([](CorpusSpec& s) { s.min_length = 8; s.max_length = 4; });
  rejects([](CorpusSpec& s) { s.min_length = 0; });
  rejects([](CorpusSpec& s) { s.ambiguity_prob = 1.5; });
  rejects([](CorpusSpec& s) { s.domain_vocab_size = 0; });
  rejects([](CorpusSpec& s) { s.test_fraction = 1.0; });
}

TEST_CASE("domain names") {
  CHECK(synthetic_domain_names(8) ==
        std::vector<std::string>{"IT", "LIT", "MED", "NEWS", "PARL", "TOUR", "D7", "D8"});
}

TEST_CASE("lexicon json roundtrip and malformed input") {
  const auto c = generate(CorpusSpec{});
  std::stringstream ss;
  c.lexicon.write_json(ss);
  CHECK(AmbiguousLexicon::read_json(ss) == c.lexicon);

  std::stringstream garbage("{\"domains\": [\"IT\"");
  CHECK_THROWS_AS(AmbiguousLexicon::read_json(garbage), FormatError);
  std::stringstream short_row(R"({"domains":["IT","MED"],"lexicon":{"amb":{"IT":"x"}}})");
  CHECK_THROWS_AS(AmbiguousLexicon::read_json(short_row), FormatError);
}
