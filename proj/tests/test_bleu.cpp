#include <algorithm>
#include <cmath>
#include <random>

#include "doctest.h"
#include "dcnmt/bleu.hpp"
#include "dcnmt/error.hpp"
#include "dcnmt/corpus.hpp"

using namespace dcnmt;

namespace {

Sentence words(const std::string& line) { return split_tokens(line); }

// Quadratic-time scorer: for each hypothesis n-gram, count it against the
// reference by linear scans.
double naive_bleu(const std::vector<Sentence>& hyps, const std::vector<Sentence>& refs) {
  double log_sum = 0.0;
  std::size_t hl = 0, rl = 0;
  for (std::size_t i = 0; i < hyps.size(); ++i) {
    hl += hyps[i].size();
    rl += refs[i].size();
  }
  for (std::size_t n = 1; n <= 4; ++n) {
    double match = 0.0, total = 0.0;
    for (std::size_t i = 0; i < hyps.size(); ++i) {
      const auto& h = hyps[i];
      const auto& r = refs[i];
      auto gram = [n](const Sentence& s, std::size_t at) { return Sentence(s.begin() + at, s.begin() + at + n); };
      if (h.size() < n) continue;
      std::vector<bool> used(r.size() >= n ? r.size() - n + 1 : 0, false);
      for (std::size_t a = 0; a + n <= h.size(); ++a) {
        total += 1.0;
        for (std::size_t b = 0; b < used.size(); ++b) {
          if (!used[b] && gram(r, b) == gram(h, a)) {
            used[b] = true;
            match += 1.0;
            break;
          }
        }
      }
    }
    if (match == 0.0) return 0.0;
    log_sum += std::log(match / total);
  }
  const double bp = hl >= rl ? 1.0 : std::exp(1.0 - static_cast<double>(rl) / static_cast<double>(hl));
  return bp * std::exp(log_sum / 4.0);
}

}  // namespace

TEST_CASE("bleu identity") {
  const std::vector<Sentence> s = {words("a b c d e"), words("x y z w")};
  const auto r = bleu(s, s);
  CHECK(r.bleu == 1.0);
  CHECK(r.brevity_penalty == 1.0);
  for (double p : r.precision) CHECK(p == 1.0);
}

TEST_CASE("bleu hand-computed pairs") {
  // One substitution in the middle: 5/6, 3/5, 2/4, 1/3.
  const std::vector<Sentence> h1 = {words("the cat sat on the mat")};
  const std::vector<Sentence> r1 = {words("the cat sat on a mat")};
  const auto a = bleu(h1, r1);
  CHECK(a.matches == std::array<std::size_t, 4>{5, 3, 2, 1});
  CHECK(a.totals == std::array<std::size_t, 4>{6, 5, 4, 3});
  CHECK(a.bleu == doctest::Approx(std::pow(1.0 / 12.0, 0.25)).epsilon(1e-12));

  // Substitution at the last position: 5/6, 4/5, 3/4, 2/3, bleu = (1/3)^(1/4).
  const std::vector<Sentence> r2 = {words("the cat sat on the hat")};
  const auto b = bleu(h1, r2);
  CHECK(b.precision[0] == doctest::Approx(5.0 / 6.0));
  CHECK(b.precision[1] == doctest::Approx(4.0 / 5.0));
  CHECK(b.precision[2] == doctest::Approx(3.0 / 4.0));
  CHECK(b.precision[3] == doctest::Approx(2.0 / 3.0));
  CHECK(b.brevity_penalty == 1.0);
  CHECK(std::abs(b.bleu - 0.7598) < 1e-4);
  CHECK(std::abs(b.bleu - std::pow(1.0 / 3.0, 0.25)) < 1e-12);
}

TEST_CASE("bleu clipping and brevity") {
  const std::vector<Sentence> h = {words("the the the the")};
  const std::vector<Sentence> r = {words("the cat")};
  const auto c = bleu(h, r);
  CHECK(c.precision[0] == 0.25);
  CHECK(c.precision[1] == 0.0);
  CHECK(c.bleu == 0.0);

  const std::vector<Sentence> shorter = {words("a b c d")};
  const std::vector<Sentence> longer = {words("a b c d e f")};
  const auto s = bleu(shorter, longer);
  CHECK(s.brevity_penalty == doctest::Approx(std::exp(1.0 - 6.0 / 4.0)));
  CHECK(s.bleu == doctest::Approx(std::exp(1.0 - 6.0 / 4.0)));

  const std::vector<Sentence> empty = {{}};
  CHECK(bleu(empty, longer).bleu == 0.0);
  CHECK_THROWS_AS(bleu(empty, std::vector<Sentence>{}), InputError);
}

TEST_CASE("bleu agrees with a naive scorer and is order invariant") {
  std::mt19937_64 gen(5);
  const std::vector<std::string> alphabet = {"a", "b", "c", "d", "e"};
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<Sentence> hyps, refs;
    const int n = 1 + static_cast<int>(gen() % 5);
    for (int i = 0; i < n; ++i) {
      Sentence h, r;
      for (std::size_t t = 0; t < 3 + gen() % 8; ++t) h.push_back(alphabet[gen() % 3]);
      for (std::size_t t = 0; t < 3 + gen() % 8; ++t) r.push_back(alphabet[gen() % 3]);
      hyps.push_back(h);
      refs.push_back(r);
    }
    const auto rep = bleu(hyps, refs);
    CHECK(std::abs(rep.bleu - naive_bleu(hyps, refs)) < 1e-12);
    CHECK(rep.bleu >= 0.0);
    CHECK(rep.bleu <= 1.0);
    CHECK(rep.brevity_penalty <= 1.0);

    std::vector<std::size_t> order(hyps.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::shuffle(order.begin(), order.end(), gen);
    std::vector<Sentence> ph, pr;
    for (std::size_t i : order) {
      ph.push_back(hyps[i]);
      pr.push_back(refs[i]);
    }
    CHECK(bleu(ph, pr).bleu == rep.bleu);
  }
}

TEST_CASE("bleu_lines tokenizes on whitespace") {
  const std::vector<std::string> h = {"the  cat sat on the hat"}, r = {"the cat sat on the hat "};
  CHECK(bleu_lines(h, r).bleu == 1.0);
}
