#pragma once

#include <array>
#include <span>
#include <string>
#include <vector>

namespace dcnmt {

using Sentence = std::vector<std::string>;

struct BleuReport {
  std::array<double, 4> precision{};  // clipped n-gram precision, n = 1..4
  std::array<std::size_t, 4> matches{};
  std::array<std::size_t, 4> totals{};
  double brevity_penalty = 1.0;
  double bleu = 0.0;  // in [0, 1]
  std::size_t hyp_len = 0;
  std::size_t ref_len = 0;
};

// Corpus-level BLEU with a single reference per segment, case-sensitive and
// unsmoothed. Counts are summed over segments before taking ratios.
BleuReport bleu(std::span<const Sentence> hypotheses, std::span<const Sentence> references);

// Convenience overload over whitespace-tokenized lines.
BleuReport bleu_lines(std::span<const std::string> hypotheses,
                      std::span<const std::string> references);

}  // namespace dcnmt
