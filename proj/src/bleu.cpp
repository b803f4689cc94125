#include "dcnmt/bleu.hpp"

#include <cmath>
#include <map>

#include "dcnmt/corpus.hpp"
#include "dcnmt/error.hpp"

namespace dcnmt {

namespace {

using NgramCounts = std::map<std::vector<std::string>, std::size_t>;

NgramCounts count_ngrams(const Sentence& s, std::size_t n) {
  NgramCounts counts;
  if (s.size() < n) return counts;
  for (std::size_t i = 0; i + n <= s.size(); ++i) {
    ++counts[std::vector<std::string>(s.begin() + static_cast<std::ptrdiff_t>(i),
                                      s.begin() + static_cast<std::ptrdiff_t>(i + n))];
  }
  return counts;
}

}  // namespace

BleuReport bleu(std::span<const Sentence> hypotheses, std::span<const Sentence> references) {
  if (hypotheses.size() != references.size()) {
    throw InputError("bleu: " + std::to_string(hypotheses.size()) + " hypotheses but " +
                     std::to_string(references.size()) + " references");
  }
  BleuReport report;
  for (std::size_t s = 0; s < hypotheses.size(); ++s) {
    const Sentence& hyp = hypotheses[s];
    const Sentence& ref = references[s];
    report.hyp_len += hyp.size();
    report.ref_len += ref.size();
    for (std::size_t n = 1; n <= 4; ++n) {
      const NgramCounts ref_counts = count_ngrams(ref, n);
      for (const auto& [gram, count] : count_ngrams(hyp, n)) {
        auto it = ref_counts.find(gram);
        if (it != ref_counts.end()) report.matches[n - 1] += std::min(count, it->second);
      }
      if (hyp.size() >= n) report.totals[n - 1] += hyp.size() - n + 1;
    }
  }

  double log_sum = 0.0;
  bool any_zero = false;
  for (std::size_t n = 0; n < 4; ++n) {
    report.precision[n] = report.totals[n] == 0
                              ? 0.0
                              : static_cast<double>(report.matches[n]) /
                                    static_cast<double>(report.totals[n]);
    if (report.precision[n] == 0.0) {
      any_zero = true;
    } else {
      log_sum += std::log(report.precision[n]);
    }
  }
  if (report.hyp_len == 0) {
    report.brevity_penalty = 0.0;
  } else if (report.hyp_len < report.ref_len) {
    report.brevity_penalty = std::exp(1.0 - static_cast<double>(report.ref_len) /
                                                static_cast<double>(report.hyp_len));
  }
  report.bleu = any_zero ? 0.0 : report.brevity_penalty * std::exp(log_sum / 4.0);
  return report;
}

BleuReport bleu_lines(std::span<const std::string> hypotheses,
                      std::span<const std::string> references) {
  std::vector<Sentence> hyp, ref;
  for (const auto& h : hypotheses) hyp.push_back(split_tokens(h));
  for (const auto& r : references) ref.push_back(split_tokens(r));
  return bleu(hyp, ref);
}

}  // namespace dcnmt
