#include "dcnmt/pipeline.hpp"

namespace dcnmt {

Pipeline build_pipeline(std::span<const LabeledPair> train, std::size_t num_merges,
                        std::size_t max_vocab) {
  std::vector<std::vector<std::string>> sides;
  sides.reserve(train.size() * 2);
  for (const auto& p : train) {
    sides.push_back(p.src);
    sides.push_back(p.tgt);
  }
  Pipeline out;
  out.tags = DomainTagSet(domains_in_order(train));
  out.bpe = learn_bpe(sides, num_merges);
  for (const auto& name : out.tags.names()) out.bpe.protect(DomainTagSet::surface_form(name));
  std::vector<std::vector<std::string>> split;
  split.reserve(sides.size());
  for (const auto& s : sides) split.push_back(out.bpe.apply(s));
  out.vocab = Vocabulary::build(split, max_vocab);
  check_disjoint(out.vocab, out.tags);
  return out;
}

LabeledPair apply_bpe(const LabeledPair& pair, const BpeModel& bpe) {
  LabeledPair out;
  out.domain = pair.domain;
  out.src = bpe.apply(pair.src);
  out.tgt = bpe.apply(pair.tgt);
  return out;
}

std::vector<LabeledPair> apply_bpe(std::span<const LabeledPair> pairs, const BpeModel& bpe) {
  std::vector<LabeledPair> out;
  out.reserve(pairs.size());
  for (const auto& p : pairs) out.push_back(apply_bpe(p, bpe));
  return out;
}

Vocabulary vocab_for_mode(const Vocabulary& words, const DomainTagSet& tags, Mode mode) {
  check_disjoint(words, tags);
  Vocabulary vocab = words;
  if (mode == Mode::token) {
    for (std::size_t k = 0; k < tags.size(); ++k) vocab.add_tag_symbol(tags.surface(static_cast<int>(k)));
  }
  return vocab;
}

std::vector<AnnotatedPair> prepare_pairs(std::span<const LabeledPair> subword_pairs, Mode mode,
                                         const Vocabulary& vocab, const DomainTagSet& tags) {
  std::vector<AnnotatedPair> out;
  out.reserve(subword_pairs.size());
  for (const auto& p : subword_pairs) {
    out.push_back(to_annotated_pair(annotate(p, mode, tags, vocab), mode, vocab, tags));
  }
  return out;
}

std::vector<int> encode_words(const BpeModel& bpe, const Vocabulary& vocab,
                              std::span<const std::string> words) {
  const auto units = bpe.apply(words);
  return vocab.encode(units);
}

std::vector<std::string> translate_words(const Model& model, const BpeModel& bpe,
                                         std::span<const std::string> words,
                                         std::optional<int> domain) {
  if (words.empty()) return {};
  const auto ids = encode_words(bpe, model.config.vocab, words);
  const auto out = greedy_decode(model, ids, domain);
  const auto units = model.config.vocab.decode(out);
  return remove_bpe(units);
}

}  // namespace dcnmt
