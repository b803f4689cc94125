#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dcnmt/bpe.hpp"
#include "dcnmt/corpus.hpp"
#include "dcnmt/domain.hpp"
#include "dcnmt/model.hpp"
#include "dcnmt/vocab.hpp"

namespace dcnmt {

// Joint source/target BPE and vocabulary learned from a training corpus.
struct Pipeline {
  BpeModel bpe;
  Vocabulary vocab;  // words only, no tag symbols
  DomainTagSet tags;
};

Pipeline build_pipeline(std::span<const LabeledPair> train, std::size_t num_merges,
                        std::size_t max_vocab);

// Splits both sides into subwords; the domain column is kept.
LabeledPair apply_bpe(const LabeledPair& pair, const BpeModel& bpe);
std::vector<LabeledPair> apply_bpe(std::span<const LabeledPair> pairs, const BpeModel& bpe);

// The model vocabulary for a mode: Token mode extends the word vocabulary
// with one symbol per tag. Throws CollisionError if a tag is already a word.
Vocabulary vocab_for_mode(const Vocabulary& words, const DomainTagSet& tags, Mode mode);

// Annotates subword pairs for the mode and maps them to ids.
std::vector<AnnotatedPair> prepare_pairs(std::span<const LabeledPair> subword_pairs, Mode mode,
                                         const Vocabulary& vocab, const DomainTagSet& tags);

// Raw words in, raw words out: BPE, greedy decoding, BPE removal.
std::vector<std::string> translate_words(const Model& model, const BpeModel& bpe,
                                         std::span<const std::string> words,
                                         std::optional<int> domain);

// Subword ids of a raw sentence under `vocab` (unknown units map to <unk>).
std::vector<int> encode_words(const BpeModel& bpe, const Vocabulary& vocab,
                              std::span<const std::string> words);

}  // namespace dcnmt
