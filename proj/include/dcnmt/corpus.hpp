#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "dcnmt/domain.hpp"
#include "dcnmt/vocab.hpp"

namespace dcnmt {

std::vector<std::string> split_tokens(std::string_view line);
std::string join_tokens(std::span<const std::string> tokens);

// One line of a labeled corpus: domain<TAB>source<TAB>target, with an
// optional fourth column of per-token source feature tags.
struct LabeledPair {
  std::string domain;
  std::vector<std::string> src;
  std::vector<std::string> tgt;
  std::vector<std::string> features;

  friend bool operator==(const LabeledPair&, const LabeledPair&) = default;
};

std::vector<std::vector<std::string>> read_corpus(std::istream& is);
std::vector<std::vector<std::string>> read_corpus(const std::filesystem::path& path);

std::vector<LabeledPair> read_labeled(std::istream& is);
std::vector<LabeledPair> read_labeled(const std::filesystem::path& path);
void write_labeled(std::ostream& os, std::span<const LabeledPair> pairs);
void write_labeled(const std::filesystem::path& path, std::span<const LabeledPair> pairs);

// Domain names in order of first appearance.
std::vector<std::string> domains_in_order(std::span<const LabeledPair> pairs);

// Training unit: source ids framed with the tag (Token mode) and <eos>,
// target ids ending in <eos>, and per-position source tags in Feature mode.
struct AnnotatedPair {
  std::vector<int> src;
  std::vector<int> tgt;
  int domain = 0;
  std::vector<int> src_features;
};

// Applies the mode's domain annotation to an already subword-split pair:
// Token mode appends the tag surface form, Feature mode fills `features`.
LabeledPair annotate(const LabeledPair& pair, Mode mode, const DomainTagSet& tags,
                     const Vocabulary& words);

// Converts an annotated labeled pair into ids. Throws InputError for empty
// sides and AnnotationError for feature-length mismatches.
AnnotatedPair to_annotated_pair(const LabeledPair& annotated, Mode mode, const Vocabulary& vocab,
                                const DomainTagSet& tags);

struct FramedSource {
  std::vector<int> ids;
  std::vector<int> features;
};

// Id-level framing used at translation time; the same result as annotate +
// to_annotated_pair for the source side.
FramedSource frame_source(std::span<const int> word_ids, std::optional<int> domain, Mode mode,
                          const Vocabulary& vocab, const DomainTagSet& tags);

}  // namespace dcnmt
