#include "dcnmt/corpus.hpp"

#include <algorithm>
#include <fstream>
#include <istream>
#include <ostream>

#include "dcnmt/error.hpp"

namespace dcnmt {

std::vector<std::string> split_tokens(std::string_view line) {
  std::vector<std::string> tokens;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t' || line[i] == '\r')) ++i;
    std::size_t j = i;
    while (j < line.size() && line[j] != ' ' && line[j] != '\t' && line[j] != '\r') ++j;
    if (j > i) tokens.emplace_back(line.substr(i, j - i));
    i = j;
  }
  return tokens;
}

std::string join_tokens(std::span<const std::string> tokens) {
  std::string out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i) out.push_back(' ');
    out.append(tokens[i]);
  }
  return out;
}

std::vector<std::vector<std::string>> read_corpus(std::istream& is) {
  std::vector<std::vector<std::string>> corpus;
  std::string line;
  while (std::getline(is, line)) corpus.push_back(split_tokens(line));
  return corpus;
}

std::vector<std::vector<std::string>> read_corpus(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw InputError("cannot read corpus " + path.string());
  return read_corpus(is);
}

std::vector<LabeledPair> read_labeled(std::istream& is) {
  std::vector<LabeledPair> pairs;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> cols;
    std::size_t start = 0;
    while (true) {
      const auto tab = line.find('\t', start);
      cols.push_back(line.substr(start, tab == std::string::npos ? std::string::npos : tab - start));
      if (tab == std::string::npos) break;
      start = tab + 1;
    }
    if (cols.size() != 3 && cols.size() != 4) {
      throw FormatError("labeled corpus line " + std::to_string(line_no) +
                        ": expected domain<TAB>source<TAB>target, got " +
                        std::to_string(cols.size()) + " columns");
    }
    LabeledPair p;
    p.domain = DomainTagSet::bare_name(cols[0]);
    p.src = split_tokens(cols[1]);
    p.tgt = split_tokens(cols[2]);
    if (cols.size() == 4) p.features = split_tokens(cols[3]);
    pairs.push_back(std::move(p));
  }
  return pairs;
}

std::vector<LabeledPair> read_labeled(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw InputError("cannot read labeled corpus " + path.string());
  return read_labeled(is);
}

void write_labeled(std::ostream& os, std::span<const LabeledPair> pairs) {
  for (const auto& p : pairs) {
    os << p.domain << '\t' << join_tokens(p.src) << '\t' << join_tokens(p.tgt);
    if (!p.features.empty()) os << '\t' << join_tokens(p.features);
    os << '\n';
  }
}

void write_labeled(const std::filesystem::path& path, std::span<const LabeledPair> pairs) {
  std::ofstream os(path);
  if (!os) throw InputError("cannot write labeled corpus " + path.string());
  write_labeled(os, pairs);
}

std::vector<std::string> domains_in_order(std::span<const LabeledPair> pairs) {
  std::vector<std::string> names;
  for (const auto& p : pairs) {
    if (std::find(names.begin(), names.end(), p.domain) == names.end()) names.push_back(p.domain);
  }
  return names;
}

LabeledPair annotate(const LabeledPair& pair, Mode mode, const DomainTagSet& tags,
                     const Vocabulary& words) {
  LabeledPair out = pair;
  out.features.clear();
  if (!uses_domain(mode)) return out;
  const int tag = tags.id_of(pair.domain);
  if (mode == Mode::token) {
    out.src = inject_token(pair.src, tags, tag, words);
  } else {
    for (int id : annotate_features(pair.src, tags, tag)) out.features.push_back(tags.name(id));
  }
  return out;
}

AnnotatedPair to_annotated_pair(const LabeledPair& annotated, Mode mode, const Vocabulary& vocab,
                                const DomainTagSet& tags) {
  if (annotated.src.empty() || annotated.tgt.empty()) {
    throw InputError("empty source or target sentence in training data");
  }
  AnnotatedPair p;
  p.domain = uses_domain(mode) ? tags.id_of(annotated.domain) : tags.find(annotated.domain).value_or(0);
  p.src = vocab.encode(annotated.src);
  p.src.push_back(Vocabulary::kEos);
  p.tgt = vocab.encode(annotated.tgt);
  p.tgt.push_back(Vocabulary::kEos);
  if (mode == Mode::feature) {
    if (annotated.features.size() != annotated.src.size()) {
      throw AnnotationError("feature sequence of length " +
                            std::to_string(annotated.features.size()) + " for a source of length " +
                            std::to_string(annotated.src.size()));
    }
    for (const auto& f : annotated.features) p.src_features.push_back(tags.id_of(f));
    p.src_features.push_back(p.domain);
  }
  return p;
}

FramedSource frame_source(std::span<const int> word_ids, std::optional<int> domain, Mode mode,
                          const Vocabulary& vocab, const DomainTagSet& tags) {
  FramedSource f;
  f.ids.assign(word_ids.begin(), word_ids.end());
  if (uses_domain(mode)) {
    if (!domain) throw TagError(std::string(to_string(mode)) + " mode needs a domain tag");
    tags.name(*domain);
    if (mode == Mode::token) {
      auto id = vocab.find(tags.surface(*domain));
      if (!id) throw TagError("tag " + tags.surface(*domain) + " missing from the model vocabulary");
      f.ids.push_back(*id);
    }
  }
  f.ids.push_back(Vocabulary::kEos);
  if (mode == Mode::feature) f.features.assign(f.ids.size(), *domain);
  return f;
}

}  // namespace dcnmt
