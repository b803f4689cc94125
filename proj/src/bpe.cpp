#include "dcnmt/bpe.hpp"

#include <fstream>
#include <istream>
#include <limits>
#include <map>
#include <ostream>
#include <sstream>

#include "dcnmt/corpus.hpp"
#include "dcnmt/error.hpp"

namespace dcnmt {

namespace {

std::string pair_key(std::string_view a, std::string_view b) {
  std::string key;
  key.reserve(a.size() + b.size() + 1);
  key.append(a);
  key.push_back('\x1f');
  key.append(b);
  return key;
}

std::size_t utf8_length(unsigned char lead) {
  if (lead < 0x80) return 1;
  if ((lead >> 5) == 0x6) return 2;
  if ((lead >> 4) == 0xe) return 3;
  if ((lead >> 3) == 0x1e) return 4;
  return 1;
}

void merge_in_place(std::vector<std::string>& symbols, const std::string& a, const std::string& b) {
  std::vector<std::string> out;
  out.reserve(symbols.size());
  for (std::size_t i = 0; i < symbols.size(); ++i) {
    if (i + 1 < symbols.size() && symbols[i] == a && symbols[i + 1] == b) {
      out.push_back(a + b);
      ++i;
    } else {
      out.push_back(std::move(symbols[i]));
    }
  }
  symbols = std::move(out);
}

}  // namespace

std::vector<std::string> split_characters(std::string_view word) {
  std::vector<std::string> chars;
  for (std::size_t i = 0; i < word.size();) {
    const std::size_t n = std::min(utf8_length(static_cast<unsigned char>(word[i])), word.size() - i);
    chars.emplace_back(word.substr(i, n));
    i += n;
  }
  return chars;
}

BpeModel::BpeModel(std::vector<Merge> merges) : merges_(std::move(merges)) {
  for (std::size_t r = 0; r < merges_.size(); ++r) {
    rank_.emplace(pair_key(merges_[r].first, merges_[r].second), r);
  }
}

bool BpeModel::is_protected(std::string_view token) const {
  return protected_.count(std::string(token)) > 0;
}

std::vector<std::string> BpeModel::apply_word(std::string_view word) const {
  std::vector<std::string> symbols = split_characters(word);
  // Replaying the merge list in order is the same as repeatedly taking the
  // lowest-ranked adjacent pair whose rank is above the last one applied.
  std::size_t floor = 0;
  while (symbols.size() > 1) {
    std::size_t best = std::numeric_limits<std::size_t>::max();
    for (std::size_t i = 0; i + 1 < symbols.size(); ++i) {
      auto it = rank_.find(pair_key(symbols[i], symbols[i + 1]));
      if (it != rank_.end() && it->second >= floor && it->second < best) best = it->second;
    }
    if (best == std::numeric_limits<std::size_t>::max()) break;
    merge_in_place(symbols, merges_[best].first, merges_[best].second);
    floor = best + 1;
  }
  for (std::size_t i = 0; i + 1 < symbols.size(); ++i) symbols[i].append(kMarker);
  return symbols;
}

std::vector<std::string> BpeModel::apply(std::span<const std::string> words) const {
  std::vector<std::string> out;
  for (const auto& w : words) {
    if (is_protected(w)) {
      out.push_back(w);
      continue;
    }
    auto pieces = apply_word(w);
    out.insert(out.end(), std::make_move_iterator(pieces.begin()),
               std::make_move_iterator(pieces.end()));
  }
  return out;
}

std::vector<std::string> BpeModel::apply(std::string_view sentence) const {
  return apply(split_tokens(sentence));
}

void BpeModel::write(std::ostream& os) const {
  os << kHeader << '\n';
  for (const auto& [a, b] : merges_) os << a << ' ' << b << '\n';
}

BpeModel BpeModel::read(std::istream& is) {
  std::string line;
  if (!std::getline(is, line) || line != kHeader) {
    throw VersionError("BPE model must start with '" + std::string(kHeader) + "'");
  }
  std::vector<Merge> merges;
  std::size_t line_no = 1;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty()) continue;
    auto fields = split_tokens(line);
    if (fields.size() != 2) {
      throw FormatError("BPE model line " + std::to_string(line_no) + " must hold two symbols");
    }
    merges.emplace_back(std::move(fields[0]), std::move(fields[1]));
  }
  return BpeModel(std::move(merges));
}

void BpeModel::save(const std::filesystem::path& path) const {
  std::ofstream os(path);
  if (!os) throw InputError("cannot write BPE model " + path.string());
  write(os);
}

BpeModel BpeModel::load(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw InputError("cannot read BPE model " + path.string());
  return read(is);
}

BpeModel learn_bpe(const std::vector<std::vector<std::string>>& corpus, std::size_t num_merges) {
  std::map<std::string, std::size_t> word_counts;
  for (const auto& sentence : corpus)
    for (const auto& w : sentence) ++word_counts[w];
  if (word_counts.empty()) throw InputError("learn_bpe: empty corpus");

  std::vector<std::vector<std::string>> words;
  std::vector<std::size_t> freq;
  for (const auto& [w, n] : word_counts) {
    words.push_back(split_characters(w));
    freq.push_back(n);
  }

  std::vector<BpeModel::Merge> merges;
  while (merges.size() < num_merges) {
    std::map<BpeModel::Merge, std::size_t> pairs;
    for (std::size_t k = 0; k < words.size(); ++k) {
      const auto& s = words[k];
      for (std::size_t i = 0; i + 1 < s.size(); ++i) pairs[{s[i], s[i + 1]}] += freq[k];
    }
    if (pairs.empty()) break;
    auto best = pairs.begin();
    for (auto it = pairs.begin(); it != pairs.end(); ++it)
      if (it->second > best->second) best = it;
    const BpeModel::Merge chosen = best->first;
    for (auto& s : words) merge_in_place(s, chosen.first, chosen.second);
    merges.push_back(chosen);
  }
  return BpeModel(std::move(merges));
}

std::vector<std::string> remove_bpe(std::span<const std::string> subwords) {
  std::vector<std::string> words;
  std::string pending;
  bool open = false;
  for (const auto& s : subwords) {
    const bool cont = s.size() >= BpeModel::kMarker.size() &&
                      s.compare(s.size() - BpeModel::kMarker.size(), BpeModel::kMarker.size(),
                                BpeModel::kMarker) == 0;
    if (cont) {
      pending.append(s, 0, s.size() - BpeModel::kMarker.size());
      open = true;
    } else {
      pending.append(s);
      words.push_back(std::move(pending));
      pending.clear();
      open = false;
    }
  }
  if (open) words.push_back(std::move(pending));
  return words;
}

}  // namespace dcnmt
