#pragma once

#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

namespace dcnmt {

// Byte-pair encoding merge table. Non-final subwords of a word carry the
// "@@" continuation suffix; the final subword carries none.
class BpeModel {
 public:
  using Merge = std::pair<std::string, std::string>;
  static constexpr std::string_view kMarker = "@@";
  static constexpr std::string_view kHeader = "#version: dc-bpe 1";

  BpeModel() = default;
  explicit BpeModel(std::vector<Merge> merges);

  const std::vector<Merge>& merges() const { return merges_; }

  // Tokens passed through unsplit (domain tags in Token mode).
  void protect(const std::string& token) { protected_.insert(token); }
  bool is_protected(std::string_view token) const;

  std::vector<std::string> apply_word(std::string_view word) const;
  std::vector<std::string> apply(std::span<const std::string> words) const;
  std::vector<std::string> apply(std::string_view sentence) const;

  void write(std::ostream& os) const;
  static BpeModel read(std::istream& is);
  void save(const std::filesystem::path& path) const;
  static BpeModel load(const std::filesystem::path& path);

 private:
  std::vector<Merge> merges_;
  std::unordered_map<std::string, std::size_t> rank_;
  std::unordered_set<std::string> protected_;
};

// Greedy most-frequent-pair learning over the words of a whitespace-tokenized
// corpus. Pair counts are recomputed after every merge; equal counts go to the
// lexicographically smallest pair. Stops early when no pair is left.
BpeModel learn_bpe(const std::vector<std::vector<std::string>>& corpus, std::size_t num_merges);

// Splits a word into UTF-8 code points.
std::vector<std::string> split_characters(std::string_view word);

// Inverse of BpeModel::apply: glues every "x@@" onto the following subword.
std::vector<std::string> remove_bpe(std::span<const std::string> subwords);

}  // namespace dcnmt
