#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace dcnmt {

// Bijection between tokens and dense ids. Ids 0..3 are always
// <pad>, <unk>, <s>, <eos>. Domain tags may be appended as atomic symbols
// (Token mode); they are tracked separately from corpus words.
class Vocabulary {
 public:
  static constexpr int kPad = 0;
  static constexpr int kUnk = 1;
  static constexpr int kBos = 2;
  static constexpr int kEos = 3;
  static constexpr std::size_t kNumReserved = 4;

  Vocabulary();

  // Keeps the max_size − 4 most frequent tokens, ties broken
  // lexicographically. Throws ParameterError unless max_size > 4.
  static Vocabulary build(const std::vector<std::vector<std::string>>& corpus,
                          std::size_t max_size);
  // Rebuilds from tokens listed in id order; the first four must be the
  // reserved symbols.
  static Vocabulary from_tokens(const std::vector<std::string>& tokens);

  std::size_t size() const { return tokens_.size(); }
  int lookup(std::string_view token) const;
  std::optional<int> find(std::string_view token) const;
  const std::string& token(int id) const;
  bool contains(std::string_view token) const { return find(token).has_value(); }
  // True for corpus words, false for reserved symbols and domain tags.
  bool contains_word(std::string_view token) const;
  bool is_tag_symbol(int id) const;

  // Appends a symbol and returns its id (existing id if already present).
  int add(const std::string& token);
  int add_tag_symbol(const std::string& token);

  std::vector<int> encode(std::span<const std::string> tokens) const;
  // Drops <pad>, <s> and <eos>.
  std::vector<std::string> decode(std::span<const int> ids) const;

  const std::vector<std::string>& tokens() const { return tokens_; }

  void write(std::ostream& os) const;
  static Vocabulary read(std::istream& is);
  void save(const std::filesystem::path& path) const;
  static Vocabulary load(const std::filesystem::path& path);

  friend bool operator==(const Vocabulary& a, const Vocabulary& b) {
    return a.tokens_ == b.tokens_ && a.tag_symbols_ == b.tag_symbols_;
  }

 private:
  std::vector<std::string> tokens_;
  std::vector<char> tag_symbols_;
  std::unordered_map<std::string, int> ids_;
};

}  // namespace dcnmt
