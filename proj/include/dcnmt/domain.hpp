#pragma once

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace dcnmt {

class Vocabulary;

// How a model receives domain information.
enum class Mode {
  single,   // trained on one domain only, no domain input
  join,     // all domains concatenated, no domain input
  token,    // domain tag appended to the source sentence
  feature,  // domain tag embedded alongside every source position
};

std::string_view to_string(Mode mode);
Mode parse_mode(std::string_view text);
inline bool uses_domain(Mode m) { return m == Mode::token || m == Mode::feature; }

// Ordered domain names with ids 0..K−1. Surface form of a tag is "@NAME@".
class DomainTagSet {
 public:
  DomainTagSet() = default;
  // Accepts bare names ("MED") or surface forms ("@MED@").
  explicit DomainTagSet(const std::vector<std::string>& names);

  std::size_t size() const { return names_.size(); }
  bool empty() const { return names_.empty(); }
  const std::string& name(int id) const;
  std::string surface(int id) const;
  // Throws TagError for unknown tags.
  int id_of(std::string_view name_or_surface) const;
  std::optional<int> find(std::string_view name_or_surface) const;
  const std::vector<std::string>& names() const { return names_; }

  static std::string surface_form(std::string_view name);
  static bool is_surface_form(std::string_view token);
  static std::string bare_name(std::string_view name_or_surface);

  friend bool operator==(const DomainTagSet&, const DomainTagSet&) = default;

 private:
  std::vector<std::string> names_;
};

// Throws CollisionError if any tag surface form is a word of `words`.
void check_disjoint(const Vocabulary& words, const DomainTagSet& tags);

// Appends the tag's surface form as the last token.
std::vector<std::string> inject_token(std::span<const std::string> src, const DomainTagSet& tags,
                                      int tag, const Vocabulary& words);

// One tag id per source token.
std::vector<int> annotate_features(std::span<const std::string> src, const DomainTagSet& tags,
                                   int tag);

}  // namespace dcnmt
