#include "dcnmt/domain.hpp"

#include <algorithm>

#include "dcnmt/error.hpp"
#include "dcnmt/vocab.hpp"

namespace dcnmt {

std::string_view to_string(Mode mode) {
  switch (mode) {
    case Mode::single: return "single";
    case Mode::join: return "join";
    case Mode::token: return "token";
    case Mode::feature: return "feature";
  }
  return "?";
}

Mode parse_mode(std::string_view text) {
  if (text == "single") return Mode::single;
  if (text == "join") return Mode::join;
  if (text == "token") return Mode::token;
  if (text == "feature") return Mode::feature;
  throw ModeError("unknown mode '" + std::string(text) + "' (single|join|token|feature)");
}

DomainTagSet::DomainTagSet(const std::vector<std::string>& names) {
  for (const auto& n : names) {
    std::string bare = bare_name(n);
    if (bare.empty()) throw TagError("empty domain tag");
    if (std::find(names_.begin(), names_.end(), bare) != names_.end()) {
      throw TagError("duplicate domain tag '" + bare + "'");
    }
    names_.push_back(std::move(bare));
  }
}

const std::string& DomainTagSet::name(int id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= names_.size()) {
    throw TagError("unknown domain tag id " + std::to_string(id));
  }
  return names_[static_cast<std::size_t>(id)];
}

std::string DomainTagSet::surface(int id) const { return surface_form(name(id)); }

int DomainTagSet::id_of(std::string_view name_or_surface) const {
  if (auto id = find(name_or_surface)) return *id;
  throw TagError("unknown domain tag '" + std::string(name_or_surface) + "'");
}

std::optional<int> DomainTagSet::find(std::string_view name_or_surface) const {
  const std::string bare = bare_name(name_or_surface);
  auto it = std::find(names_.begin(), names_.end(), bare);
  if (it == names_.end()) return std::nullopt;
  return static_cast<int>(it - names_.begin());
}

std::string DomainTagSet::surface_form(std::string_view name) { return "@" + std::string(name) + "@"; }

bool DomainTagSet::is_surface_form(std::string_view token) {
  return token.size() >= 3 && token.front() == '@' && token.back() == '@' &&
         token.find('@', 1) == token.size() - 1;
}

std::string DomainTagSet::bare_name(std::string_view name_or_surface) {
  if (is_surface_form(name_or_surface)) {
    return std::string(name_or_surface.substr(1, name_or_surface.size() - 2));
  }
  return std::string(name_or_surface);
}

void check_disjoint(const Vocabulary& words, const DomainTagSet& tags) {
  for (std::size_t k = 0; k < tags.size(); ++k) {
    const std::string s = tags.surface(static_cast<int>(k));
    if (words.contains_word(s)) {
      throw CollisionError("domain tag " + s + " collides with a word of the vocabulary");
    }
  }
}

std::vector<std::string> inject_token(std::span<const std::string> src, const DomainTagSet& tags,
                                      int tag, const Vocabulary& words) {
  std::string surface = tags.surface(tag);
  if (words.contains_word(surface)) {
    throw CollisionError("domain tag " + surface + " collides with a word of the vocabulary");
  }
  std::vector<std::string> out(src.begin(), src.end());
  out.push_back(std::move(surface));
  return out;
}

std::vector<int> annotate_features(std::span<const std::string> src, const DomainTagSet& tags,
                                   int tag) {
  tags.name(tag);
  return std::vector<int>(src.size(), tag);
}

}  // namespace dcnmt
