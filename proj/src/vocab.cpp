#include "dcnmt/vocab.hpp"

#include <algorithm>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>

#include "dcnmt/domain.hpp"
#include "dcnmt/error.hpp"

namespace dcnmt {

namespace {
constexpr const char* kReserved[] = {"<pad>", "<unk>", "<s>", "<eos>"};
}

Vocabulary::Vocabulary() {
  for (const char* t : kReserved) add(t);
}

Vocabulary Vocabulary::build(const std::vector<std::vector<std::string>>& corpus,
                             std::size_t max_size) {
  if (max_size <= kNumReserved) {
    throw ParameterError("vocabulary size must exceed the 4 reserved symbols, got " +
                         std::to_string(max_size));
  }
  std::map<std::string, std::size_t> counts;
  for (const auto& sentence : corpus)
    for (const auto& tok : sentence) ++counts[tok];
  for (const char* t : kReserved) counts.erase(t);

  std::vector<std::pair<std::string, std::size_t>> ranked(counts.begin(), counts.end());
  // counts is ordered by token, so a stable sort keeps lexicographic ties.
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });

  Vocabulary vocab;
  for (const auto& [tok, n] : ranked) {
    if (vocab.size() >= max_size) break;
    vocab.add(tok);
  }
  return vocab;
}

Vocabulary Vocabulary::from_tokens(const std::vector<std::string>& tokens) {
  if (tokens.size() < kNumReserved) throw FormatError("vocabulary lacks reserved symbols");
  for (std::size_t i = 0; i < kNumReserved; ++i) {
    if (tokens[i] != kReserved[i]) {
      throw FormatError("vocabulary id " + std::to_string(i) + " must be " + kReserved[i] +
                        ", found '" + tokens[i] + "'");
    }
  }
  Vocabulary vocab;
  for (std::size_t i = kNumReserved; i < tokens.size(); ++i) {
    if (vocab.contains(tokens[i])) throw FormatError("duplicate vocabulary token '" + tokens[i] + "'");
    if (DomainTagSet::is_surface_form(tokens[i])) {
      vocab.add_tag_symbol(tokens[i]);
    } else {
      vocab.add(tokens[i]);
    }
  }
  return vocab;
}

int Vocabulary::lookup(std::string_view token) const {
  return find(token).value_or(kUnk);
}

std::optional<int> Vocabulary::find(std::string_view token) const {
  auto it = ids_.find(std::string(token));
  if (it == ids_.end()) return std::nullopt;
  return it->second;
}

const std::string& Vocabulary::token(int id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= tokens_.size()) {
    throw InputError("token id " + std::to_string(id) + " outside vocabulary of size " +
                     std::to_string(tokens_.size()));
  }
  return tokens_[static_cast<std::size_t>(id)];
}

bool Vocabulary::contains_word(std::string_view token) const {
  auto id = find(token);
  return id && static_cast<std::size_t>(*id) >= kNumReserved && !is_tag_symbol(*id);
}

bool Vocabulary::is_tag_symbol(int id) const {
  return id >= 0 && static_cast<std::size_t>(id) < tag_symbols_.size() &&
         tag_symbols_[static_cast<std::size_t>(id)];
}

int Vocabulary::add(const std::string& token) {
  if (auto id = find(token)) return *id;
  const int id = static_cast<int>(tokens_.size());
  tokens_.push_back(token);
  tag_symbols_.push_back(0);
  ids_.emplace(token, id);
  return id;
}

int Vocabulary::add_tag_symbol(const std::string& token) {
  const int id = add(token);
  tag_symbols_[static_cast<std::size_t>(id)] = 1;
  return id;
}

std::vector<int> Vocabulary::encode(std::span<const std::string> tokens) const {
  std::vector<int> ids;
  ids.reserve(tokens.size());
  for (const auto& t : tokens) ids.push_back(lookup(t));
  return ids;
}

std::vector<std::string> Vocabulary::decode(std::span<const int> ids) const {
  std::vector<std::string> out;
  for (int id : ids) {
    if (id == kPad || id == kBos || id == kEos) continue;
    out.push_back(token(id));
  }
  return out;
}

void Vocabulary::write(std::ostream& os) const {
  for (std::size_t i = 0; i < tokens_.size(); ++i) os << tokens_[i] << '\t' << i << '\n';
}

Vocabulary Vocabulary::read(std::istream& is) {
  std::vector<std::string> tokens;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    const auto tab = line.rfind('\t');
    if (tab == std::string::npos) throw FormatError("vocabulary line without a tab: '" + line + "'");
    const std::string id_text = line.substr(tab + 1);
    std::size_t id = 0;
    try {
      id = std::stoul(id_text);
    } catch (const std::exception&) {
      throw FormatError("bad vocabulary id '" + id_text + "'");
    }
    if (id != tokens.size()) throw FormatError("vocabulary ids must be dense and sorted");
    tokens.push_back(line.substr(0, tab));
  }
  return from_tokens(tokens);
}

void Vocabulary::save(const std::filesystem::path& path) const {
  std::ofstream os(path);
  if (!os) throw InputError("cannot write vocabulary " + path.string());
  write(os);
}

Vocabulary Vocabulary::load(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw InputError("cannot read vocabulary " + path.string());
  return read(is);
}

}  // namespace dcnmt
