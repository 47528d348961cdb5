#include "kbqa/vocabulary.hpp"

#include <istream>
#include <ostream>
#include <stdexcept>

namespace kbqa {

Vocabulary::Vocabulary() {
  tokens_.emplace_back(kOovToken);
}

std::uint32_t Vocabulary::add(std::string_view token) {
  if (token.find('\n') != std::string_view::npos) {
    throw std::invalid_argument("vocabulary tokens cannot contain newlines");
  }
  if (const auto it = ids_.find(std::string(token)); it != ids_.end()) {
    return it->second;
  }
  const auto id = static_cast<std::uint32_t>(tokens_.size());
  tokens_.emplace_back(token);
  ids_.emplace(tokens_.back(), id);
  return id;
}

std::uint32_t Vocabulary::lookup(std::string_view token) const {
  const auto it = ids_.find(std::string(token));
  return it == ids_.end() ? kOov : it->second;
}

bool Vocabulary::contains(std::string_view token) const {
  return ids_.contains(std::string(token));
}

void Vocabulary::save(std::ostream& out) const {
  for (const auto& t : tokens_) out << t << '\n';
}

Vocabulary Vocabulary::load(std::istream& in) {
  Vocabulary vocab;
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (first) {
      first = false;
      continue;
    }
    const auto expected = static_cast<std::uint32_t>(vocab.size());
    if (vocab.add(line) != expected) {
      throw std::runtime_error("duplicate token in vocabulary file: " + line);
    }
  }
  return vocab;
}

}  // namespace kbqa
