#include "kbqa/text.hpp"

#include <algorithm>
#include <cctype>

namespace kbqa {
namespace {

bool is_word_byte(unsigned char c) {
  return std::isalnum(c) != 0 || c >= 0x80;
}

bool is_token_byte(unsigned char c) {
  return is_word_byte(c) || c == '.' || c == '\'' || c == '-' || c == '&';
}

std::string clean_token(std::string token) {
  auto strip = [](char c) { return c == '\'' || c == '-' || c == '.'; };
  while (!token.empty() && strip(token.front())) token.erase(token.begin());
  while (!token.empty() && (token.back() == '\'' || token.back() == '-')) {
    token.pop_back();
  }
  if (!token.empty() && token.back() == '.' &&
      std::count(token.begin(), token.end(), '.') == 1) {
    token.pop_back();
  }
  const bool has_word = std::any_of(token.begin(), token.end(), [](char c) {
    return is_word_byte(static_cast<unsigned char>(c));
  });
  if (!has_word) token.clear();
  return token;
}

}  // namespace

std::string to_lower_ascii(std::string_view text) {
  std::string out(text);
  for (auto& c : out) {
    const auto u = static_cast<unsigned char>(c);
    if (u < 0x80) c = static_cast<char>(std::tolower(u));
  }
  return out;
}

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  std::string current;
  auto flush = [&] {
    if (current.empty()) return;
    auto cleaned = clean_token(std::move(current));
    if (!cleaned.empty()) tokens.push_back(std::move(cleaned));
    current.clear();
  };
  for (char c : text) {
    const auto u = static_cast<unsigned char>(c);
    if (is_token_byte(u)) {
      current.push_back(u < 0x80 ? static_cast<char>(std::tolower(u)) : c);
    } else {
      flush();
    }
  }
  flush();
  return tokens;
}

std::string join_tokens(std::span<const std::string> tokens,
                        std::string_view separator) {
  std::string out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i != 0) out.append(separator);
    out.append(tokens[i]);
  }
  return out;
}

std::vector<std::string> tokenize_predicate(std::string_view predicate_id) {
  constexpr std::string_view kHost = "freebase.com";
  if (const auto pos = predicate_id.find(kHost); pos != std::string_view::npos) {
    predicate_id.remove_prefix(pos + kHost.size());
  }
  return tokenize(predicate_id);
}

}  // namespace kbqa
