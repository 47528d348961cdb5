#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace kbqa {

/// Token <-> id table with id 0 reserved for out-of-vocabulary entries.
class Vocabulary {
 public:
  static constexpr std::uint32_t kOov = 0;
  static constexpr std::string_view kOovToken = "<unk>";

  Vocabulary();

  std::uint32_t add(std::string_view token);
  /// OOV tokens map to kOov.
  std::uint32_t lookup(std::string_view token) const;
  bool contains(std::string_view token) const;
  const std::string& token(std::uint32_t id) const { return tokens_.at(id); }
  std::size_t size() const { return tokens_.size(); }

  /// One token per line; the line number is the id.
  void save(std::ostream& out) const;
  static Vocabulary load(std::istream& in);

  friend bool operator==(const Vocabulary& a, const Vocabulary& b) {
    return a.tokens_ == b.tokens_;
  }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, std::uint32_t> ids_;
};

}  // namespace kbqa
