#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace kbqa {

using EntityIdx = std::uint32_t;
using PredicateIdx = std::uint32_t;
using FactIdx = std::uint32_t;
using WordId = std::uint32_t;

/// Sentinel for question words that never occur in any name or predicate.
inline constexpr WordId kUnknownWord = 0xffffffffu;

/// Interns normalized tokens so names and questions compare by integer id.
class Lexicon {
 public:
  WordId intern(std::string_view word);
  std::optional<WordId> find(std::string_view word) const;
  /// Unknown words map to kUnknownWord.
  WordId lookup(std::string_view word) const;
  const std::string& word(WordId id) const { return words_.at(id); }
  std::size_t size() const { return words_.size(); }

 private:
  std::vector<std::string> words_;
  std::unordered_map<std::string, WordId> ids_;
};

struct Fact {
  EntityIdx subject = 0;
  PredicateIdx predicate = 0;
  EntityIdx object = 0;

  friend bool operator==(const Fact&, const Fact&) = default;
};

struct Entity {
  std::string id;
  /// Normalized name: tokens joined by single spaces. Empty when nameless.
  std::string name;
  std::vector<std::string> tokens;
  std::vector<WordId> words;

  bool has_name() const { return !tokens.empty(); }
};

struct Predicate {
  std::string id;
  std::vector<std::string> tokens;
};

struct IngestError {
  std::string source;
  std::size_t line = 0;
  std::string message;
};

/// In-memory triple store. Immutable after ingest; safe to share between
/// readers.
class KnowledgeBase {
 public:
  /// Names are read first so the catalog order follows the names file;
  /// ids seen only in triples are appended as nameless entities. Malformed
  /// lines are skipped and reported through `errors`.
  static KnowledgeBase ingest(std::istream& triples, std::istream& names,
                              std::vector<IngestError>* errors = nullptr);

  std::size_t entity_count() const { return entities_.size(); }
  std::size_t predicate_count() const { return predicates_.size(); }
  std::size_t fact_count() const { return facts_.size(); }

  const Entity& entity(EntityIdx idx) const { return entities_.at(idx); }
  const Predicate& predicate(PredicateIdx idx) const {
    return predicates_.at(idx);
  }
  std::span<const Entity> entities() const { return entities_; }
  std::span<const Predicate> predicates() const { return predicates_; }
  std::span<const Fact> facts() const { return facts_; }
  const Fact& fact(FactIdx idx) const { return facts_.at(idx); }

  std::optional<EntityIdx> find_entity(std::string_view id) const;
  std::optional<PredicateIdx> find_predicate(std::string_view id) const;

  /// Fact offsets with the given subject, in ingest order.
  std::span<const FactIdx> facts_of(EntityIdx subject) const;
  /// Facts with subject `id` in ingest order; empty for unknown ids.
  std::vector<Fact> facts_by_subject(std::string_view id) const;

  const Lexicon& lexicon() const { return lexicon_; }

 private:
  EntityIdx intern_entity(std::string_view id);
  PredicateIdx intern_predicate(std::string_view id);
  void build_subject_index();

  std::vector<Entity> entities_;
  std::vector<Predicate> predicates_;
  std::vector<Fact> facts_;
  std::unordered_map<std::string, EntityIdx> entity_ids_;
  std::unordered_map<std::string, PredicateIdx> predicate_ids_;
  // CSR layout: facts of subject e are subject_facts_[subject_offsets_[e] ..
  // subject_offsets_[e + 1]).
  std::vector<std::size_t> subject_offsets_;
  std::vector<FactIdx> subject_facts_;
  Lexicon lexicon_;
};

/// Inverted index word -> entities whose name contains the word.
class NameIndex {
 public:
  static NameIndex build(const KnowledgeBase& kb);

  /// Sorted, duplicate-free entity list; empty for unseen words.
  std::span<const EntityIdx> postings(WordId word) const;
  std::size_t word_count() const {
    return offsets_.empty() ? 0 : offsets_.size() - 1;
  }
  std::size_t posting_count() const { return entities_.size(); }

  friend bool operator==(const NameIndex&, const NameIndex&) = default;

 private:
  std::vector<std::size_t> offsets_;
  std::vector<EntityIdx> entities_;
};

}  // namespace kbqa
