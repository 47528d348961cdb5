#include "kbqa/kb_store.hpp"

#include <algorithm>
#include <istream>
#include <string>

#include <fmt/format.h>

#include "kbqa/text.hpp"

namespace kbqa {
namespace {

std::vector<std::string_view> split_tabs(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    const auto tab = line.find('\t', start);
    fields.push_back(line.substr(start, tab - start));
    if (tab == std::string_view::npos) break;
    start = tab + 1;
  }
  return fields;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

void report(std::vector<IngestError>* errors, std::string_view source,
            std::size_t line, std::string message) {
  if (errors != nullptr) {
    errors->push_back({std::string(source), line, std::move(message)});
  }
}

}  // namespace

WordId Lexicon::intern(std::string_view word) {
  if (auto it = ids_.find(std::string(word)); it != ids_.end()) {
    return it->second;
  }
  const auto id = static_cast<WordId>(words_.size());
  words_.emplace_back(word);
  ids_.emplace(words_.back(), id);
  return id;
}

std::optional<WordId> Lexicon::find(std::string_view word) const {
  if (auto it = ids_.find(std::string(word)); it != ids_.end()) {
    return it->second;
  }
  return std::nullopt;
}

WordId Lexicon::lookup(std::string_view word) const {
  return find(word).value_or(kUnknownWord);
}

KnowledgeBase KnowledgeBase::ingest(std::istream& triples, std::istream& names,
                                    std::vector<IngestError>* errors) {
  KnowledgeBase kb;
  std::string line;

  std::size_t line_no = 0;
  while (std::getline(names, line)) {
    ++line_no;
    const auto view = trim(line);
    if (view.empty()) continue;
    const auto fields = split_tabs(view);
    if (fields.size() != 2 || trim(fields[0]).empty()) {
      report(errors, "names", line_no,
             fmt::format("expected 2 tab-separated fields, got {}",
                         fields.size()));
      continue;
    }
    const auto id = trim(fields[0]);
    if (kb.entity_ids_.contains(std::string(id))) {
      report(errors, "names", line_no,
             fmt::format("duplicate name for entity '{}'", id));
      continue;
    }
    const auto idx = kb.intern_entity(id);
    auto& entity = kb.entities_[idx];
    entity.tokens = tokenize(fields[1]);
    entity.name = join_tokens(entity.tokens);
    entity.words.reserve(entity.tokens.size());
    for (const auto& tok : entity.tokens) {
      entity.words.push_back(kb.lexicon_.intern(tok));
    }
  }

  line_no = 0;
  while (std::getline(triples, line)) {
    ++line_no;
    const auto view = trim(line);
    if (view.empty()) continue;
    const auto fields = split_tabs(view);
    if (fields.size() != 3 || trim(fields[0]).empty() ||
        trim(fields[1]).empty() || trim(fields[2]).empty()) {
      report(errors, "triples", line_no,
             fmt::format("expected 3 non-empty tab-separated fields, got {}",
                         fields.size()));
      continue;
    }
    Fact fact;
    fact.subject = kb.intern_entity(trim(fields[0]));
    fact.predicate = kb.intern_predicate(trim(fields[1]));
    fact.object = kb.intern_entity(trim(fields[2]));
    kb.facts_.push_back(fact);
  }

  for (auto& predicate : kb.predicates_) {
    for (const auto& tok : predicate.tokens) kb.lexicon_.intern(tok);
  }
  kb.build_subject_index();
  return kb;
}

EntityIdx KnowledgeBase::intern_entity(std::string_view id) {
  auto [it, inserted] = entity_ids_.try_emplace(
      std::string(id), static_cast<EntityIdx>(entities_.size()));
  if (inserted) entities_.push_back(Entity{std::string(id), {}, {}, {}});
  return it->second;
}

PredicateIdx KnowledgeBase::intern_predicate(std::string_view id) {
  auto [it, inserted] = predicate_ids_.try_emplace(
      std::string(id), static_cast<PredicateIdx>(predicates_.size()));
  if (inserted) {
    predicates_.push_back(Predicate{std::string(id), tokenize_predicate(id)});
  }
  return it->second;
}

void KnowledgeBase::build_subject_index() {
  subject_offsets_.assign(entities_.size() + 1, 0);
  for (const auto& f : facts_) ++subject_offsets_[f.subject + 1];
  for (std::size_t i = 1; i < subject_offsets_.size(); ++i) {
    subject_offsets_[i] += subject_offsets_[i - 1];
  }
  subject_facts_.resize(facts_.size());
  auto cursor = subject_offsets_;
  for (std::size_t i = 0; i < facts_.size(); ++i) {
    subject_facts_[cursor[facts_[i].subject]++] = static_cast<FactIdx>(i);
  }
}

std::optional<EntityIdx> KnowledgeBase::find_entity(std::string_view id) const {
  if (auto it = entity_ids_.find(std::string(id)); it != entity_ids_.end()) {
    return it->second;
  }
  return std::nullopt;
}

std::optional<PredicateIdx> KnowledgeBase::find_predicate(
    std::string_view id) const {
  if (auto it = predicate_ids_.find(std::string(id));
      it != predicate_ids_.end()) {
    return it->second;
  }
  return std::nullopt;
}

std::span<const FactIdx> KnowledgeBase::facts_of(EntityIdx subject) const {
  if (subject >= entities_.size()) return {};
  const auto begin = subject_offsets_[subject];
  const auto end = subject_offsets_[subject + 1];
  return std::span<const FactIdx>(subject_facts_).subspan(begin, end - begin);
}

std::vector<Fact> KnowledgeBase::facts_by_subject(std::string_view id) const {
  std::vector<Fact> out;
  if (const auto idx = find_entity(id)) {
    for (const auto f : facts_of(*idx)) out.push_back(facts_[f]);
  }
  return out;
}

NameIndex NameIndex::build(const KnowledgeBase& kb) {
  NameIndex index;
  const auto vocab = kb.lexicon().size();
  index.offsets_.assign(vocab + 1, 0);

  std::vector<WordId> unique;
  auto unique_words = [&](const Entity& e) {
    unique.assign(e.words.begin(), e.words.end());
    std::sort(unique.begin(), unique.end());
    unique.erase(std::unique(unique.begin(), unique.end()), unique.end());
  };

  const auto entities = kb.entities();
  for (const auto& e : entities) {
    unique_words(e);
    for (const auto w : unique) ++index.offsets_[w + 1];
  }
  for (std::size_t i = 1; i < index.offsets_.size(); ++i) {
    index.offsets_[i] += index.offsets_[i - 1];
  }
  index.entities_.resize(index.offsets_.back());
  auto cursor = index.offsets_;
  // Entities are visited in catalog order, so each posting list comes out
  // sorted without a separate pass.
  for (std::size_t e = 0; e < entities.size(); ++e) {
    unique_words(entities[e]);
    for (const auto w : unique) {
      index.entities_[cursor[w]++] = static_cast<EntityIdx>(e);
    }
  }
  return index;
}

std::span<const EntityIdx> NameIndex::postings(WordId word) const {
  if (word == kUnknownWord || word + 1 >= offsets_.size()) return {};
  const auto begin = offsets_[word];
  return std::span<const EntityIdx>(entities_).subspan(
      begin, offsets_[word + 1] - begin);
}

}  // namespace kbqa
