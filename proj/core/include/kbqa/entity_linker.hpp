#pragma once

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "kbqa/kb_store.hpp"

namespace kbqa {

/// Placeholder that replaces the mention inside a pattern.
inline constexpr std::string_view kEntityMarker = "<e>";

/// Half-open token range [begin, end) into a question.
struct TokenSpan {
  std::size_t begin = 0;
  std::size_t end = 0;

  std::size_t size() const { return end - begin; }
  bool empty() const { return end <= begin; }
  friend bool operator==(const TokenSpan&, const TokenSpan&) = default;
};

/// Longest common contiguous run between a question and an entity name.
/// Offsets are half-open; `q_end` doubles as the 1-based position of the
/// run's last element in the question.
struct LccsSpan {
  std::size_t q_start = 0;
  std::size_t q_end = 0;
  std::size_t e_start = 0;
  std::size_t e_end = 0;
  std::size_t length = 0;

  friend bool operator==(const LccsSpan&, const LccsSpan&) = default;
};

struct ParsedQuestion {
  std::string text;
  std::vector<std::string> tokens;
  std::vector<WordId> words;

  std::size_t size() const { return tokens.size(); }
};

ParsedQuestion parse_question(std::string_view text, const Lexicon& lexicon);

/// Longest common contiguous run of two sequences, or nullopt when they share
/// no element. Among runs of maximal length the rightmost one in `q` wins,
/// then the one with the smallest start in `e`.
template <typename T>
std::optional<LccsSpan> longest_common_run(std::span<const T> q,
                                           std::span<const T> e);

std::optional<LccsSpan> lccs_words(std::span<const WordId> q,
                                   std::span<const WordId> e);
std::optional<LccsSpan> lccs_chars(std::string_view q, std::string_view e);

struct LinkerConfig {
  double alpha = 0.6;
  double beta = 0.3;
  std::size_t top_n = 20;
  /// Question words whose posting list is longer than this are skipped
  /// during retrieval. Zero means unlimited.
  std::size_t max_posting_len = 0;

  /// Throws std::invalid_argument unless alpha, beta in [0, 1],
  /// alpha + beta <= 1 and top_n >= 1.
  void validate() const;
};

/// Coverage-of-question, coverage-of-entity and end-position ratios.
struct LinkFactors {
  double a = 0.0;
  double b = 0.0;
  double c = 0.0;
};

double combine_factors(const LinkFactors& f, double alpha, double beta);
LinkFactors factors_for(const LccsSpan& span, std::size_t q_len,
                        std::size_t e_len);

struct MentionPair {
  TokenSpan mention;
  std::vector<std::string> pattern;
};

struct EntityCandidate {
  EntityIdx entity = 0;
  LccsSpan lccs;
  LinkFactors factors;
  double score = 0.0;
  TokenSpan mention;
  std::vector<std::string> pattern;
};

/// Scores one entity against a question. Mention and pattern stay empty.
std::optional<EntityCandidate> score_entity(std::span<const WordId> q_words,
                                            std::span<const WordId> e_words,
                                            const LinkerConfig& cfg);

std::vector<std::string> make_pattern(std::span<const std::string> tokens,
                                      TokenSpan mention);

/// Passive mention detection: the word-level run is widened by the entity
/// words that flank it (clamped to the question), falling back to a
/// character-level run grown to whitespace boundaries.
std::optional<MentionPair> detect_mention_passive(const ParsedQuestion& q,
                                                  const Entity& entity);

/// Union of posting lists for `words`, sorted and duplicate-free.
std::vector<EntityIdx> retrieve_candidates(std::span<const WordId> words,
                                           const NameIndex& index,
                                           std::size_t max_posting_len);

/// Orders by score descending, then entity id ascending, and truncates.
void rank_candidates(std::vector<EntityCandidate>& candidates,
                     const KnowledgeBase& kb, std::size_t top_n);

std::vector<EntityCandidate> link_passive(const ParsedQuestion& q,
                                          const NameIndex& index,
                                          const KnowledgeBase& kb,
                                          const LinkerConfig& cfg);

/// Retrieval restricted to the words of an externally supplied mention;
/// factors are still computed against the whole question and every
/// candidate carries the same (mention, pattern) pair.
std::vector<EntityCandidate> link_active(TokenSpan mention,
                                         const ParsedQuestion& q,
                                         const NameIndex& index,
                                         const KnowledgeBase& kb,
                                         const LinkerConfig& cfg);

/// Projects a known gold entity onto the question: the rightmost verbatim
/// occurrence of the full name, otherwise the passive detector.
std::optional<TokenSpan> project_gold_mention(const ParsedQuestion& q,
                                              const Entity& gold);

enum class Ablation { kNone, kNoA, kNoB, kNoC };

std::optional<Ablation> parse_ablation(std::string_view name);
std::string_view to_string(Ablation ablation);

struct LinkingExample {
  ParsedQuestion question;
  EntityIdx gold = 0;
  /// Set for active linking.
  std::optional<TokenSpan> mention;
};

struct TuneOptions {
  double grid_step = 0.05;
  std::size_t top_n = 20;
  std::size_t max_posting_len = 0;
  Ablation ablation = Ablation::kNone;
};

struct TuneResult {
  double alpha = 0.6;
  double beta = 0.3;
  std::size_t covered = 0;
  std::size_t total = 0;
  std::size_t grid_points = 0;
};

/// (alpha, beta) grid points on the simplex lattice with the given step,
/// restricted by the ablation: kNoA pins alpha = 0, kNoB pins beta = 0 and
/// kNoC pins alpha + beta = 1.
std::vector<std::pair<double, double>> weight_grid(double grid_step,
                                                   Ablation ablation);

/// Grid search maximizing top-N gold coverage. Ties keep the smaller alpha,
/// then the smaller beta. An empty dev set returns the default weights.
TuneResult tune_weights(std::span<const LinkingExample> dev,
                        const KnowledgeBase& kb, const NameIndex& index,
                        const TuneOptions& options);

/// One line of the linking-results export: question id followed by
/// tab-separated "entity-id:score" entries.
void write_linking_line(std::ostream& out, std::string_view question_id,
                        std::span<const EntityCandidate> candidates,
                        const KnowledgeBase& kb);

struct LinkingRecord {
  std::string question_id;
  std::vector<std::pair<std::string, double>> entries;
};

/// Parses the export format. Throws std::runtime_error on malformed entries.
std::vector<LinkingRecord> read_linking_results(std::istream& in);

}  // namespace kbqa
