#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "kbqa/entity_linker.hpp"
#include "kbqa/kb_store.hpp"
#include "kbqa/matchers.hpp"
#include "kbqa/question_io.hpp"
#include "kbqa/tensor.hpp"

namespace kbqa {

enum class LinkMode { kPassive, kActive };

std::optional<LinkMode> parse_link_mode(std::string_view name);
std::string_view to_string(LinkMode mode);

struct TrainConfig {
  std::size_t negatives = 99;
  double margin = 0.5;
  AdagradConfig optimizer;
  ModelDims dims;
  PoolingConfig pooling;
  LinkerConfig linker;
  LinkMode link_mode = LinkMode::kPassive;
  std::size_t epochs = 10;
  std::uint64_t seed = 1;
  /// Dev questions scored after each epoch; 0 means all of them.
  std::size_t dev_limit = 0;
  bool sparse_embeddings = true;
};

/// A question resolved against the knowledge base.
struct QaExample {
  std::string id;
  ParsedQuestion question;
  std::optional<EntityIdx> subject;
  std::optional<PredicateIdx> predicate;
  /// Gold mention projected from the subject name (active linking).
  std::optional<TokenSpan> mention;
};

/// Resolves gold ids and projects gold mentions. Unknown ids are left empty
/// and logged.
std::vector<QaExample> prepare_examples(std::span<const QuestionRecord> records,
                                        const KnowledgeBase& kb);

/// Runs the linker selected by `mode`. Active mode without a mention yields
/// no candidates.
std::vector<EntityCandidate> link_question(const QaExample& q,
                                           const KnowledgeBase& kb,
                                           const NameIndex& index,
                                           const LinkerConfig& cfg,
                                           LinkMode mode);

/// Candidates rebuilt from an imported linking-results line. Scores come from
/// the file; mentions are recovered with the passive detector. Unknown ids
/// are dropped.
std::vector<EntityCandidate> candidates_from_record(const LinkingRecord& record,
                                                    const ParsedQuestion& q,
                                                    const KnowledgeBase& kb,
                                                    std::size_t top_n);

/// Word vocabulary: the entity marker, training question tokens and all
/// predicate tokens. Char vocabulary: bytes of training questions and entity
/// names.
std::pair<Vocabulary, Vocabulary> build_vocabularies(
    std::span<const QaExample> train, const KnowledgeBase& kb);

struct PoolEntry {
  FactIdx fact = 0;
  /// Index into FactPool::candidates.
  std::size_t candidate = 0;
};

struct FactPool {
  std::vector<EntityCandidate> candidates;
  std::vector<PoolEntry> entries;
};

/// All facts of every candidate subject, in candidate order.
FactPool build_fact_pool(std::vector<EntityCandidate> candidates,
                         const KnowledgeBase& kb);

struct TrainingGroup {
  std::size_t positive = 0;
  std::vector<std::size_t> negatives;
};

/// Draws up to `n` pool entries uniformly without replacement among facts
/// whose (subject, predicate) differs from the gold pair. The positive is the
/// first gold-equivalent entry. Nullopt when the gold pair is not in the pool.
std::optional<TrainingGroup> sample_negatives(const FactPool& pool,
                                              const KnowledgeBase& kb,
                                              EntityIdx gold_subject,
                                              PredicateIdx gold_predicate,
                                              std::size_t n,
                                              std::mt19937_64& rng);

/// Model inputs for one (question, fact) pair.
struct EncodedFact {
  std::vector<std::uint32_t> entity_chars;
  std::vector<std::uint32_t> mention_chars;
  std::vector<std::uint32_t> predicate_words;
  std::vector<std::uint32_t> pattern_words;
  double s_e = 0.0;
};

/// Nullopt when the subject has no name, the mention is empty or the
/// predicate has no tokens.
template <typename T>
std::optional<EncodedFact> encode_fact(const BasicMatchModel<T>& model,
                                       const ParsedQuestion& q,
                                       const EntityCandidate& candidate,
                                       const Fact& fact,
                                       const KnowledgeBase& kb);

/// s_t = m_e + m_r + s_e with s_e entering as a constant.
template <typename T>
VarId fact_score(BasicTape<T>& tape, BasicMatchModel<T>& model,
                 const EncodedFact& fact, const PoolingConfig& pooling);

/// max(0, margin + s_t(negative) - s_t(positive)).
template <typename T>
VarId ranking_loss(BasicTape<T>& tape, BasicMatchModel<T>& model,
                   const EncodedFact& positive, const EncodedFact& negative,
                   T margin, const PoolingConfig& pooling);

struct ScoredFact {
  FactIdx fact = 0;
  std::size_t candidate = 0;
  double m_e = 0.0;
  double m_r = 0.0;
  double s_e = 0.0;
  double s_t = 0.0;
};

std::optional<ScoredFact> score_fact(const MatchModel& model,
                                     const ParsedQuestion& q,
                                     const FactPool& pool,
                                     std::size_t entry,
                                     const KnowledgeBase& kb);

/// Scores every pool entry. m_e is computed once per candidate and m_r once
/// per (pattern, predicate). Unscorable entries are dropped.
std::vector<ScoredFact> score_pool(const MatchModel& model,
                                   const ParsedQuestion& q,
                                   const FactPool& pool,
                                   const KnowledgeBase& kb);

/// Highest s_t; ties go to the smaller (subject id, predicate id).
std::optional<ScoredFact> select_answer(std::span<const ScoredFact> scored,
                                        const KnowledgeBase& kb);

std::optional<ScoredFact> answer(const QaExample& q, const MatchModel& model,
                                 const KnowledgeBase& kb,
                                 const NameIndex& index,
                                 const LinkerConfig& linker, LinkMode mode);

struct Prediction {
  std::string question_id;
  std::optional<ScoredFact> answer;
};

/// Tab-separated question id, subject id, predicate id and s_t. Unanswered
/// questions are not written.
void write_predictions(std::ostream& out, std::span<const Prediction> predictions,
                       const KnowledgeBase& kb);

struct PredictionRecord {
  std::string question_id;
  std::string subject;
  std::string predicate;
  double s_t = 0.0;
};

std::vector<PredictionRecord> read_predictions(std::istream& in);

struct TrainResult {
  MatchModel model;
  std::vector<double> epoch_losses;
  std::vector<double> dev_accuracy;
  std::size_t best_epoch = 0;
  std::size_t skipped_questions = 0;
  bool diverged = false;
};

/// One Adagrad step per (question, positive, negative) triple with a nonzero
/// hinge loss; fresh negatives each epoch. With a dev set the model of the
/// best-scoring epoch is returned, otherwise the last one.
TrainResult train(std::span<const QaExample> trainset,
                  std::span<const QaExample> devset, const KnowledgeBase& kb,
                  const NameIndex& index, const TrainConfig& cfg);

/// Same loop starting from an existing model.
TrainResult train(MatchModel model, std::span<const QaExample> trainset,
                  std::span<const QaExample> devset, const KnowledgeBase& kb,
                  const NameIndex& index, const TrainConfig& cfg);

std::vector<Prediction> predict(std::span<const QaExample> questions,
                                const MatchModel& model,
                                const KnowledgeBase& kb, const NameIndex& index,
                                const LinkerConfig& linker, LinkMode mode);

}  // namespace kbqa
