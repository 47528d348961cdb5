#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "kbqa/entity_linker.hpp"
#include "kbqa/matchers.hpp"
#include "kbqa/pipeline.hpp"

namespace kbqa {

struct EvalReport {
  std::string metric;
  /// Candidate-list cutoff for coverage reports, 0 otherwise.
  std::size_t n = 0;
  std::size_t numerator = 0;
  std::size_t denominator = 0;
  /// numerator / denominator (0 for an empty denominator).
  double value = 0.0;
  std::map<std::string, std::string> config;

  static EvalReport make(std::string metric, std::size_t numerator,
                         std::size_t denominator, std::size_t n = 0,
                         std::map<std::string, std::string> config = {});

  friend bool operator==(const EvalReport&, const EvalReport&) = default;
};

/// "coverage@20: 81.0% (810/1000)".
std::string to_text(const EvalReport& report);

/// Tab-separated key=value fields; config keys get a "config." prefix.
std::string to_key_values(const EvalReport& report);

/// Inverse of to_key_values. Throws std::invalid_argument on malformed input.
EvalReport parse_key_values(std::string_view line);

/// Fraction of questions whose gold subject is among the first n candidates
/// of its list, one report per n. Questions without a resolvable gold subject
/// count as misses.
std::vector<EvalReport> coverage_at_n(
    std::span<const QaExample> questions,
    std::span<const std::vector<EntityIdx>> candidates,
    std::span<const std::size_t> n_values);

/// Questions whose prediction matches both gold subject and predicate ids.
/// Missing predictions count as wrong.
EvalReport qa_accuracy(std::span<const QuestionRecord> questions,
                       std::span<const PredictionRecord> predictions);

struct RcExample {
  std::string question_id;
  std::vector<std::string> pattern;
  PredicateIdx gold = 0;
  /// Other predicates of the gold subject, ascending.
  std::vector<PredicateIdx> negatives;
};

struct RcBuildStats {
  std::size_t unresolved = 0;
  std::size_t no_mention = 0;
  std::size_t single_predicate = 0;
};

/// Patterns come from the projected gold mention. Questions whose gold
/// subject has a single predicate are dropped.
std::vector<RcExample> build_rc_dataset(std::span<const QaExample> questions,
                                        const KnowledgeBase& kb,
                                        RcBuildStats* stats = nullptr);

void write_rc_dataset(std::ostream& out, std::span<const RcExample> examples,
                      const KnowledgeBase& kb);
std::vector<RcExample> read_rc_dataset(std::istream& in, const KnowledgeBase& kb);

/// Gold predicate must reach the strict maximum m_r; ties are wrong.
EvalReport rc_accuracy(std::span<const RcExample> examples,
                       const MatchModel& model, const KnowledgeBase& kb);

struct RcTrainConfig {
  std::size_t epochs = 10;
  double margin = 0.5;
  AdagradConfig optimizer;
  std::uint64_t seed = 1;
};

struct RcTrainResult {
  MatchModel model;
  std::vector<double> epoch_losses;
  std::vector<double> dev_accuracy;
  std::size_t best_epoch = 0;
};

/// Word-tower-only training: hinge loss on m_r(gold) against every negative
/// predicate, one Adagrad step per violating pair.
RcTrainResult train_relation_classifier(MatchModel model,
                                        std::span<const RcExample> train,
                                        std::span<const RcExample> dev,
                                        const KnowledgeBase& kb,
                                        const RcTrainConfig& cfg);

}  // namespace kbqa
