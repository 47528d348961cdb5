#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "kbqa/question_io.hpp"

namespace kbqa {

struct SyntheticSpec {
  std::size_t entities = 100;
  std::size_t predicates = 12;
  /// Capped by the templates available for each handcrafted predicate.
  std::size_t templates_per_predicate = 3;
  std::size_t train_questions = 500;
  std::size_t dev_questions = 100;
  std::size_t test_questions = 100;
  /// Share of entities whose name starts with a dotted abbreviation that
  /// questions spell without dots ("u.k. tavor" asked as "uk tavor").
  double abbreviation_rate = 0.15;
  std::uint64_t seed = 7;
};

struct SyntheticTriple {
  std::string subject;
  std::string predicate;
  std::string object;
};

struct SyntheticCorpus {
  /// (id, name) pairs.
  std::vector<std::pair<std::string, std::string>> names;
  std::vector<SyntheticTriple> triples;
  std::vector<QuestionRecord> train;
  std::vector<QuestionRecord> dev;
  std::vector<QuestionRecord> test;
};

/// Deterministic for a given spec. Throws std::invalid_argument when a count
/// is zero.
SyntheticCorpus gen_synthetic(const SyntheticSpec& spec);

/// Writes triples.tsv, names.tsv, train.tsv, dev.tsv and test.tsv into `dir`.
void write_synthetic(const SyntheticCorpus& corpus,
                     const std::filesystem::path& dir);

}  // namespace kbqa
