#pragma once

// Independent reference implementations used by unit and acceptance tests.
// They trade speed for obviousness and share no code paths with the library
// beyond plain data accessors.

#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "kbqa/entity_linker.hpp"
#include "kbqa/kb_store.hpp"
#include "kbqa/tensor.hpp"

namespace kbqa::testing {

/// Enumerates every pair of equal-length substrings. Among the longest common
/// runs picks the largest q end, then the smallest e start.
template <typename T>
std::optional<LccsSpan> brute_lccs(std::span<const T> q, std::span<const T> e) {
  std::optional<LccsSpan> best;
  for (std::size_t qs = 0; qs < q.size(); ++qs) {
    for (std::size_t qe = qs + 1; qe <= q.size(); ++qe) {
      const auto len = qe - qs;
      for (std::size_t es = 0; es + len <= e.size(); ++es) {
        bool equal = true;
        for (std::size_t k = 0; k < len && equal; ++k) equal = q[qs + k] == e[es + k];
        if (!equal) continue;
        const LccsSpan cand{qs, qe, es, es + len, len};
        const bool better =
            !best || len > best->length ||
            (len == best->length &&
             (qe > best->q_end || (qe == best->q_end && es < best->e_start)));
        if (better) best = cand;
      }
    }
  }
  return best;
}

struct ScanCandidate {
  EntityIdx entity = 0;
  double score = 0.0;
};

/// Scores every named entity of the KB against the question words and ranks
/// by score descending, then entity id string ascending.
std::vector<ScanCandidate> full_scan_link(std::span<const WordId> q_words,
                                          const KnowledgeBase& kb, double alpha,
                                          double beta, std::size_t top_n);

/// Mean over unordered row pairs of squared cosine, by explicit loops.
double pairwise_diversity(const BasicMatrix<double>& w);

/// Pearson chi-square statistic of observed counts against a uniform
/// expectation.
double chi_square_uniform(std::span<const std::size_t> counts);

/// Upper critical value of chi-square with `df` degrees of freedom at the
/// normal quantile z (Wilson-Hilferty approximation).
double chi_square_critical(std::size_t df, double z = 3.09);

struct GradCheckReport {
  std::size_t checked = 0;
  std::size_t excluded = 0;
  std::size_t failures = 0;
  double max_rel_error = 0.0;
  std::string worst;
};

/// Central finite differences over every coordinate of `params` for the
/// scalar built by `build`. Coordinates whose +h or -h evaluation takes a
/// different discrete decision record than the base point are excluded.
GradCheckReport check_gradients(std::span<BasicParameter<double>* const> params,
                                const std::function<VarId(BasicTape<double>&)>& build,
                                double h = 1e-5, double tolerance = 1e-3);

/// Relative error with a floor on the denominator.
double relative_error(double analytic, double numeric);

/// Builds a KB from in-memory TSV text.
KnowledgeBase make_kb(std::string_view triples, std::string_view names,
                      std::vector<IngestError>* errors = nullptr);

/// Random KB: `entities` names of 1-4 tokens over a vocabulary of
/// `vocab` words, and a few facts per entity over `predicates` predicates.
struct RandomKbText {
  std::string triples;
  std::string names;
  std::vector<std::string> words;
};
RandomKbText random_kb_text(std::size_t entities, std::size_t predicates,
                            std::size_t vocab, std::mt19937_64& rng);

}  // namespace kbqa::testing
