#include "kbqa/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <map>
#include <numeric>
#include <ostream>

#include <fmt/format.h>
#include <fmt/ostream.h>
#include <spdlog/spdlog.h>

#include "kbqa/text.hpp"

namespace kbqa {

std::optional<LinkMode> parse_link_mode(std::string_view name) {
  if (name == "passive") return LinkMode::kPassive;
  if (name == "active") return LinkMode::kActive;
  return std::nullopt;
}

std::string_view to_string(LinkMode mode) {
  return mode == LinkMode::kActive ? "active" : "passive";
}

std::vector<QaExample> prepare_examples(std::span<const QuestionRecord> records,
                                        const KnowledgeBase& kb) {
  std::vector<QaExample> out;
  out.reserve(records.size());
  std::size_t unresolved = 0;
  for (const auto& r : records) {
    QaExample ex;
    ex.id = r.id;
    ex.question = parse_question(r.text, kb.lexicon());
    ex.subject = kb.find_entity(r.subject);
    ex.predicate = kb.find_predicate(r.predicate);
    if (!ex.subject || !ex.predicate) {
      ++unresolved;
      spdlog::debug("question {}: gold subject or predicate not in the KB",
                    r.id);
    } else {
      ex.mention = project_gold_mention(ex.question, kb.entity(*ex.subject));
    }
    out.push_back(std::move(ex));
  }
  if (unresolved > 0) {
    spdlog::warn("{} of {} questions have an unresolvable gold fact",
                 unresolved, records.size());
  }
  return out;
}

std::vector<EntityCandidate> link_question(const QaExample& q,
                                           const KnowledgeBase& kb,
                                           const NameIndex& index,
                                           const LinkerConfig& cfg,
                                           LinkMode mode) {
  if (mode == LinkMode::kPassive) return link_passive(q.question, index, kb, cfg);
  if (!q.mention) return {};
  return link_active(*q.mention, q.question, index, kb, cfg);
}

std::vector<EntityCandidate> candidates_from_record(const LinkingRecord& record,
                                                    const ParsedQuestion& q,
                                                    const KnowledgeBase& kb,
                                                    std::size_t top_n) {
  std::vector<EntityCandidate> out;
  for (const auto& [id, score] : record.entries) {
    if (out.size() >= top_n) break;
    const auto idx = kb.find_entity(id);
    if (!idx) continue;
    auto pair = detect_mention_passive(q, kb.entity(*idx));
    if (!pair) continue;
    EntityCandidate cand;
    cand.entity = *idx;
    cand.score = score;
    cand.mention = pair->mention;
    cand.pattern = std::move(pair->pattern);
    out.push_back(std::move(cand));
  }
  return out;
}

std::pair<Vocabulary, Vocabulary> build_vocabularies(
    std::span<const QaExample> train, const KnowledgeBase& kb) {
  Vocabulary words;
  Vocabulary chars;
  words.add(kEntityMarker);
  const auto add_chars = [&](std::string_view s) {
    for (const char c : s) {
      if (c != '\n') chars.add(std::string_view(&c, 1));
    }
  };
  for (const auto& ex : train) {
    for (const auto& t : ex.question.tokens) words.add(t);
    add_chars(join_tokens(ex.question.tokens));
  }
  for (const auto& p : kb.predicates()) {
    for (const auto& t : p.tokens) words.add(t);
  }
  for (const auto& e : kb.entities()) add_chars(e.name);
  return {std::move(words), std::move(chars)};
}

FactPool build_fact_pool(std::vector<EntityCandidate> candidates,
                         const KnowledgeBase& kb) {
  FactPool pool;
  pool.candidates = std::move(candidates);
  for (std::size_t c = 0; c < pool.candidates.size(); ++c) {
    for (const auto f : kb.facts_of(pool.candidates[c].entity)) {
      pool.entries.push_back({f, c});
    }
  }
  return pool;
}

std::optional<TrainingGroup> sample_negatives(const FactPool& pool,
                                              const KnowledgeBase& kb,
                                              EntityIdx gold_subject,
                                              PredicateIdx gold_predicate,
                                              std::size_t n,
                                              std::mt19937_64& rng) {
  std::optional<std::size_t> positive;
  std::vector<std::size_t> others;
  for (std::size_t i = 0; i < pool.entries.size(); ++i) {
    const auto& f = kb.fact(pool.entries[i].fact);
    if (f.subject == gold_subject && f.predicate == gold_predicate) {
      if (!positive) positive = i;
    } else {
      others.push_back(i);
    }
  }
  if (!positive) return std::nullopt;
  const auto k = std::min(n, others.size());
  for (std::size_t i = 0; i < k; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, others.size() - 1);
    std::swap(others[i], others[pick(rng)]);
  }
  others.resize(k);
  return TrainingGroup{*positive, std::move(others)};
}

template <typename T>
std::optional<EncodedFact> encode_fact(const BasicMatchModel<T>& model,
                                       const ParsedQuestion& q,
                                       const EntityCandidate& candidate,
                                       const Fact& fact,
                                       const KnowledgeBase& kb) {
  const auto& subject = kb.entity(fact.subject);
  const auto& predicate = kb.predicate(fact.predicate);
  if (!subject.has_name() || candidate.mention.empty() ||
      candidate.mention.end > q.tokens.size() || predicate.tokens.empty()) {
    return std::nullopt;
  }
  const auto mention = join_tokens(std::span<const std::string>(q.tokens).subspan(
      candidate.mention.begin, candidate.mention.size()));
  EncodedFact out;
  out.entity_chars = model.encode_chars(subject.name);
  out.mention_chars = model.encode_chars(mention);
  out.predicate_words = model.encode_words(predicate.tokens);
  out.pattern_words = model.encode_words(candidate.pattern);
  out.s_e = candidate.score;
  return out;
}

template <typename T>
VarId fact_score(BasicTape<T>& tape, BasicMatchModel<T>& model,
                 const EncodedFact& fact, const PoolingConfig& pooling) {
  const auto m_e = char_match(tape, model, fact.entity_chars, fact.mention_chars);
  const auto m_r = word_match(tape, model, fact.predicate_words,
                              fact.pattern_words, pooling);
  return add_constant(tape, add(tape, m_e, m_r), static_cast<T>(fact.s_e));
}

template <typename T>
VarId ranking_loss(BasicTape<T>& tape, BasicMatchModel<T>& model,
                   const EncodedFact& positive, const EncodedFact& negative,
                   T margin, const PoolingConfig& pooling) {
  const auto pos = fact_score(tape, model, positive, pooling);
  const auto neg = fact_score(tape, model, negative, pooling);
  return hinge_rank_loss(tape, margin, pos, neg);
}

namespace {

/// Per-question memo of m_e (by candidate) and m_r (by pattern, predicate).
/// Valid only while the model is unchanged.
class MatchCache {
 public:
  MatchCache(const MatchModel& model, const ParsedQuestion& q,
             const FactPool& pool, const KnowledgeBase& kb)
      : model_(model), q_(q), pool_(pool), kb_(kb) {
    std::map<std::vector<std::string>, std::size_t> ids;
    pattern_of_.reserve(pool.candidates.size());
    for (const auto& c : pool.candidates) {
      const auto [it, inserted] = ids.emplace(c.pattern, ids.size());
      pattern_of_.push_back(it->second);
    }
  }

  std::optional<ScoredFact> score(std::size_t entry) {
    const auto& e = pool_.entries[entry];
    const auto& cand = pool_.candidates[e.candidate];
    const auto& fact = kb_.fact(e.fact);
    const auto& subject = kb_.entity(fact.subject);
    const auto& predicate = kb_.predicate(fact.predicate);
    if (!subject.has_name() || cand.mention.empty() ||
        cand.mention.end > q_.tokens.size() || predicate.tokens.empty()) {
      spdlog::debug("question '{}': fact of {} is not scorable", q_.text,
                    subject.id);
      return std::nullopt;
    }
    auto me_it = m_e_.find(e.candidate);
    if (me_it == m_e_.end()) {
      const auto mention = join_tokens(std::span<const std::string>(q_.tokens)
                                           .subspan(cand.mention.begin,
                                                    cand.mention.size()));
      me_it = m_e_.emplace(e.candidate,
                           char_match(model_, subject.name, mention)).first;
    }
    const auto key = std::make_pair(pattern_of_[e.candidate], fact.predicate);
    auto mr_it = m_r_.find(key);
    if (mr_it == m_r_.end()) {
      mr_it = m_r_.emplace(key, word_match(model_, predicate.tokens,
                                           cand.pattern, model_.pooling()))
                  .first;
    }
    ScoredFact out;
    out.fact = e.fact;
    out.candidate = e.candidate;
    out.m_e = me_it->second;
    out.m_r = mr_it->second;
    out.s_e = cand.score;
    out.s_t = out.m_e + out.m_r + out.s_e;
    return out;
  }

  void clear() {
    m_e_.clear();
    m_r_.clear();
  }

 private:
  const MatchModel& model_;
  const ParsedQuestion& q_;
  const FactPool& pool_;
  const KnowledgeBase& kb_;
  std::vector<std::size_t> pattern_of_;
  std::map<std::size_t, double> m_e_;
  std::map<std::pair<std::size_t, PredicateIdx>, double> m_r_;
};

}  // namespace

std::optional<ScoredFact> score_fact(const MatchModel& model,
                                     const ParsedQuestion& q,
                                     const FactPool& pool, std::size_t entry,
                                     const KnowledgeBase& kb) {
  MatchCache cache(model, q, pool, kb);
  return cache.score(entry);
}

std::vector<ScoredFact> score_pool(const MatchModel& model,
                                   const ParsedQuestion& q,
                                   const FactPool& pool,
                                   const KnowledgeBase& kb) {
  MatchCache cache(model, q, pool, kb);
  std::vector<ScoredFact> out;
  out.reserve(pool.entries.size());
  for (std::size_t i = 0; i < pool.entries.size(); ++i) {
    if (auto s = cache.score(i)) out.push_back(*s);
  }
  return out;
}

std::optional<ScoredFact> select_answer(std::span<const ScoredFact> scored,
                                        const KnowledgeBase& kb) {
  const ScoredFact* best = nullptr;
  for (const auto& s : scored) {
    if (best == nullptr || s.s_t > best->s_t) {
      best = &s;
      continue;
    }
    if (s.s_t < best->s_t) continue;
    const auto& a = kb.fact(s.fact);
    const auto& b = kb.fact(best->fact);
    const auto ka = std::tie(kb.entity(a.subject).id, kb.predicate(a.predicate).id);
    const auto kb_ = std::tie(kb.entity(b.subject).id, kb.predicate(b.predicate).id);
    if (ka < kb_) best = &s;
  }
  if (best == nullptr) return std::nullopt;
  return *best;
}

std::optional<ScoredFact> answer(const QaExample& q, const MatchModel& model,
                                 const KnowledgeBase& kb,
                                 const NameIndex& index,
                                 const LinkerConfig& linker, LinkMode mode) {
  const auto pool = build_fact_pool(link_question(q, kb, index, linker, mode), kb);
  const auto scored = score_pool(model, q.question, pool, kb);
  return select_answer(scored, kb);
}

void write_predictions(std::ostream& out, std::span<const Prediction> predictions,
                       const KnowledgeBase& kb) {
  for (const auto& p : predictions) {
    if (!p.answer) continue;
    const auto& f = kb.fact(p.answer->fact);
    fmt::print(out, "{}\t{}\t{}\t{:.6f}\n", p.question_id,
               kb.entity(f.subject).id, kb.predicate(f.predicate).id,
               p.answer->s_t);
  }
}

std::vector<PredictionRecord> read_predictions(std::istream& in) {
  std::vector<PredictionRecord> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::size_t start = 0;
    for (;;) {
      const auto tab = line.find('\t', start);
      fields.push_back(line.substr(start, tab - start));
      if (tab == std::string::npos) break;
      start = tab + 1;
    }
    if (fields.size() != 4) {
      throw std::runtime_error(
          fmt::format("predictions line {}: expected 4 fields", line_no));
    }
    PredictionRecord r{fields[0], fields[1], fields[2], 0.0};
    try {
      r.s_t = std::stod(fields[3]);
    } catch (const std::exception&) {
      throw std::runtime_error(
          fmt::format("predictions line {}: bad score '{}'", line_no, fields[3]));
    }
    out.push_back(std::move(r));
  }
  return out;
}

std::vector<Prediction> predict(std::span<const QaExample> questions,
                                const MatchModel& model,
                                const KnowledgeBase& kb, const NameIndex& index,
                                const LinkerConfig& linker, LinkMode mode) {
  std::vector<Prediction> out;
  out.reserve(questions.size());
  for (const auto& q : questions) {
    out.push_back({q.id, answer(q, model, kb, index, linker, mode)});
  }
  return out;
}

// --- Training --------------------------------------------------------------

namespace {

double dev_accuracy(std::span<const QaExample> dev, const MatchModel& model,
                    const KnowledgeBase& kb, const NameIndex& index,
                    const TrainConfig& cfg) {
  if (dev.empty()) return 0.0;
  std::size_t correct = 0;
  for (const auto& q : dev) {
    const auto a = answer(q, model, kb, index, cfg.linker, cfg.link_mode);
    if (!a || !q.subject || !q.predicate) continue;
    const auto& f = kb.fact(a->fact);
    if (f.subject == *q.subject && f.predicate == *q.predicate) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(dev.size());
}

struct PreparedTrainQuestion {
  const QaExample* example = nullptr;
  FactPool pool;
};

}  // namespace

TrainResult train(std::span<const QaExample> trainset,
                  std::span<const QaExample> devset, const KnowledgeBase& kb,
                  const NameIndex& index, const TrainConfig& cfg) {
  auto [words, chars] = build_vocabularies(trainset, kb);
  MatchModel model(std::move(words), std::move(chars), cfg.dims, cfg.pooling,
                   cfg.seed, cfg.sparse_embeddings);
  return train(std::move(model), trainset, devset, kb, index, cfg);
}

TrainResult train(MatchModel model, std::span<const QaExample> trainset,
                  std::span<const QaExample> devset, const KnowledgeBase& kb,
                  const NameIndex& index, const TrainConfig& cfg) {
  cfg.linker.validate();
  TrainResult result{model, {}, {}, 0, 0, false};
  const auto pooling = model.pooling();
  const auto dev = devset.first(cfg.dev_limit == 0
                                    ? devset.size()
                                    : std::min(cfg.dev_limit, devset.size()));

  std::vector<PreparedTrainQuestion> prepared;
  for (const auto& ex : trainset) {
    if (!ex.subject || !ex.predicate) {
      ++result.skipped_questions;
      continue;
    }
    auto pool = build_fact_pool(
        link_question(ex, kb, index, cfg.linker, cfg.link_mode), kb);
    const bool has_gold = std::any_of(
        pool.entries.begin(), pool.entries.end(), [&](const PoolEntry& e) {
          const auto& f = kb.fact(e.fact);
          return f.subject == *ex.subject && f.predicate == *ex.predicate;
        });
    if (!has_gold) {
      ++result.skipped_questions;
      spdlog::debug("question {}: gold fact not in the candidate pool", ex.id);
      continue;
    }
    prepared.push_back({&ex, std::move(pool)});
  }
  spdlog::info("training on {} questions ({} skipped: gold not retrievable)",
               prepared.size(), result.skipped_questions);

  std::mt19937_64 rng(cfg.seed ^ 0x9e3779b97f4a7c15ULL);
  std::vector<std::size_t> order(prepared.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  double best_dev = -1.0;
  const auto margin = static_cast<float>(cfg.margin);

  for (std::size_t epoch = 1; epoch <= cfg.epochs && !result.diverged; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double loss_sum = 0.0;
    std::size_t triples = 0;
    for (const auto qi : order) {
      const auto& pq = prepared[qi];
      const auto& ex = *pq.example;
      auto group = sample_negatives(pq.pool, kb, *ex.subject, *ex.predicate,
                                    cfg.negatives, rng);
      if (!group) continue;
      const auto encode = [&](std::size_t entry) {
        const auto& e = pq.pool.entries[entry];
        return encode_fact(model, ex.question, pq.pool.candidates[e.candidate],
                           kb.fact(e.fact), kb);
      };
      const auto positive = encode(group->positive);
      if (!positive) continue;
      MatchCache cache(model, ex.question, pq.pool, kb);
      auto pos_score = cache.score(group->positive);
      for (const auto neg_entry : group->negatives) {
        const auto neg_score = cache.score(neg_entry);
        if (!neg_score || !pos_score) continue;
        const double loss =
            std::max(0.0, cfg.margin + neg_score->s_t - pos_score->s_t);
        if (!std::isfinite(loss)) {
          spdlog::error("epoch {}: non-finite loss, stopping", epoch);
          result.diverged = true;
          break;
        }
        loss_sum += loss;
        ++triples;
        if (loss <= 0.0) continue;
        const auto negative = encode(neg_entry);
        if (!negative) continue;
        Tape tape;
        const auto root = ranking_loss(tape, model, *positive, *negative,
                                       margin, pooling);
        if (tape.scalar(root) <= 0.0F) continue;
        tape.backward(root);
        auto params = model.parameters();
        try {
          adagrad_step<float>(params, cfg.optimizer);
        } catch (const NumericError& e) {
          spdlog::error("epoch {}: {}; keeping the last finite parameters",
                        epoch, e.what());
          for (auto* p : params) p->clear_gradient();
          result.diverged = true;
          break;
        }
        cache.clear();
        pos_score = cache.score(group->positive);
      }
      if (result.diverged) break;
    }
    const double mean_loss =
        triples == 0 ? 0.0 : loss_sum / static_cast<double>(triples);
    result.epoch_losses.push_back(mean_loss);
    if (!dev.empty()) {
      const double acc = dev_accuracy(dev, model, kb, index, cfg);
      result.dev_accuracy.push_back(acc);
      spdlog::info("epoch {} loss {:.6f} dev accuracy {:.4f}", epoch, mean_loss,
                   acc);
      if (acc > best_dev) {
        best_dev = acc;
        result.model = model;
        result.best_epoch = epoch;
      }
    } else {
      spdlog::info("epoch {} loss {:.6f}", epoch, mean_loss);
    }
  }
  if (dev.empty()) {
    result.model = std::move(model);
    result.best_epoch = result.epoch_losses.size();
  }
  return result;
}

template std::optional<EncodedFact> encode_fact<float>(
    const BasicMatchModel<float>&, const ParsedQuestion&,
    const EntityCandidate&, const Fact&, const KnowledgeBase&);
template std::optional<EncodedFact> encode_fact<double>(
    const BasicMatchModel<double>&, const ParsedQuestion&,
    const EntityCandidate&, const Fact&, const KnowledgeBase&);
template VarId fact_score<float>(BasicTape<float>&, BasicMatchModel<float>&,
                                 const EncodedFact&, const PoolingConfig&);
template VarId fact_score<double>(BasicTape<double>&, BasicMatchModel<double>&,
                                  const EncodedFact&, const PoolingConfig&);
template VarId ranking_loss<float>(BasicTape<float>&, BasicMatchModel<float>&,
                                   const EncodedFact&, const EncodedFact&,
                                   float, const PoolingConfig&);
template VarId ranking_loss<double>(BasicTape<double>&, BasicMatchModel<double>&,
                                    const EncodedFact&, const EncodedFact&,
                                    double, const PoolingConfig&);

}  // namespace kbqa
