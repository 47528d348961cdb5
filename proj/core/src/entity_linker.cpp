#include "kbqa/entity_linker.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>
#include <stdexcept>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "kbqa/text.hpp"

namespace kbqa {

ParsedQuestion parse_question(std::string_view text, const Lexicon& lexicon) {
  ParsedQuestion q;
  q.text = std::string(text);
  q.tokens = tokenize(text);
  q.words.reserve(q.tokens.size());
  for (const auto& t : q.tokens) q.words.push_back(lexicon.lookup(t));
  return q;
}

template <typename T>
std::optional<LccsSpan> longest_common_run(std::span<const T> q,
                                           std::span<const T> e) {
  if (q.empty() || e.empty()) return std::nullopt;
  std::vector<std::size_t> prev(e.size() + 1, 0);
  std::vector<std::size_t> cur(e.size() + 1, 0);
  LccsSpan best;
  for (std::size_t i = 1; i <= q.size(); ++i) {
    for (std::size_t j = 1; j <= e.size(); ++j) {
      if (q[i - 1] != e[j - 1]) {
        cur[j] = 0;
        continue;
      }
      const auto len = prev[j - 1] + 1;
      cur[j] = len;
      const auto e_start = j - len;
      const bool better =
          len > best.length ||
          (len == best.length &&
           (i > best.q_end || (i == best.q_end && e_start < best.e_start)));
      if (better) best = LccsSpan{i - len, i, e_start, j, len};
    }
    std::swap(prev, cur);
  }
  if (best.length == 0) return std::nullopt;
  return best;
}

template std::optional<LccsSpan> longest_common_run<WordId>(
    std::span<const WordId>, std::span<const WordId>);
template std::optional<LccsSpan> longest_common_run<char>(
    std::span<const char>, std::span<const char>);

std::optional<LccsSpan> lccs_words(std::span<const WordId> q,
                                   std::span<const WordId> e) {
  return longest_common_run<WordId>(q, e);
}

std::optional<LccsSpan> lccs_chars(std::string_view q, std::string_view e) {
  return longest_common_run<char>(std::span<const char>(q.data(), q.size()),
                                  std::span<const char>(e.data(), e.size()));
}

void LinkerConfig::validate() const {
  auto unit = [](double x) { return x >= 0.0 && x <= 1.0; };
  if (!unit(alpha) || !unit(beta) || alpha + beta > 1.0 + 1e-12) {
    throw std::invalid_argument(fmt::format(
        "linker weights must satisfy 0 <= alpha, beta and alpha + beta <= 1 "
        "(alpha={}, beta={})",
        alpha, beta));
  }
  if (top_n == 0) throw std::invalid_argument("top_n must be at least 1");
}

double combine_factors(const LinkFactors& f, double alpha, double beta) {
  return alpha * f.a + beta * f.b + (1.0 - alpha - beta) * f.c;
}

LinkFactors factors_for(const LccsSpan& span, std::size_t q_len,
                        std::size_t e_len) {
  const auto len = static_cast<double>(span.length);
  return LinkFactors{len / static_cast<double>(q_len),
                     len / static_cast<double>(e_len),
                     static_cast<double>(span.q_end) /
                         static_cast<double>(q_len)};
}

std::optional<EntityCandidate> score_entity(std::span<const WordId> q_words,
                                            std::span<const WordId> e_words,
                                            const LinkerConfig& cfg) {
  const auto span = lccs_words(q_words, e_words);
  if (!span) return std::nullopt;
  EntityCandidate cand;
  cand.lccs = *span;
  cand.factors = factors_for(*span, q_words.size(), e_words.size());
  cand.score = combine_factors(cand.factors, cfg.alpha, cfg.beta);
  return cand;
}

std::vector<std::string> make_pattern(std::span<const std::string> tokens,
                                      TokenSpan mention) {
  std::vector<std::string> pattern;
  pattern.reserve(tokens.size() - mention.size() + 1);
  for (std::size_t i = 0; i < mention.begin; ++i) pattern.push_back(tokens[i]);
  pattern.emplace_back(kEntityMarker);
  for (std::size_t i = mention.end; i < tokens.size(); ++i) {
    pattern.push_back(tokens[i]);
  }
  return pattern;
}

namespace {

std::optional<TokenSpan> char_level_mention(const ParsedQuestion& q,
                                            const Entity& entity) {
  const auto q_text = join_tokens(q.tokens);
  const auto span = lccs_chars(q_text, entity.name);
  if (!span) return std::nullopt;
  std::size_t start = span->q_start;
  std::size_t end = span->q_end;
  while (start < end && q_text[start] == ' ') ++start;
  while (end > start && q_text[end - 1] == ' ') --end;
  if (start == end) return std::nullopt;
  while (start > 0 && q_text[start - 1] != ' ') --start;
  while (end < q_text.size() && q_text[end] != ' ') ++end;
  const auto spaces = [&](std::size_t from, std::size_t to) {
    return static_cast<std::size_t>(
        std::count(q_text.begin() + static_cast<std::ptrdiff_t>(from),
                   q_text.begin() + static_cast<std::ptrdiff_t>(to), ' '));
  };
  const auto first = spaces(0, start);
  return TokenSpan{first, first + spaces(start, end) + 1};
}

}  // namespace

std::optional<MentionPair> detect_mention_passive(const ParsedQuestion& q,
                                                  const Entity& entity) {
  if (q.tokens.empty() || !entity.has_name()) return std::nullopt;
  if (const auto span = lccs_words(q.words, entity.words)) {
    const auto left = span->e_start;
    const auto right = entity.words.size() - span->e_end;
    TokenSpan mention{span->q_start - std::min(span->q_start, left),
                      std::min(q.tokens.size(), span->q_end + right)};
    return MentionPair{mention, make_pattern(q.tokens, mention)};
  }
  if (const auto mention = char_level_mention(q, entity)) {
    return MentionPair{*mention, make_pattern(q.tokens, *mention)};
  }
  return std::nullopt;
}

std::vector<EntityIdx> retrieve_candidates(std::span<const WordId> words,
                                           const NameIndex& index,
                                           std::size_t max_posting_len) {
  std::vector<EntityIdx> out;
  std::vector<WordId> seen;
  for (const auto w : words) {
    if (w == kUnknownWord ||
        std::find(seen.begin(), seen.end(), w) != seen.end()) {
      continue;
    }
    seen.push_back(w);
    const auto postings = index.postings(w);
    if (max_posting_len != 0 && postings.size() > max_posting_len) {
      spdlog::debug("skipping word {} with {} postings (cap {})", w,
                    postings.size(), max_posting_len);
      continue;
    }
    out.insert(out.end(), postings.begin(), postings.end());
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

void rank_candidates(std::vector<EntityCandidate>& candidates,
                     const KnowledgeBase& kb, std::size_t top_n) {
  std::sort(candidates.begin(), candidates.end(),
            [&](const EntityCandidate& x, const EntityCandidate& y) {
              if (x.score != y.score) return x.score > y.score;
              return kb.entity(x.entity).id < kb.entity(y.entity).id;
            });
  if (candidates.size() > top_n) candidates.resize(top_n);
}

namespace {

std::vector<EntityCandidate> score_retrieved(std::span<const EntityIdx> ids,
                                             const ParsedQuestion& q,
                                             const KnowledgeBase& kb,
                                             const LinkerConfig& cfg) {
  std::vector<EntityCandidate> out;
  out.reserve(ids.size());
  for (const auto id : ids) {
    if (auto cand = score_entity(q.words, kb.entity(id).words, cfg)) {
      cand->entity = id;
      out.push_back(std::move(*cand));
    }
  }
  return out;
}

}  // namespace

std::vector<EntityCandidate> link_passive(const ParsedQuestion& q,
                                          const NameIndex& index,
                                          const KnowledgeBase& kb,
                                          const LinkerConfig& cfg) {
  cfg.validate();
  const auto ids = retrieve_candidates(q.words, index, cfg.max_posting_len);
  auto candidates = score_retrieved(ids, q, kb, cfg);
  rank_candidates(candidates, kb, cfg.top_n);

  std::vector<EntityCandidate> out;
  out.reserve(candidates.size());
  for (auto& cand : candidates) {
    auto pair = detect_mention_passive(q, kb.entity(cand.entity));
    if (!pair) continue;
    cand.mention = pair->mention;
    cand.pattern = std::move(pair->pattern);
    out.push_back(std::move(cand));
  }
  return out;
}

std::vector<EntityCandidate> link_active(TokenSpan mention,
                                         const ParsedQuestion& q,
                                         const NameIndex& index,
                                         const KnowledgeBase& kb,
                                         const LinkerConfig& cfg) {
  cfg.validate();
  if (mention.empty() || mention.end > q.words.size()) return {};
  const auto words =
      std::span<const WordId>(q.words).subspan(mention.begin, mention.size());
  const auto ids = retrieve_candidates(words, index, cfg.max_posting_len);
  auto candidates = score_retrieved(ids, q, kb, cfg);
  rank_candidates(candidates, kb, cfg.top_n);
  const auto pattern = make_pattern(q.tokens, mention);
  for (auto& cand : candidates) {
    cand.mention = mention;
    cand.pattern = pattern;
  }
  return candidates;
}

std::optional<TokenSpan> project_gold_mention(const ParsedQuestion& q,
                                              const Entity& gold) {
  if (!gold.has_name() || q.tokens.size() < gold.tokens.size()) {
    if (auto pair = detect_mention_passive(q, gold)) return pair->mention;
    return std::nullopt;
  }
  const auto n = gold.tokens.size();
  for (std::size_t start = q.tokens.size() - n + 1; start-- > 0;) {
    if (std::equal(gold.tokens.begin(), gold.tokens.end(),
                   q.tokens.begin() + static_cast<std::ptrdiff_t>(start))) {
      return TokenSpan{start, start + n};
    }
  }
  if (auto pair = detect_mention_passive(q, gold)) return pair->mention;
  return std::nullopt;
}

std::optional<Ablation> parse_ablation(std::string_view name) {
  if (name == "none" || name.empty()) return Ablation::kNone;
  if (name == "a" || name == "-a" || name == "no-a") return Ablation::kNoA;
  if (name == "b" || name == "-b" || name == "no-b") return Ablation::kNoB;
  if (name == "c" || name == "-c" || name == "no-c") return Ablation::kNoC;
  return std::nullopt;
}

std::string_view to_string(Ablation ablation) {
  switch (ablation) {
    case Ablation::kNone: return "none";
    case Ablation::kNoA: return "-a";
    case Ablation::kNoB: return "-b";
    case Ablation::kNoC: return "-c";
  }
  return "none";
}

std::vector<std::pair<double, double>> weight_grid(double grid_step,
                                                   Ablation ablation) {
  if (!(grid_step > 0.0) || grid_step > 1.0) {
    throw std::invalid_argument("grid_step must be in (0, 1]");
  }
  const auto steps = static_cast<int>(std::lround(1.0 / grid_step));
  if (std::abs(steps * grid_step - 1.0) > 1e-9) {
    throw std::invalid_argument(
        fmt::format("grid_step {} does not divide 1", grid_step));
  }
  const auto k = static_cast<double>(steps);
  std::vector<std::pair<double, double>> grid;
  for (int i = 0; i <= steps; ++i) {
    for (int j = 0; i + j <= steps; ++j) {
      const bool keep = ablation == Ablation::kNone ||
                        (ablation == Ablation::kNoA && i == 0) ||
                        (ablation == Ablation::kNoB && j == 0) ||
                        (ablation == Ablation::kNoC && i + j == steps);
      if (keep) grid.emplace_back(i / k, j / k);
    }
  }
  return grid;
}

TuneResult tune_weights(std::span<const LinkingExample> dev,
                        const KnowledgeBase& kb, const NameIndex& index,
                        const TuneOptions& options) {
  TuneResult result;
  result.total = dev.size();
  const auto grid = weight_grid(options.grid_step, options.ablation);
  result.grid_points = grid.size();
  if (dev.empty()) return result;

  struct Scored {
    LinkFactors factors;
    const std::string* id;
  };
  struct Prepared {
    std::vector<Scored> others;
    std::optional<Scored> gold;
  };
  std::vector<Prepared> prepared;
  prepared.reserve(dev.size());
  for (const auto& ex : dev) {
    const auto& q = ex.question;
    std::span<const WordId> words = q.words;
    if (ex.mention) {
      if (ex.mention->empty() || ex.mention->end > words.size()) {
        prepared.emplace_back();
        continue;
      }
      words = words.subspan(ex.mention->begin, ex.mention->size());
    }
    Prepared p;
    for (const auto id : retrieve_candidates(words, index,
                                             options.max_posting_len)) {
      const auto& entity = kb.entity(id);
      const auto span = lccs_words(q.words, entity.words);
      if (!span) continue;
      Scored s{factors_for(*span, q.words.size(), entity.words.size()),
               &entity.id};
      if (id == ex.gold) {
        p.gold = s;
      } else {
        p.others.push_back(s);
      }
    }
    prepared.push_back(std::move(p));
  }

  bool first = true;
  for (const auto& [alpha, beta] : grid) {
    std::size_t covered = 0;
    for (const auto& p : prepared) {
      if (!p.gold) continue;
      const auto gold_score = combine_factors(p.gold->factors, alpha, beta);
      std::size_t ahead = 0;
      for (const auto& o : p.others) {
        const auto s = combine_factors(o.factors, alpha, beta);
        if (s > gold_score || (s == gold_score && *o.id < *p.gold->id)) {
          if (++ahead >= options.top_n) break;
        }
      }
      if (ahead < options.top_n) ++covered;
    }
    if (first || covered > result.covered) {
      result.alpha = alpha;
      result.beta = beta;
      result.covered = covered;
      first = false;
    }
  }
  return result;
}

void write_linking_line(std::ostream& out, std::string_view question_id,
                        std::span<const EntityCandidate> candidates,
                        const KnowledgeBase& kb) {
  out << question_id;
  for (const auto& c : candidates) {
    out << '\t' << kb.entity(c.entity).id << ':'
        << fmt::format("{:.6f}", c.score);
  }
  out << '\n';
}

std::vector<LinkingRecord> read_linking_results(std::istream& in) {
  std::vector<LinkingRecord> records;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    LinkingRecord rec;
    std::size_t start = 0;
    bool first = true;
    while (true) {
      const auto tab = line.find('\t', start);
      const auto field = std::string_view(line).substr(start, tab - start);
      if (first) {
        rec.question_id = std::string(field);
        first = false;
      } else {
        const auto colon = field.rfind(':');
        if (colon == std::string_view::npos || colon == 0) {
          throw std::runtime_error(fmt::format(
              "linking results line {}: malformed entry '{}'", line_no, field));
        }
        const auto number = std::string(field.substr(colon + 1));
        std::size_t used = 0;
        double score = 0.0;
        try {
          score = std::stod(number, &used);
        } catch (const std::exception&) {
          used = 0;
        }
        if (used != number.size() || number.empty()) {
          throw std::runtime_error(fmt::format(
              "linking results line {}: bad score in '{}'", line_no, field));
        }
        rec.entries.emplace_back(std::string(field.substr(0, colon)), score);
      }
      if (tab == std::string::npos) break;
      start = tab + 1;
    }
    records.push_back(std::move(rec));
  }
  return records;
}

}  // namespace kbqa
