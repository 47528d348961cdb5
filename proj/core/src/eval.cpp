#include "kbqa/eval.hpp"

#include <algorithm>
#include <charconv>
#include <istream>
#include <numeric>
#include <ostream>
#include <random>
#include <stdexcept>
#include <unordered_map>

#include <fmt/format.h>
#include <fmt/ostream.h>
#include <spdlog/spdlog.h>

#include "kbqa/text.hpp"

namespace kbqa {

EvalReport EvalReport::make(std::string metric, std::size_t numerator,
                            std::size_t denominator, std::size_t n,
                            std::map<std::string, std::string> config) {
  EvalReport r;
  r.metric = std::move(metric);
  r.n = n;
  r.numerator = numerator;
  r.denominator = denominator;
  r.value = denominator == 0 ? 0.0
                             : static_cast<double>(numerator) /
                                   static_cast<double>(denominator);
  r.config = std::move(config);
  return r;
}

std::string to_text(const EvalReport& report) {
  const auto name =
      report.n > 0 ? fmt::format("{}@{}", report.metric, report.n) : report.metric;
  return fmt::format("{}: {:.1f}% ({}/{})", name, 100.0 * report.value,
                     report.numerator, report.denominator);
}

namespace {

void check_field(std::string_view s) {
  if (s.find_first_of("\t\n=") != std::string_view::npos) {
    throw std::invalid_argument(
        fmt::format("report field '{}' contains a tab, newline or '='", s));
  }
}

std::size_t parse_size(std::string_view s) {
  std::size_t v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    throw std::invalid_argument(fmt::format("bad count '{}'", s));
  }
  return v;
}

}  // namespace

std::string to_key_values(const EvalReport& report) {
  check_field(report.metric);
  std::string out = fmt::format("metric={}\tn={}\tnumerator={}\tdenominator={}\tvalue={:.17g}",
                                report.metric, report.n, report.numerator,
                                report.denominator, report.value);
  for (const auto& [k, v] : report.config) {
    check_field(k);
    check_field(v);
    out += fmt::format("\tconfig.{}={}", k, v);
  }
  return out;
}

EvalReport parse_key_values(std::string_view line) {
  EvalReport r;
  bool have_metric = false;
  bool have_value = false;
  while (!line.empty()) {
    const auto tab = line.find('\t');
    const auto field = line.substr(0, tab);
    line = tab == std::string_view::npos ? std::string_view{} : line.substr(tab + 1);
    const auto eq = field.find('=');
    if (eq == std::string_view::npos) {
      throw std::invalid_argument(fmt::format("report field '{}' has no '='", field));
    }
    const auto key = field.substr(0, eq);
    const auto value = field.substr(eq + 1);
    if (key == "metric") {
      r.metric = std::string(value);
      have_metric = true;
    } else if (key == "n") {
      r.n = parse_size(value);
    } else if (key == "numerator") {
      r.numerator = parse_size(value);
    } else if (key == "denominator") {
      r.denominator = parse_size(value);
    } else if (key == "value") {
      try {
        r.value = std::stod(std::string(value));
      } catch (const std::exception&) {
        throw std::invalid_argument(fmt::format("bad value '{}'", value));
      }
      have_value = true;
    } else if (key.starts_with("config.")) {
      r.config.emplace(key.substr(7), value);
    } else {
      throw std::invalid_argument(fmt::format("unknown report key '{}'", key));
    }
  }
  if (!have_metric || !have_value) {
    throw std::invalid_argument("report line needs metric and value");
  }
  return r;
}

std::vector<EvalReport> coverage_at_n(
    std::span<const QaExample> questions,
    std::span<const std::vector<EntityIdx>> candidates,
    std::span<const std::size_t> n_values) {
  if (questions.size() != candidates.size()) {
    throw std::invalid_argument("one candidate list per question expected");
  }
  // Rank of the gold subject in each list; lists beyond it do not matter.
  std::vector<std::size_t> rank(questions.size(), SIZE_MAX);
  for (std::size_t i = 0; i < questions.size(); ++i) {
    if (!questions[i].subject) continue;
    const auto& list = candidates[i];
    const auto it = std::find(list.begin(), list.end(), *questions[i].subject);
    if (it != list.end()) rank[i] = static_cast<std::size_t>(it - list.begin());
  }
  std::vector<EvalReport> out;
  for (const auto n : n_values) {
    const auto hits = static_cast<std::size_t>(std::count_if(
        rank.begin(), rank.end(), [n](std::size_t r) { return r < n; }));
    out.push_back(EvalReport::make("coverage", hits, questions.size(), n));
  }
  return out;
}

EvalReport qa_accuracy(std::span<const QuestionRecord> questions,
                       std::span<const PredictionRecord> predictions) {
  std::unordered_map<std::string, const PredictionRecord*> by_id;
  for (const auto& p : predictions) by_id.emplace(p.question_id, &p);
  std::size_t correct = 0;
  std::size_t missing = 0;
  for (const auto& q : questions) {
    const auto it = by_id.find(q.id);
    if (it == by_id.end()) {
      ++missing;
      continue;
    }
    if (it->second->subject == q.subject && it->second->predicate == q.predicate) {
      ++correct;
    }
  }
  if (missing > 0) {
    spdlog::warn("{} of {} questions have no prediction; counted as wrong",
                 missing, questions.size());
  }
  return EvalReport::make("accuracy", correct, questions.size());
}

std::vector<RcExample> build_rc_dataset(std::span<const QaExample> questions,
                                        const KnowledgeBase& kb,
                                        RcBuildStats* stats) {
  RcBuildStats local;
  std::vector<RcExample> out;
  for (const auto& q : questions) {
    if (!q.subject || !q.predicate) {
      ++local.unresolved;
      spdlog::debug("rc: question {} has an unresolvable gold fact", q.id);
      continue;
    }
    if (!q.mention || q.mention->empty()) {
      ++local.no_mention;
      spdlog::debug("rc: no gold mention for question {}", q.id);
      continue;
    }
    std::vector<PredicateIdx> preds;
    for (const auto f : kb.facts_of(*q.subject)) preds.push_back(kb.fact(f).predicate);
    std::sort(preds.begin(), preds.end());
    preds.erase(std::unique(preds.begin(), preds.end()), preds.end());
    std::erase(preds, *q.predicate);
    if (preds.empty()) {
      ++local.single_predicate;
      continue;
    }
    out.push_back({q.id, make_pattern(q.question.tokens, *q.mention), *q.predicate,
                   std::move(preds)});
  }
  if (stats) *stats = local;
  return out;
}

void write_rc_dataset(std::ostream& out, std::span<const RcExample> examples,
                      const KnowledgeBase& kb) {
  for (const auto& ex : examples) {
    fmt::print(out, "{}\t{}\t{}\t", ex.question_id, join_tokens(ex.pattern),
               kb.predicate(ex.gold).id);
    for (std::size_t i = 0; i < ex.negatives.size(); ++i) {
      if (i > 0) out << ' ';
      out << kb.predicate(ex.negatives[i]).id;
    }
    out << '\n';
  }
}

std::vector<RcExample> read_rc_dataset(std::istream& in, const KnowledgeBase& kb) {
  std::vector<RcExample> out;
  std::string line;
  std::size_t line_no = 0;
  const auto resolve = [&](std::string_view id) {
    const auto p = kb.find_predicate(id);
    if (!p) {
      throw std::runtime_error(
          fmt::format("rc line {}: unknown predicate '{}'", line_no, id));
    }
    return *p;
  };
  while (std::getline(in, line)) {
    ++line_no;
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
      throw std::runtime_error(fmt::format("rc line {}: expected 4 fields", line_no));
    }
    RcExample ex;
    ex.question_id = fields[0];
    std::size_t pos = 0;
    while (pos <= fields[1].size()) {
      const auto sp = fields[1].find(' ', pos);
      const auto tok = fields[1].substr(pos, sp - pos);
      if (!tok.empty()) ex.pattern.push_back(tok);
      if (sp == std::string::npos) break;
      pos = sp + 1;
    }
    ex.gold = resolve(fields[2]);
    pos = 0;
    while (pos <= fields[3].size()) {
      const auto sp = fields[3].find(' ', pos);
      const auto tok = fields[3].substr(pos, sp - pos);
      if (!tok.empty()) ex.negatives.push_back(resolve(tok));
      if (sp == std::string::npos) break;
      pos = sp + 1;
    }
    out.push_back(std::move(ex));
  }
  return out;
}

EvalReport rc_accuracy(std::span<const RcExample> examples,
                       const MatchModel& model, const KnowledgeBase& kb) {
  std::size_t correct = 0;
  for (const auto& ex : examples) {
    const auto gold = word_match(model, kb.predicate(ex.gold).tokens, ex.pattern,
                                 model.pooling());
    bool wins = true;
    for (const auto neg : ex.negatives) {
      if (word_match(model, kb.predicate(neg).tokens, ex.pattern,
                     model.pooling()) >= gold) {
        wins = false;
        break;
      }
    }
    if (wins) ++correct;
  }
  return EvalReport::make("rc_accuracy", correct, examples.size(), 0,
                          {{"pooling", std::string(to_string(model.pooling().mode))}});
}

RcTrainResult train_relation_classifier(MatchModel model,
                                        std::span<const RcExample> train,
                                        std::span<const RcExample> dev,
                                        const KnowledgeBase& kb,
                                        const RcTrainConfig& cfg) {
  RcTrainResult result{model, {}, {}, 0};
  const auto pooling = model.pooling();
  const auto margin = static_cast<float>(cfg.margin);
  std::mt19937_64 rng(cfg.seed ^ 0x5bd1e995ULL);
  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  double best = -1.0;

  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double loss_sum = 0.0;
    std::size_t pairs = 0;
    for (const auto i : order) {
      const auto& ex = train[i];
      const auto pattern = model.encode_words(ex.pattern);
      const auto gold = model.encode_words(kb.predicate(ex.gold).tokens);
      for (const auto neg_id : ex.negatives) {
        const auto neg = model.encode_words(kb.predicate(neg_id).tokens);
        Tape tape;
        const auto pos = word_match(tape, model, gold, pattern, pooling);
        const auto other = word_match(tape, model, neg, pattern, pooling);
        const auto loss = hinge_rank_loss(tape, margin, pos, other);
        const float value = tape.scalar(loss);
        loss_sum += value;
        ++pairs;
        if (value <= 0.0F) continue;
        tape.backward(loss);
        auto params = model.parameters();
        adagrad_step<float>(params, cfg.optimizer);
      }
    }
    result.epoch_losses.push_back(pairs == 0 ? 0.0 : loss_sum / static_cast<double>(pairs));
    if (!dev.empty()) {
      const double acc = rc_accuracy(dev, model, kb).value;
      result.dev_accuracy.push_back(acc);
      spdlog::info("rc epoch {} loss {:.6f} dev accuracy {:.4f}", epoch,
                   result.epoch_losses.back(), acc);
      if (acc > best) {
        best = acc;
        result.model = model;
        result.best_epoch = epoch;
      }
    } else {
      spdlog::info("rc epoch {} loss {:.6f}", epoch, result.epoch_losses.back());
    }
  }
  if (dev.empty()) {
    result.model = std::move(model);
    result.best_epoch = result.epoch_losses.size();
  }
  return result;
}

}  // namespace kbqa
