#include "kbqa/synthetic.hpp"

#include <algorithm>
#include <fstream>
#include <random>
#include <set>
#include <stdexcept>

#include <fmt/format.h>
#include <fmt/ostream.h>

namespace kbqa {

namespace {

struct PredicateTemplate {
  std::string_view path;
  std::vector<std::string_view> templates;
};

const std::vector<PredicateTemplate>& handcrafted_predicates() {
  static const std::vector<PredicateTemplate> kPredicates = {
      {"people/person/place_of_birth",
       {"where was {} born", "what is the place of birth of {}",
        "in which city was {} born", "what city is the birthplace of {}"}},
      {"people/person/nationality",
       {"what is the nationality of {}", "which country is {} a citizen of",
        "what nationality is {}"}},
      {"music/artist/genre",
       {"what genre of music does {} play", "what kind of music is {}",
        "which musical genre is {} known for"}},
      {"film/film/directed_by",
       {"who directed {}", "who is the director of {}",
        "{} was directed by whom", "name the director of the film {}"}},
      {"book/written_work/author",
       {"who wrote {}", "who is the author of {}",
        "{} was written by which author"}},
      {"location/location/containedby",
       {"where is {} located", "what region contains {}",
        "{} is located in what place"}},
      {"people/person/profession",
       {"what is the profession of {}", "what does {} do for a living",
        "what job does {} have"}},
      {"film/film/language",
       {"what language is {} in", "in which language was {} filmed",
        "what is the language of {}"}},
      {"music/album/release_type",
       {"what type of release is {}", "what kind of album is {}",
        "{} was released as what type"}},
      {"sports/sports_team/sport",
       {"what sport does {} play", "which sport is the team {} in",
        "{} competes in what sport"}},
      {"organization/organization/founders",
       {"who founded {}", "who is the founder of {}",
        "{} was founded by whom", "name a founder of {}"}},
      {"location/location/time_zones",
       {"what time zone is {} in", "which time zone does {} use",
        "{} lies in what time zone"}},
  };
  return kPredicates;
}

constexpr std::string_view kConsonants = "bdfgklmnprstvz";
constexpr std::string_view kVowels = "aeiou";
constexpr std::string_view kEntityPrefix = "www.freebase.com/m/0s";
constexpr std::string_view kPredicatePrefix = "www.freebase.com/";

class Draw {
 public:
  explicit Draw(std::uint64_t seed) : rng_(seed) {}

  std::size_t below(std::size_t n) {
    return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng_);
  }
  std::size_t between(std::size_t lo, std::size_t hi) {
    return std::uniform_int_distribution<std::size_t>(lo, hi)(rng_);
  }
  bool chance(double p) { return std::uniform_real_distribution<double>(0.0, 1.0)(rng_) < p; }
  char letter(std::string_view set) { return set[below(set.size())]; }

  std::string pseudo_word() {
    std::string w;
    const auto syllables = between(2, 3);
    for (std::size_t s = 0; s < syllables; ++s) {
      w += letter(kConsonants);
      w += letter(kVowels);
      if (chance(0.3)) w += letter(kConsonants);
    }
    return w;
  }

 private:
  std::mt19937_64 rng_;
};

std::set<std::string, std::less<>> template_words(
    const std::vector<std::pair<std::string, std::vector<std::string>>>& preds) {
  std::set<std::string, std::less<>> words;
  for (const auto& [path, templates] : preds) {
    for (const auto& t : templates) {
      std::size_t pos = 0;
      while (pos <= t.size()) {
        const auto sp = t.find(' ', pos);
        words.insert(t.substr(pos, sp - pos));
        if (sp == std::string::npos) break;
        pos = sp + 1;
      }
    }
  }
  return words;
}

std::string fill(std::string_view tmpl, std::string_view mention) {
  const auto pos = tmpl.find("{}");
  return fmt::format("{}{}{}?", tmpl.substr(0, pos), mention, tmpl.substr(pos + 2));
}

}  // namespace

SyntheticCorpus gen_synthetic(const SyntheticSpec& spec) {
  if (spec.entities == 0 || spec.predicates == 0 ||
      spec.templates_per_predicate == 0) {
    throw std::invalid_argument("synthetic counts must be at least 1");
  }
  Draw draw(spec.seed);

  // Predicates: handcrafted first, invented attributes after that.
  std::vector<std::pair<std::string, std::vector<std::string>>> preds;
  const auto& crafted = handcrafted_predicates();
  for (std::size_t p = 0; p < spec.predicates && p < crafted.size(); ++p) {
    std::vector<std::string> templates;
    for (std::size_t t = 0;
         t < crafted[p].templates.size() && t < spec.templates_per_predicate; ++t) {
      templates.emplace_back(crafted[p].templates[t]);
    }
    preds.emplace_back(std::string(crafted[p].path), std::move(templates));
  }
  auto reserved = template_words(preds);
  for (std::size_t p = crafted.size(); p < spec.predicates; ++p) {
    std::string attr;
    do {
      attr = draw.pseudo_word();
    } while (!reserved.insert(attr).second);
    const std::vector<std::string> all = {
        fmt::format("what is the {} of {{}}", attr),
        fmt::format("which {} does {{}} have", attr),
        fmt::format("{{}} has what {}", attr)};
    std::vector<std::string> templates(
        all.begin(),
        all.begin() + static_cast<std::ptrdiff_t>(
                          std::min(all.size(), spec.templates_per_predicate)));
    preds.emplace_back(fmt::format("synthetic/attribute/{}", attr),
                       std::move(templates));
  }
  reserved = template_words(preds);

  // Entity names: 1-4 pseudo-words drawn from a pool half the size of the
  // token total, so many names overlap.
  std::vector<std::size_t> lengths(spec.entities);
  std::size_t total_tokens = 0;
  for (auto& len : lengths) {
    len = draw.between(1, 4);
    total_tokens += len;
  }
  std::vector<std::string> pool;
  std::set<std::string, std::less<>> pool_seen;
  while (pool.size() < std::max<std::size_t>(8, total_tokens / 2)) {
    auto w = draw.pseudo_word();
    if (reserved.contains(w) || !pool_seen.insert(w).second) continue;
    pool.push_back(std::move(w));
  }

  SyntheticCorpus corpus;
  std::vector<std::string> mentions;
  std::set<std::string, std::less<>> names_seen;
  for (std::size_t e = 0; e < spec.entities; ++e) {
    std::string name;
    std::string mention;
    do {
      std::vector<std::string> tokens;
      for (std::size_t t = 0; t < lengths[e]; ++t) tokens.push_back(pool[draw.below(pool.size())]);
      std::vector<std::string> spoken = tokens;
      if (tokens.size() >= 2 && draw.chance(spec.abbreviation_rate)) {
        std::string plain;
        do {
          plain = {draw.letter(kConsonants), draw.letter(kConsonants)};
        } while (reserved.contains(plain));
        tokens[0] = fmt::format("{}.{}.", plain[0], plain[1]);
        spoken[0] = plain;
      }
      name = fmt::format("{}", fmt::join(tokens, " "));
      mention = fmt::format("{}", fmt::join(spoken, " "));
    } while (!names_seen.insert(name).second);
    corpus.names.emplace_back(fmt::format("{}{:04d}", kEntityPrefix, e), name);
    mentions.push_back(std::move(mention));
  }

  // Facts: each entity gets a few distinct predicates.
  std::vector<std::size_t> fact_predicate;
  const auto p_count = preds.size();
  for (std::size_t e = 0; e < spec.entities; ++e) {
    const auto k = draw.between(std::min<std::size_t>(3, p_count),
                                std::min<std::size_t>(6, p_count));
    std::vector<std::size_t> order(p_count);
    for (std::size_t i = 0; i < p_count; ++i) order[i] = i;
    for (std::size_t i = 0; i < k; ++i) std::swap(order[i], order[draw.between(i, p_count - 1)]);
    std::sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k));
    for (std::size_t i = 0; i < k; ++i) {
      auto object = spec.entities > 1 ? draw.below(spec.entities - 1) : 0;
      if (spec.entities > 1 && object >= e) ++object;
      corpus.triples.push_back({corpus.names[e].first,
                                fmt::format("{}{}", kPredicatePrefix, preds[order[i]].first),
                                corpus.names[object].first});
      fact_predicate.push_back(order[i]);
    }
  }

  const auto make_questions = [&](std::size_t count) {
    std::vector<QuestionRecord> out;
    for (std::size_t i = 0; i < count; ++i) {
      const auto f = draw.below(corpus.triples.size());
      const auto& triple = corpus.triples[f];
      const auto& templates = preds[fact_predicate[f]].second;
      const auto& tmpl = templates[draw.below(templates.size())];
      const auto subject =
          static_cast<std::size_t>(std::stoul(triple.subject.substr(kEntityPrefix.size())));
      out.push_back({std::to_string(i + 1), triple.subject, triple.predicate,
                     triple.object, fill(tmpl, mentions[subject])});
    }
    return out;
  };
  corpus.train = make_questions(spec.train_questions);
  corpus.dev = make_questions(spec.dev_questions);
  corpus.test = make_questions(spec.test_questions);
  return corpus;
}

void write_synthetic(const SyntheticCorpus& corpus,
                     const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  const auto open = [&](std::string_view file) {
    std::ofstream out(dir / file, std::ios::binary);
    if (!out) throw std::runtime_error(fmt::format("cannot write {}", (dir / file).string()));
    return out;
  };
  {
    auto out = open("names.tsv");
    for (const auto& [id, name] : corpus.names) fmt::print(out, "{}\t{}\n", id, name);
  }
  {
    auto out = open("triples.tsv");
    for (const auto& t : corpus.triples) {
      fmt::print(out, "{}\t{}\t{}\n", t.subject, t.predicate, t.object);
    }
  }
  const auto questions = [&](std::string_view file,
                             const std::vector<QuestionRecord>& qs) {
    auto out = open(file);
    for (const auto& q : qs) write_question(out, q);
  };
  questions("train.tsv", corpus.train);
  questions("dev.tsv", corpus.dev);
  questions("test.tsv", corpus.test);
}

}  // namespace kbqa
