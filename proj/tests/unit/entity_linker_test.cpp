#include <gtest/gtest.h>

#include <random>
#include <sstream>

#include "kbqa/entity_linker.hpp"
#include "kbqa/text.hpp"
#include "oracles.hpp"

namespace kbqa {
namespace {

using testing::make_kb;
using Tokens = std::vector<std::string>;

std::vector<WordId> ids(std::initializer_list<WordId> v) { return v; }

TEST(Lccs, RouteExample) {
  const auto kb = make_kb("", "m.1\tu.s. route 2\n");
  const auto q = parse_question("what major cities does us route 2 run through",
                                kb.lexicon());
  const auto span = lccs_words(q.words, kb.entity(0).words);
  ASSERT_TRUE(span);
  EXPECT_EQ(span->length, 2u);
  EXPECT_EQ(span->q_start, 5u);
  EXPECT_EQ(span->q_end, 7u);
  EXPECT_EQ(span->e_start, 1u);
  EXPECT_EQ(span->e_end, 3u);
}

TEST(Lccs, IdenticalSequences) {
  const auto a = ids({3, 1, 4, 1, 5});
  const auto span = lccs_words(a, a);
  ASSERT_TRUE(span);
  EXPECT_EQ(*span, (LccsSpan{0, 5, 0, 5, 5}));
}

TEST(Lccs, NoSharedElement) {
  EXPECT_FALSE(lccs_words(ids({1, 2}), ids({3, 4})));
  EXPECT_FALSE(lccs_words(ids({}), ids({3, 4})));
  EXPECT_FALSE(lccs_chars("abc", "xyz"));
}

TEST(Lccs, TiePrefersRightmostQuestionRunThenLeftmostEntityRun) {
  const auto span = lccs_words(ids({1, 2, 9, 1, 2}), ids({1, 2, 1, 2}));
  ASSERT_TRUE(span);
  EXPECT_EQ(span->length, 2u);
  EXPECT_EQ(span->q_end, 5u);
  EXPECT_EQ(span->e_start, 0u);
}

TEST(Lccs, CharacterLevel) {
  const auto span = lccs_chars("colour", "color");
  ASSERT_TRUE(span);
  EXPECT_EQ(span->length, 4u);
  EXPECT_EQ(std::string("colour").substr(span->q_start, span->length), "colo");
}

TEST(Lccs, MatchesBruteForceOnRandomPairs) {
  std::mt19937_64 rng(1);
  std::uniform_int_distribution<std::size_t> len(0, 15);
  std::uniform_int_distribution<WordId> word(0, 29);
  std::uniform_int_distribution<int> letter('a', 'e');
  for (int i = 0; i < 300; ++i) {
    std::vector<WordId> q(len(rng));
    std::vector<WordId> e(len(rng));
    for (auto& w : q) w = word(rng);
    for (auto& w : e) w = word(rng);
    EXPECT_EQ(lccs_words(q, e), testing::brute_lccs<WordId>(q, e));

    std::string qs(len(rng), ' ');
    std::string es(len(rng), ' ');
    for (auto& c : qs) c = static_cast<char>(letter(rng));
    for (auto& c : es) c = static_cast<char>(letter(rng));
    EXPECT_EQ(lccs_chars(qs, es),
              testing::brute_lccs<char>(std::span<const char>(qs.data(), qs.size()),
                                        std::span<const char>(es.data(), es.size())));
  }
}

TEST(LinkScore, RouteExampleScore) {
  const auto kb = make_kb("", "m.1\tu.s. route 2\n");
  const auto q = parse_question("what major cities does us route 2 run through",
                                kb.lexicon());
  const auto cand = score_entity(q.words, kb.entity(0).words, LinkerConfig{});
  ASSERT_TRUE(cand);
  EXPECT_NEAR(cand->factors.a, 2.0 / 9.0, 1e-12);
  EXPECT_NEAR(cand->factors.b, 2.0 / 3.0, 1e-12);
  EXPECT_NEAR(cand->factors.c, 7.0 / 9.0, 1e-12);
  EXPECT_NEAR(cand->score, 0.41111, 1e-5);
}

TEST(LinkScore, FactorsInUnitInterval) {
  std::mt19937_64 rng(4);
  std::uniform_int_distribution<WordId> word(0, 6);
  std::uniform_int_distribution<std::size_t> len(1, 10);
  for (int i = 0; i < 200; ++i) {
    std::vector<WordId> q(len(rng));
    std::vector<WordId> e(len(rng));
    for (auto& w : q) w = word(rng);
    for (auto& w : e) w = word(rng);
    const auto cand = score_entity(q, e, LinkerConfig{});
    if (!cand) continue;
    for (const double f : {cand->factors.a, cand->factors.b, cand->factors.c}) {
      EXPECT_GT(f, 0.0);
      EXPECT_LE(f, 1.0);
    }
  }
}

TEST(LinkerConfig, Validation) {
  EXPECT_NO_THROW(LinkerConfig{}.validate());
  EXPECT_THROW((LinkerConfig{0.7, 0.4, 20, 0}.validate()), std::invalid_argument);
  EXPECT_THROW((LinkerConfig{-0.1, 0.4, 20, 0}.validate()), std::invalid_argument);
  EXPECT_THROW((LinkerConfig{0.5, 0.4, 0, 0}.validate()), std::invalid_argument);
}

TEST(PassiveMention, ExtendsRunByFlankingEntityWords) {
  const auto kb = make_kb("", "m.1\tu.s. route 2\n");
  const auto q = parse_question("what major cities does us route 2 run through",
                                kb.lexicon());
  const auto pair = detect_mention_passive(q, kb.entity(0));
  ASSERT_TRUE(pair);
  EXPECT_EQ(pair->mention, (TokenSpan{4, 7}));
  EXPECT_EQ(join_tokens(pair->pattern), "what major cities does <e> run through");
}

TEST(PassiveMention, ClampsToQuestionBounds) {
  const auto kb = make_kb("", "m.1\tfoo bar baz qux\n");
  const auto q = parse_question("baz qux is what", kb.lexicon());
  const auto pair = detect_mention_passive(q, kb.entity(0));
  ASSERT_TRUE(pair);
  // "foo bar" would extend the run leftwards past the first token.
  EXPECT_EQ(pair->mention, (TokenSpan{0, 2}));
  EXPECT_EQ(pair->pattern, (Tokens{"<e>", "is", "what"}));
}

TEST(PassiveMention, FallsBackToCharacters) {
  const auto kb = make_kb("", "m.1\tkobenhavn\n");
  const auto q = parse_question("where is kobenhaven located", kb.lexicon());
  const auto pair = detect_mention_passive(q, kb.entity(0));
  ASSERT_TRUE(pair);
  EXPECT_EQ(pair->mention, (TokenSpan{2, 3}));
  EXPECT_EQ(pair->pattern, (Tokens{"where", "is", "<e>", "located"}));
}

TEST(Pattern, HasExactlyOneMarker) {
  const Tokens t{"a", "b", "c", "d"};
  const auto p = make_pattern(t, TokenSpan{1, 3});
  EXPECT_EQ(p, (Tokens{"a", "<e>", "d"}));
  EXPECT_EQ(std::count(p.begin(), p.end(), std::string(kEntityMarker)), 1);
}

TEST(LinkPassive, RanksByScoreThenId) {
  const auto kb = make_kb("", "m.b\tred river\nm.a\tred river\nm.c\tred\n");
  const auto index = NameIndex::build(kb);
  const auto q = parse_question("where does red river flow", kb.lexicon());
  const auto cands = link_passive(q, index, kb, LinkerConfig{});
  ASSERT_EQ(cands.size(), 3u);
  EXPECT_EQ(kb.entity(cands[0].entity).id, "m.a");
  EXPECT_EQ(kb.entity(cands[1].entity).id, "m.b");
  EXPECT_EQ(kb.entity(cands[2].entity).id, "m.c");
  EXPECT_GT(cands[1].score, cands[2].score);
}

TEST(LinkPassive, TruncatesToTopN) {
  const auto kb = make_kb("", "m.1\tx a\nm.2\tx b\nm.3\tx c\n");
  const auto index = NameIndex::build(kb);
  const auto q = parse_question("x", kb.lexicon());
  LinkerConfig cfg;
  cfg.top_n = 2;
  EXPECT_EQ(link_passive(q, index, kb, cfg).size(), 2u);
}

TEST(LinkPassive, MatchesFullScanOnRandomKb) {
  std::mt19937_64 rng(21);
  const auto text = testing::random_kb_text(400, 5, 120, rng);
  const auto kb = make_kb(text.triples, text.names);
  const auto index = NameIndex::build(kb);
  std::uniform_int_distribution<std::size_t> len(2, 10);
  std::uniform_int_distribution<std::size_t> word(0, text.words.size() + 20);
  for (int i = 0; i < 100; ++i) {
    std::string s;
    const auto n = len(rng);
    for (std::size_t k = 0; k < n; ++k) {
      const auto w = word(rng);
      s += w < text.words.size() ? text.words[w] : "filler" + std::to_string(w);
      s += ' ';
    }
    const auto q = parse_question(s, kb.lexicon());
    const auto got = link_passive(q, index, kb, LinkerConfig{});
    const auto want = testing::full_scan_link(q.words, kb, 0.6, 0.3, 20);
    ASSERT_EQ(got.size(), want.size()) << s;
    for (std::size_t k = 0; k < got.size(); ++k) {
      EXPECT_EQ(got[k].entity, want[k].entity) << s;
      EXPECT_EQ(got[k].score, want[k].score) << s;
    }
  }
}

TEST(LinkPassive, PostingCapSkipsFrequentWords) {
  const auto kb = make_kb("", "m.1\tthe alpha\nm.2\tthe beta\nm.3\tthe gamma\n");
  const auto index = NameIndex::build(kb);
  const auto q = parse_question("the alpha", kb.lexicon());
  LinkerConfig cfg;
  cfg.max_posting_len = 2;
  const auto cands = link_passive(q, index, kb, cfg);
  ASSERT_EQ(cands.size(), 1u);
  EXPECT_EQ(kb.entity(cands[0].entity).id, "m.1");
  cfg.max_posting_len = 0;
  EXPECT_EQ(link_passive(q, index, kb, cfg).size(), 3u);
}

TEST(LinkActive, RestrictsRetrievalToMentionWords) {
  const auto kb = make_kb("", "m.1\tobama\nm.2\tborn free\nm.3\tbarack obama\n");
  const auto index = NameIndex::build(kb);
  const auto q = parse_question("where was barack obama born", kb.lexicon());
  const auto cands = link_active(TokenSpan{3, 4}, q, index, kb, LinkerConfig{});
  ASSERT_EQ(cands.size(), 2u);
  for (const auto& c : cands) {
    EXPECT_NE(kb.entity(c.entity).id, "m.2");
    EXPECT_EQ(c.mention, (TokenSpan{3, 4}));
    EXPECT_EQ(c.pattern, (Tokens{"where", "was", "barack", "<e>", "born"}));
  }
  EXPECT_TRUE(link_active(TokenSpan{2, 2}, q, index, kb, LinkerConfig{}).empty());
  EXPECT_TRUE(link_active(TokenSpan{4, 9}, q, index, kb, LinkerConfig{}).empty());
}

TEST(ProjectGoldMention, PrefersRightmostVerbatimMatch) {
  const auto kb = make_kb("", "m.1\tred river\n");
  const auto q = parse_question("red river or red river which", kb.lexicon());
  EXPECT_EQ(project_gold_mention(q, kb.entity(0)), (TokenSpan{3, 5}));
}

TEST(ProjectGoldMention, FallsBackToPassiveDetector) {
  const auto kb = make_kb("", "m.1\tu.s. route 2\n");
  const auto q = parse_question("does us route 2 run", kb.lexicon());
  EXPECT_EQ(project_gold_mention(q, kb.entity(0)), (TokenSpan{1, 4}));
}

TEST(WeightGrid, SizesPerAblation) {
  EXPECT_EQ(weight_grid(0.05, Ablation::kNone).size(), 231u);
  EXPECT_EQ(weight_grid(0.05, Ablation::kNoA).size(), 21u);
  EXPECT_EQ(weight_grid(0.05, Ablation::kNoB).size(), 21u);
  EXPECT_EQ(weight_grid(0.05, Ablation::kNoC).size(), 21u);
  for (const auto& [a, b] : weight_grid(0.05, Ablation::kNoC)) {
    EXPECT_NEAR(a + b, 1.0, 1e-12);
  }
  EXPECT_THROW(weight_grid(0.3, Ablation::kNone), std::invalid_argument);
}

TEST(TuneWeights, MatchesExhaustiveCoverageOverGrid) {
  std::mt19937_64 rng(8);
  const auto text = testing::random_kb_text(150, 3, 50, rng);
  const auto kb = make_kb(text.triples, text.names);
  const auto index = NameIndex::build(kb);
  std::uniform_int_distribution<EntityIdx> ent(0, 149);
  std::uniform_int_distribution<std::size_t> filler(0, 2);
  std::vector<LinkingExample> dev;
  for (int i = 0; i < 40; ++i) {
    const auto gold = ent(rng);
    const auto& e = kb.entity(gold);
    if (!e.has_name()) continue;
    std::string text_q = "what is";
    // Drop the first name token half the time so partial matches compete.
    const std::size_t start = (i % 2 == 0 && e.tokens.size() > 1) ? 1 : 0;
    for (std::size_t k = start; k < e.tokens.size(); ++k) text_q += " " + e.tokens[k];
    for (std::size_t k = 0; k < filler(rng); ++k) text_q += " pad";
    dev.push_back({parse_question(text_q, kb.lexicon()), gold, std::nullopt});
  }
  TuneOptions opts;
  opts.grid_step = 0.1;
  opts.top_n = 1;
  const auto result = tune_weights(dev, kb, index, opts);
  std::size_t best = 0;
  for (const auto& [a, b] : weight_grid(0.1, Ablation::kNone)) {
    LinkerConfig cfg{a, b, 1, 0};
    std::size_t covered = 0;
    for (const auto& ex : dev) {
      const auto c = link_passive(ex.question, index, kb, cfg);
      if (!c.empty() && c[0].entity == ex.gold) ++covered;
    }
    best = std::max(best, covered);
  }
  EXPECT_EQ(result.covered, best);
  EXPECT_EQ(result.total, dev.size());
  EXPECT_EQ(result.grid_points, 66u);
}

TEST(TuneWeights, EmptyDevKeepsDefaults) {
  const auto kb = make_kb("", "m.1\ta\n");
  const auto index = NameIndex::build(kb);
  const auto r = tune_weights({}, kb, index, TuneOptions{});
  EXPECT_EQ(r.alpha, 0.6);
  EXPECT_EQ(r.beta, 0.3);
}

TEST(LinkingExport, RoundTrip) {
  const auto kb = make_kb("", "m.1\tred river\nm.2\tred\n");
  const auto index = NameIndex::build(kb);
  const auto q = parse_question("red river", kb.lexicon());
  const auto cands = link_passive(q, index, kb, LinkerConfig{});
  std::stringstream ss;
  write_linking_line(ss, "7", cands, kb);
  const auto records = read_linking_results(ss);
  ASSERT_EQ(records.size(), 1u);
  EXPECT_EQ(records[0].question_id, "7");
  ASSERT_EQ(records[0].entries.size(), cands.size());
  for (std::size_t i = 0; i < cands.size(); ++i) {
    EXPECT_EQ(records[0].entries[i].first, kb.entity(cands[i].entity).id);
    EXPECT_NEAR(records[0].entries[i].second, cands[i].score, 1e-6);
  }
}

TEST(LinkingExport, MalformedEntryThrows) {
  std::istringstream bad("1\tm.1-0.5\n");
  EXPECT_THROW(read_linking_results(bad), std::runtime_error);
  std::istringstream bad_score("1\tm.1:abc\n");
  EXPECT_THROW(read_linking_results(bad_score), std::runtime_error);
}

TEST(Ablation, ParseAndPrint) {
  for (const auto a : {Ablation::kNone, Ablation::kNoA, Ablation::kNoB, Ablation::kNoC}) {
    EXPECT_EQ(parse_ablation(to_string(a)), a);
  }
  EXPECT_FALSE(parse_ablation("-d"));
}

}  // namespace
}  // namespace kbqa
