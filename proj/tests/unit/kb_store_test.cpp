#include <gtest/gtest.h>

#include <algorithm>
#include <random>
#include <set>

#include "kbqa/kb_store.hpp"
#include "oracles.hpp"

namespace kbqa {
namespace {

using testing::make_kb;

TEST(KnowledgeBase, IngestsTriplesAndNames) {
  const auto kb = make_kb("m.1\t/people/person/place_of_birth\tm.2\n"
                          "m.1\t/people/person/profession\tm.3\n",
                          "m.1\tBarack Obama\nm.2\tHonolulu\n");
  EXPECT_EQ(kb.fact_count(), 2u);
  EXPECT_EQ(kb.predicate_count(), 2u);
  EXPECT_EQ(kb.entity_count(), 3u);
  const auto obama = kb.find_entity("m.1");
  ASSERT_TRUE(obama);
  EXPECT_EQ(kb.entity(*obama).name, "barack obama");
  EXPECT_EQ(kb.facts_of(*obama).size(), 2u);
  const auto m3 = kb.find_entity("m.3");
  ASSERT_TRUE(m3);
  EXPECT_FALSE(kb.entity(*m3).has_name());
  const auto pob = kb.find_predicate("/people/person/place_of_birth");
  ASSERT_TRUE(pob);
  EXPECT_EQ(kb.predicate(*pob).tokens,
            (std::vector<std::string>{"people", "person", "place", "of", "birth"}));
}

TEST(KnowledgeBase, EntityWithoutFactsHasEmptyList) {
  const auto kb = make_kb("m.1\t/p\tm.2\n", "m.1\ta\nm.2\tb\n");
  EXPECT_TRUE(kb.facts_of(*kb.find_entity("m.2")).empty());
  EXPECT_TRUE(kb.facts_by_subject("m.2").empty());
  EXPECT_TRUE(kb.facts_by_subject("unknown").empty());
}

TEST(KnowledgeBase, ReportsMalformedLinesAndDuplicateNames) {
  std::vector<IngestError> errors;
  const auto kb = make_kb("m.1\t/p\n"
                          "m.1\t/p\tm.2\n",
                          "m.1\tfirst\nm.1\tsecond\nnotab\n",
                          &errors);
  EXPECT_EQ(kb.fact_count(), 1u);
  EXPECT_EQ(errors.size(), 3u);
  EXPECT_EQ(kb.entity(*kb.find_entity("m.1")).name, "first");
}

TEST(KnowledgeBase, KeepsDuplicateTriples) {
  const auto kb = make_kb("m.1\t/p\tm.2\nm.1\t/p\tm.2\n", "m.1\ta\n");
  EXPECT_EQ(kb.fact_count(), 2u);
  EXPECT_EQ(kb.facts_by_subject("m.1").size(), 2u);
}

TEST(KnowledgeBase, FactsOfMatchesLinearScan) {
  std::mt19937_64 rng(11);
  const auto text = testing::random_kb_text(200, 15, 60, rng);
  const auto kb = make_kb(text.triples, text.names);
  for (EntityIdx e = 0; e < kb.entity_count(); ++e) {
    std::vector<FactIdx> scan;
    for (FactIdx f = 0; f < kb.fact_count(); ++f) {
      if (kb.fact(f).subject == e) scan.push_back(f);
    }
    const auto got = kb.facts_of(e);
    EXPECT_EQ(std::vector<FactIdx>(got.begin(), got.end()), scan) << "entity " << e;
  }
}

TEST(NameIndex, SharedWordListsBothEntities) {
  const auto kb = make_kb("", "m.1\tbarack obama\nm.2\tobama\nm.3\tmichelle\n");
  const auto index = NameIndex::build(kb);
  const auto obama = kb.lexicon().lookup("obama");
  const auto got = index.postings(obama);
  EXPECT_EQ(std::vector<EntityIdx>(got.begin(), got.end()),
            (std::vector<EntityIdx>{*kb.find_entity("m.1"), *kb.find_entity("m.2")}));
}

TEST(NameIndex, EmptyKbAndUnknownWords) {
  const auto empty = make_kb("", "");
  const auto index = NameIndex::build(empty);
  EXPECT_EQ(index.posting_count(), 0u);
  EXPECT_TRUE(index.postings(kUnknownWord).empty());
  EXPECT_TRUE(index.postings(12345).empty());
}

TEST(NameIndex, RepeatedWordInNamePostedOnce) {
  const auto kb = make_kb("", "m.1\tnew new york\n");
  const auto index = NameIndex::build(kb);
  EXPECT_EQ(index.postings(kb.lexicon().lookup("new")).size(), 1u);
}

TEST(NameIndex, MatchesLinearScanOnRandomKbs) {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 5; ++trial) {
    const auto text = testing::random_kb_text(300, 10, 80, rng);
    const auto kb = make_kb(text.triples, text.names);
    const auto index = NameIndex::build(kb);
    for (const auto& w : text.words) {
      const auto id = kb.lexicon().lookup(w);
      std::vector<EntityIdx> scan;
      for (EntityIdx e = 0; e < kb.entity_count(); ++e) {
        const auto& words = kb.entity(e).words;
        if (std::find(words.begin(), words.end(), id) != words.end()) scan.push_back(e);
      }
      const auto got = id == kUnknownWord ? std::span<const EntityIdx>{} : index.postings(id);
      EXPECT_EQ(std::vector<EntityIdx>(got.begin(), got.end()), scan) << w;
    }
  }
}

TEST(NameIndex, BuildIsDeterministic) {
  std::mt19937_64 rng(9);
  const auto text = testing::random_kb_text(150, 8, 40, rng);
  const auto a = make_kb(text.triples, text.names);
  const auto b = make_kb(text.triples, text.names);
  EXPECT_EQ(NameIndex::build(a), NameIndex::build(b));
  EXPECT_EQ(NameIndex::build(a), NameIndex::build(a));
}

TEST(Lexicon, InternAndLookup) {
  Lexicon lex;
  const auto a = lex.intern("alpha");
  EXPECT_EQ(lex.intern("alpha"), a);
  EXPECT_EQ(lex.lookup("alpha"), a);
  EXPECT_EQ(lex.lookup("beta"), kUnknownWord);
  EXPECT_FALSE(lex.find("beta"));
  EXPECT_EQ(lex.word(a), "alpha");
}

}  // namespace
}  // namespace kbqa
