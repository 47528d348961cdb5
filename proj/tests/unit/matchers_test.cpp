#include <gtest/gtest.h>

#include <random>

#include "kbqa/matchers.hpp"
#include "oracles.hpp"

namespace kbqa {
namespace {

using DMatrix = BasicMatrix<double>;

Vocabulary small_words() {
  Vocabulary v;
  for (const auto* w : {"who", "directed", "film", "of", "the", "where", "born",
                        "people", "person", "place", "birth", "directed_by"}) {
    v.add(w);
  }
  return v;
}

Vocabulary small_chars() {
  Vocabulary v;
  for (const char c : std::string("abcdefghijklmnopqrstuvwxyz .")) {
    v.add(std::string_view(&c, 1));
  }
  return v;
}

TEST(Decay, WorkedNormalization) {
  const std::vector<double> cos{0.97, -0.30, 0.76};
  const auto d = decay_weights<double>(cos);
  ASSERT_EQ(d.size(), 3u);
  EXPECT_NEAR(d[0], 1.0, 1e-12);
  EXPECT_NEAR(d[1], 0.0, 1e-12);
  EXPECT_NEAR(d[2], 0.76 / 0.97, 1e-12);
}

TEST(Decay, AllNonPositiveGivesOnes) {
  const std::vector<double> cos{-0.1, 0.0, -0.9};
  EXPECT_EQ(decay_weights<double>(cos), (std::vector<double>{1, 1, 1}));
}

TEST(AttentiveMaxpool, ReturnsOriginalValuesAtDecayedArgmax) {
  // Column 0 is aligned with v, column 1 orthogonal, column 2 opposite.
  const auto f = DMatrix::from_rows({{0.2, 0.0, -0.9}, {0.0, 0.9, 0.0}});
  const std::vector<double> v{1.0, 0.0};
  const auto r = attentive_maxpool(f, std::span<const double>(v));
  EXPECT_EQ(r.decay, (std::vector<double>{1.0, 0.0, 0.0}));
  // Row 1 has its raw maximum at column 1 but its decay is zero; every
  // decayed value is zero so the tie goes to column 0.
  EXPECT_EQ(r.columns, (std::vector<std::size_t>{0, 0}));
  EXPECT_EQ(r.values, (std::vector<double>{0.2, 0.0}));
}

TEST(AttentiveMaxpool, EqualsTraditionalWhenCosinesUniform) {
  const auto f = DMatrix::from_rows({{0.5, 0.5, 0.5}, {0.1, 0.7, 0.3}});
  const std::vector<double> v{1.0, 0.0};
  const auto amp = attentive_maxpool(f, std::span<const double>(v));
  const auto tmp = row_max(f);
  EXPECT_EQ(amp.values[0], tmp.values[0]);
  const std::vector<double> neg{-1.0, -1.0};
  const auto fallback = attentive_maxpool(
      DMatrix::from_rows({{0.5, 0.9}, {0.4, 0.1}}), std::span<const double>(neg));
  EXPECT_EQ(fallback.values, (std::vector<double>{0.9, 0.4}));
}

TEST(AttentiveMaxpool, InvariantsOnRandomInstances) {
  std::mt19937_64 rng(12);
  for (int i = 0; i < 200; ++i) {
    DMatrix f(4, 5);
    init_uniform(f, 1.0, rng);
    DMatrix v(4, 1);
    init_uniform(v, 1.0, rng);
    const auto amp = attentive_maxpool(f, std::span<const double>(v.data()));
    const auto tmp = row_max(f);
    for (std::size_t r = 0; r < 4; ++r) {
      EXPECT_LE(amp.values[r], tmp.values[r]);
      EXPECT_EQ(amp.values[r], f(r, amp.columns[r]));
    }
    std::vector<double> scaled(v.data().begin(), v.data().end());
    for (auto& x : scaled) x *= 3.5;
    EXPECT_EQ(attentive_maxpool(f, std::span<const double>(scaled)).columns, amp.columns);
  }
}

TEST(OwaWeights, HabcnnKeepsTopKByCosine) {
  const auto f = DMatrix::from_rows({{1.0, 0.0, 0.7, -1.0}, {0.0, 1.0, 0.7, 0.0}});
  const std::vector<double> v{1.0, 0.1};
  const auto w = owa_attention_weights(f, std::span<const double>(v),
                                       PoolingConfig{PoolingMode::kOwaHabcnn, 2});
  EXPECT_EQ(w.top_k, (std::vector<std::size_t>{0, 2}));
  EXPECT_THROW(owa_attention_weights(f, std::span<const double>(v),
                                     PoolingConfig{PoolingMode::kOwaApcnn, 2}),
               std::invalid_argument);
  EXPECT_THROW(owa_attention_weights(f, std::span<const double>(v),
                                     PoolingConfig{PoolingMode::kAmp, 2}),
               std::invalid_argument);
}

TEST(OwaWeights, ApcnnUsesBilinearForm) {
  const auto f = DMatrix::from_rows({{1.0, 0.0}, {0.0, 1.0}});
  const auto u = DMatrix::from_rows({{2.0, 0.0}, {0.0, -1.0}});
  const std::vector<double> v{1.0, 1.0};
  const auto w = owa_attention_weights(f, std::span<const double>(v),
                                       PoolingConfig{PoolingMode::kOwaApcnn, 3}, &u);
  EXPECT_NEAR(w.scores[0], std::tanh(2.0), 1e-12);
  EXPECT_NEAR(w.scores[1], std::tanh(-1.0), 1e-12);
}

TEST(MatchModel, InitializationIsSeededAndShaped) {
  const MatchModel a(small_words(), small_chars(), ModelDims{6, 5, 3, 2},
                     PoolingConfig{}, 4);
  const MatchModel b(small_words(), small_chars(), ModelDims{6, 5, 3, 2},
                     PoolingConfig{}, 4);
  EXPECT_EQ(a.word_embed.value, b.word_embed.value);
  EXPECT_EQ(a.char_conv_w.value, b.char_conv_w.value);
  EXPECT_EQ(a.word_conv_w.value.rows(), 6u);
  EXPECT_EQ(a.word_conv_w.value.cols(), 18u);
  EXPECT_EQ(a.char_conv_w.value.cols(), 10u);
  EXPECT_FALSE(a.bilinear);
  EXPECT_TRUE(a.words().contains("<e>"));
  const MatchModel c(small_words(), small_chars(), ModelDims{6, 5, 3, 2},
                     PoolingConfig{PoolingMode::kOwaApcnn, 3}, 4);
  ASSERT_TRUE(c.bilinear);
  EXPECT_EQ(c.parameters().size(), 7u);
}

TEST(MatchModel, OutOfVocabularyMapsToReservedIndex) {
  const MatchModel m(small_words(), small_chars(), ModelDims{4, 4, 3, 3},
                     PoolingConfig{}, 1);
  const std::vector<std::string> toks{"who", "zzz"};
  const auto ids = m.encode_words(toks);
  EXPECT_NE(ids[0], Vocabulary::kOov);
  EXPECT_EQ(ids[1], Vocabulary::kOov);
  EXPECT_EQ(m.encode_chars("a#")[1], Vocabulary::kOov);
}

TEST(CharMatch, IdenticalStringsScoreOne) {
  const MatchModel m(small_words(), small_chars(), ModelDims{4, 8, 3, 3},
                     PoolingConfig{}, 3);
  EXPECT_NEAR(char_match(m, "barack obama", "barack obama"), 1.0, 1e-5);
  EXPECT_THROW(char_match(m, "", "x"), std::invalid_argument);
}

TEST(WordMatch, RequiresEntityMarker) {
  const MatchModel m(small_words(), small_chars(), ModelDims{4, 4, 3, 3},
                     PoolingConfig{}, 3);
  const std::vector<std::string> pred{"people", "person", "place", "of", "birth"};
  const std::vector<std::string> no_marker{"where", "born"};
  EXPECT_THROW(word_match(m, pred, no_marker, m.pooling()), std::invalid_argument);
  const std::vector<std::string> pattern{"where", "was", "<e>", "born"};
  for (const auto mode : {PoolingMode::kTmp, PoolingMode::kAmp, PoolingMode::kOwaAbcnn,
                          PoolingMode::kOwaHabcnn}) {
    const auto s = word_match(m, pred, pattern, PoolingConfig{mode, 3});
    EXPECT_GE(s, -1.0F);
    EXPECT_LE(s, 1.0F);
  }
}

TEST(PatternVector, TmpIsRowMaxOfFeatureMap) {
  MatchModel m(small_words(), small_chars(), ModelDims{5, 4, 3, 3}, PoolingConfig{}, 8);
  const std::vector<std::string> pred{"film", "directed_by"};
  const std::vector<std::string> pattern{"who", "directed", "<e>"};
  const auto p = m.encode_words(pred);
  const auto q = m.encode_words(pattern);
  Tape tape;
  const auto f = conv_tanh(tape, m.word_conv_w, m.word_conv_b, embed(tape, m.word_embed, q), 3);
  const auto want = row_max(tape.value(f));
  const auto got = pattern_vector(m, p, q, PoolingConfig{PoolingMode::kTmp, 3});
  EXPECT_EQ(got, want.values);
  const auto amp = pattern_vector(m, p, q, PoolingConfig{PoolingMode::kAmp, 3});
  for (std::size_t r = 0; r < amp.size(); ++r) EXPECT_LE(amp[r], want.values[r]);
}

class PoolingGradient : public ::testing::TestWithParam<PoolingMode> {};

TEST_P(PoolingGradient, WordMatchMatchesFiniteDifferences) {
  const PoolingConfig pooling{GetParam(), 2};
  const MatchModel base(small_words(), small_chars(), ModelDims{4, 4, 2, 2}, pooling,
                        13, false);
  auto m = base.cast<double>();
  // Larger embeddings keep the feature maps away from ties.
  std::mt19937_64 rng(5);
  init_uniform(m.word_embed.value, 1.0, rng);
  const auto p = m.encode_words(std::vector<std::string>{"people", "person", "birth"});
  const auto q = m.encode_words(std::vector<std::string>{"where", "<e>", "born"});
  auto params = m.parameters();
  const auto report = testing::check_gradients(params, [&](BasicTape<double>& t) {
    return word_match(t, m, p, q, pooling);
  });
  EXPECT_EQ(report.failures, 0u) << report.worst;
  EXPECT_GT(report.checked, 20u);
}

INSTANTIATE_TEST_SUITE_P(AllModes, PoolingGradient,
                         ::testing::Values(PoolingMode::kTmp, PoolingMode::kAmp,
                                           PoolingMode::kOwaAbcnn,
                                           PoolingMode::kOwaHabcnn,
                                           PoolingMode::kOwaApcnn),
                         [](const auto& info) {
                           std::string s(to_string(info.param));
                           std::erase(s, '-');
                           return s;
                         });

TEST(PoolingMode, ParseAndPrint) {
  for (const auto m : {PoolingMode::kTmp, PoolingMode::kAmp, PoolingMode::kOwaAbcnn,
                       PoolingMode::kOwaHabcnn, PoolingMode::kOwaApcnn}) {
    EXPECT_EQ(parse_pooling_mode(to_string(m)), m);
  }
  EXPECT_FALSE(parse_pooling_mode("avg"));
}

}  // namespace
}  // namespace kbqa
