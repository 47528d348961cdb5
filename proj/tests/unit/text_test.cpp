#include <gtest/gtest.h>

#include "kbqa/text.hpp"

namespace kbqa {
namespace {

using Tokens = std::vector<std::string>;

TEST(Tokenize, LowercasesAndDropsPunctuation) {
  EXPECT_EQ(tokenize("What major cities does US Route 2 run through?"),
            (Tokens{"what", "major", "cities", "does", "us", "route", "2", "run",
                    "through"}));
}

TEST(Tokenize, KeepsDottedAbbreviationsTogether) {
  EXPECT_EQ(tokenize("u.s. route 2"), (Tokens{"u.s.", "route", "2"}));
  EXPECT_EQ(tokenize("U.S. Route 2"), (Tokens{"u.s.", "route", "2"}));
}

TEST(Tokenize, DropsSingleTrailingPeriod) {
  EXPECT_EQ(tokenize("where was he born."), (Tokens{"where", "was", "he", "born"}));
}

TEST(Tokenize, SplitsOnSlashUnderscoreComma) {
  EXPECT_EQ(tokenize("a/b_c,d"), (Tokens{"a", "b", "c", "d"}));
}

TEST(Tokenize, EmptyAndSymbolOnlyInput) {
  EXPECT_TRUE(tokenize("").empty());
  EXPECT_TRUE(tokenize(" ?! -- ").empty());
}

TEST(Tokenize, KeepsApostrophesAndAmpersands) {
  EXPECT_EQ(tokenize("O'Neil & Sons"), (Tokens{"o'neil", "sons"}));
  EXPECT_EQ(tokenize("AT&T"), (Tokens{"at&t"}));
}

TEST(Tokenize, Utf8BytesPassThrough) {
  EXPECT_EQ(tokenize("Zürich"), (Tokens{"zürich"}));
}

TEST(TokenizePredicate, StripsHostAndSplitsPath) {
  const Tokens want{"location", "location", "major", "cities"};
  EXPECT_EQ(tokenize_predicate("www.freebase.com/location/location/major_cities"), want);
  EXPECT_EQ(tokenize_predicate("/location/location/major_cities"), want);
}

TEST(TokenizePredicate, PlaceOfBirth) {
  EXPECT_EQ(tokenize_predicate("www.freebase.com/people/person/place_of_birth"),
            (Tokens{"people", "person", "place", "of", "birth"}));
}

TEST(JoinTokens, UsesSeparator) {
  const Tokens t{"a", "b", "c"};
  EXPECT_EQ(join_tokens(t), "a b c");
  EXPECT_EQ(join_tokens(t, "_"), "a_b_c");
  EXPECT_EQ(join_tokens(Tokens{}), "");
}

TEST(ToLowerAscii, OnlyTouchesAscii) {
  EXPECT_EQ(to_lower_ascii("AbC\xC3\x9C"), "abc\xC3\x9C");
}

}  // namespace
}  // namespace kbqa
