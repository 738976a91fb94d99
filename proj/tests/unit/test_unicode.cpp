#include <gtest/gtest.h>

#include <random>
#include <set>

#include "dblex/error.hpp"
#include "dblex/rng.hpp"
#include "dblex/stats.hpp"
#include "dblex/unicode.hpp"
#include "oracles.hpp"

namespace u = dblex::unicode;

TEST(Unicode, DecodeEncodeRoundTrip) {
  std::mt19937_64 gen(7);
  for (int n = 0; n < 200; ++n) {
    const std::string s = oracle::random_word(gen, 0, 30);
    EXPECT_EQ(u::encode(u::decode(s)), s);
    EXPECT_EQ(u::decode(s), oracle::utf8_decode(s));
  }
}

TEST(Unicode, IllFormedBytesBecomeReplacementChars) {
  const std::u32string d = u::decode(std::string("a\xFF\xC3"));
  EXPECT_EQ(d, (std::u32string{U'a', 0xFFFD, 0xFFFD}));
}

TEST(Unicode, Classification) {
  EXPECT_TRUE(u::is_letter(U'ä'));
  EXPECT_TRUE(u::is_letter(U'ß'));
  EXPECT_FALSE(u::is_letter(U'1'));
  EXPECT_TRUE(u::is_digit(U'7'));
  EXPECT_TRUE(u::is_punct(U','));
  EXPECT_TRUE(u::is_punct(U'„'));
  EXPECT_TRUE(u::is_upper(U'Ö'));
  EXPECT_FALSE(u::is_upper(U'ö'));
  EXPECT_TRUE(u::is_foreign_script(U'Б'));
  EXPECT_TRUE(u::is_foreign_script(U'λ'));
  EXPECT_TRUE(u::is_foreign_script(U'א'));
  EXPECT_FALSE(u::is_foreign_script(U'é'));
}

TEST(Unicode, FoldCaseAndSpaces) {
  EXPECT_EQ(u::fold_case("Obapfäjza"), "obapfäjza");
  EXPECT_EQ(u::fold_case("STRASSE"), u::fold_case("straße"));
  EXPECT_EQ(u::normalize_space("  a \t b\n\nc "), "a b c");
  EXPECT_EQ(u::length("Bürgermäister"), 13u);
}

TEST(Rng, SameSeedSameStream) {
  dblex::Rng a(42), b(42), c(43);
  std::vector<std::uint64_t> xa, xb, xc;
  for (int i = 0; i < 10; ++i) {
    xa.push_back(a.next());
    xb.push_back(b.next());
    xc.push_back(c.next());
  }
  EXPECT_EQ(xa, xb);
  EXPECT_NE(xa, xc);
}

TEST(Rng, BelowStaysInRange) {
  dblex::Rng r(1);
  for (std::uint64_t bound : {1ULL, 2ULL, 3ULL, 1000ULL, (1ULL << 63) + 5}) {
    for (int i = 0; i < 200; ++i) EXPECT_LT(r.below(bound), bound);
  }
}

TEST(Rng, SampleIndicesDistinctSortedClamped) {
  dblex::Rng r(9);
  for (std::size_t pop : {0u, 1u, 5u, 100u}) {
    for (std::size_t k : {0u, 1u, 5u, 200u}) {
      const auto s = dblex::sample_indices(pop, k, r);
      EXPECT_EQ(s.size(), std::min(pop, k));
      EXPECT_TRUE(std::is_sorted(s.begin(), s.end()));
      EXPECT_EQ(std::set<std::size_t>(s.begin(), s.end()).size(), s.size());
      for (auto i : s) EXPECT_LT(i, pop);
    }
  }
}

TEST(Rng, SampleIndicesCoversPopulationUniformly) {
  dblex::Rng r(3);
  std::vector<int> hits(10);
  for (int t = 0; t < 5000; ++t) {
    for (auto i : dblex::sample_indices(10, 3, r)) ++hits[i];
  }
  for (int h : hits) EXPECT_NEAR(h, 1500, 150);
}

TEST(Stats, PearsonMatchesTextbook) {
  const std::vector<double> x = {1, 2, 3}, y = {1, 3, 2};
  EXPECT_NEAR(dblex::stats::pearson(x, y), 0.5, 1e-9);
  std::mt19937_64 gen(5);
  std::uniform_real_distribution<double> d(-3, 3);
  for (int n = 0; n < 50; ++n) {
    std::vector<double> a(20), b(20);
    for (int i = 0; i < 20; ++i) {
      a[i] = d(gen);
      b[i] = a[i] * 0.3 + d(gen);
    }
    EXPECT_NEAR(dblex::stats::pearson(a, b), oracle::pearson(a, b), 1e-9);
  }
}

TEST(Stats, PearsonDegenerate) {
  const std::vector<double> x = {1, 1, 1}, y = {1, 2, 3}, one = {1};
  try {
    dblex::stats::pearson(x, y);
    FAIL();
  } catch (const dblex::Error& e) {
    EXPECT_EQ(e.code(), dblex::Errc::degenerate_sample);
  }
  EXPECT_THROW(dblex::stats::pearson(one, one), dblex::Error);
}

TEST(Stats, MeanAndStd) {
  const std::vector<double> x = {2, 4, 4, 4, 5, 5, 7, 9};
  EXPECT_DOUBLE_EQ(dblex::stats::mean(x), 5.0);
  EXPECT_NEAR(dblex::stats::sample_std(x), 2.138089935, 1e-9);
}
