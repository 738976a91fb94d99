#include <gtest/gtest.h>

#include <map>
#include <sstream>

#include <json.hpp>

#include "dblex/error.hpp"
#include "dblex/lexicon.hpp"
#include "generators.hpp"

using namespace dblex::lexicon;
using dblex::aligner::WordPairObservation;

namespace {

LexiconEntry entry(std::string d, std::string s, std::size_t count, double mean_p) {
  return {std::move(d), std::move(s), count, mean_p, 0};
}

}  // namespace

TEST(Lexicon, IsWord) {
  EXPECT_FALSE(is_word("1867"));
  EXPECT_TRUE(is_word("Bürgermäister"));
  EXPECT_TRUE(is_word("z'samm"));
  EXPECT_TRUE(is_word("Stod-Mitte"));
  EXPECT_FALSE(is_word(","));
  EXPECT_FALSE(is_word("..."));
  EXPECT_FALSE(is_word("A1"));
  EXPECT_FALSE(is_word(""));
}

TEST(Lexicon, AggregateManyObservationsOfOnePair) {
  std::vector<WordPairObservation> obs(112, {"Eihgmoant", "Eingemeindet", 0.99, "r"});
  const auto e = aggregate(obs);
  ASSERT_EQ(e.size(), 1u);
  EXPECT_EQ(e[0].count, 112u);
  EXPECT_NEAR(e[0].mean_p, 0.99, 1e-9);
}

TEST(Lexicon, AggregateMeanAndPunctuation) {
  const std::vector<WordPairObservation> obs = {
      {"Stod", "Stadt", 0.6, "r1"}, {"Stod", "Stadt", 0.8, "r2"}, {"Stod", ",", 0.95, "r3"}, {"1867", "1867", 0.99, "r4"}};
  const auto e = aggregate(obs);
  ASSERT_EQ(e.size(), 1u);
  EXPECT_EQ(e[0].count, 2u);
  EXPECT_NEAR(e[0].mean_p, 0.7, 1e-12);
}

TEST(Lexicon, CountsSumToWordValidObservations) {
  std::mt19937_64 rng(4);
  const std::vector<std::string> tokens = {"Stod", "Stadt", ",", "1867", "Leit", "Leute", "z'samm", "."};
  for (int n = 0; n < 100; ++n) {
    std::vector<WordPairObservation> obs;
    std::size_t valid = 0;
    const std::size_t m = rng() % 60;
    for (std::size_t k = 0; k < m; ++k) {
      WordPairObservation o{tokens[rng() % tokens.size()], tokens[rng() % tokens.size()],
                            static_cast<double>(rng() % 1000) / 1000.0, "r"};
      valid += is_word(o.dialect_word) && is_word(o.standard_word);
      obs.push_back(o);
    }
    const auto e = aggregate(obs);
    std::size_t sum = 0;
    for (const auto& x : e) sum += x.count;
    EXPECT_EQ(sum, valid);

    // sharded aggregation gives the same entries
    Aggregator a, b;
    for (std::size_t k = 0; k < obs.size(); ++k) (k % 2 ? a : b).add(obs[k]);
    a.merge(b);
    const auto merged = a.entries();
    ASSERT_EQ(merged.size(), e.size());
    for (std::size_t k = 0; k < e.size(); ++k) {
      EXPECT_EQ(merged[k].dialect_word, e[k].dialect_word);
      EXPECT_EQ(merged[k].count, e[k].count);
      EXPECT_NEAR(merged[k].mean_p, e[k].mean_p, 1e-12);
    }
  }
}

TEST(Lexicon, EntriesAreSortedByCountThenWords) {
  const std::vector<WordPairObservation> obs = {
      {"b", "x", 0.9, ""}, {"a", "y", 0.9, ""}, {"c", "z", 0.9, ""}, {"c", "z", 0.9, ""}, {"a", "x", 0.9, ""}};
  const auto e = aggregate(obs);
  ASSERT_EQ(e.size(), 4u);
  EXPECT_EQ(e[0].dialect_word, "c");
  EXPECT_EQ(e[1].standard_word, "x");
  EXPECT_EQ(e[1].dialect_word, "a");
  EXPECT_EQ(e[2].standard_word, "y");
  EXPECT_EQ(e[3].dialect_word, "b");
}

TEST(Lexicon, ProbabilityCutoff) {
  const std::vector<LexiconEntry> e = {entry("a", "x", 1, 0.79), entry("b", "x", 1, 0.80), entry("c", "x", 1, 0.81),
                                       entry("d", "x", 1, 1.0)};
  EXPECT_EQ(apply_probability_cutoff(e, 0.8).size(), 3u);
  EXPECT_EQ(apply_probability_cutoff(e, 0.0).size(), 4u);
  const auto ones = apply_probability_cutoff(e, 1.0);
  ASSERT_EQ(ones.size(), 1u);
  EXPECT_EQ(ones[0].dialect_word, "d");
  EXPECT_THROW(apply_probability_cutoff(e, 1.01), dblex::Error);
  EXPECT_THROW(apply_probability_cutoff(e, -0.1), dblex::Error);
}

TEST(Lexicon, CutoffIsMonotone) {
  std::mt19937_64 rng(12);
  std::vector<LexiconEntry> e;
  for (int k = 0; k < 200; ++k) e.push_back(entry("w" + std::to_string(k), "s", 1, (rng() % 1001) / 1000.0));
  std::size_t prev = e.size();
  for (int t = 0; t <= 100; ++t) {
    const auto kept = apply_probability_cutoff(e, t / 100.0);
    EXPECT_LE(kept.size(), prev);
    prev = kept.size();
  }
}

TEST(Lexicon, SynonymGroups) {
  const std::vector<LexiconEntry> e = {entry("Minga", "München", 5, 0.9), entry("Minka", "München", 7, 0.9),
                                       entry("Stod", "Stadt", 2, 0.9)};
  const auto g = group_one_to_many(e);
  ASSERT_EQ(g.size(), 2u);
  EXPECT_EQ(g[0].standard_word, "München");
  ASSERT_EQ(g[0].variants.size(), 2u);
  EXPECT_EQ(g[0].variants[0].first, "Minka");
  EXPECT_EQ(g[0].variants[0].second, 7u);
  EXPECT_EQ(g[1].variants.size(), 1u);

  const std::vector<LexiconEntry> distinct = {entry("a", "x", 1, 0.9), entry("b", "y", 1, 0.9)};
  for (const auto& grp : group_one_to_many(distinct)) EXPECT_EQ(grp.variants.size(), 1u);
}

TEST(Lexicon, GroupsMatchIndependentGroupBy) {
  std::mt19937_64 rng(21);
  std::vector<WordPairObservation> obs;
  const auto& vocab = gen::vocabulary();
  for (int k = 0; k < 300; ++k) obs.push_back({vocab[rng() % 12], vocab[rng() % 6], 0.9, ""});
  const auto e = aggregate(obs);
  std::map<std::string, std::map<std::string, std::size_t>> by;
  for (const auto& o : obs) ++by[o.standard_word][o.dialect_word];
  const auto g = group_one_to_many(e);
  ASSERT_EQ(g.size(), by.size());
  for (const auto& grp : g) {
    const auto& want = by.at(grp.standard_word);
    ASSERT_EQ(grp.variants.size(), want.size());
    for (std::size_t k = 0; k < grp.variants.size(); ++k) {
      EXPECT_EQ(grp.variants[k].second, want.at(grp.variants[k].first));
      if (k > 0) {
        EXPECT_GE(grp.variants[k - 1].second, grp.variants[k].second);
      }
    }
  }
}

TEST(Lexicon, AttachFrequencies) {
  dblex::corpus::FrequencyIndex f = {{"Augschburg", 39}};
  const std::vector<LexiconEntry> e = {entry("Augschburg", "Augsburg", 3, 0.9), entry("Nix", "Nichts", 1, 0.9)};
  const auto out = attach_frequencies(e, f);
  EXPECT_EQ(out[0].dialect_freq, 39u);
  EXPECT_EQ(out[1].dialect_freq, 0u);
}

TEST(Lexicon, TsvRoundTripAndGroupsJson) {
  std::vector<LexiconEntry> e = {{"Minga", "München", 4, 0.91234, 17}, {"z'samm", "zusammen", 1, 0.8, 2}};
  std::stringstream buf;
  write_lexicon_tsv(buf, e);
  EXPECT_NE(buf.str().find("0.9123"), std::string::npos);
  const auto back = read_lexicon_tsv(buf);
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(back[0].dialect_word, "Minga");
  EXPECT_EQ(back[0].dialect_freq, 17u);
  EXPECT_NEAR(back[0].mean_p, 0.9123, 1e-9);
  EXPECT_EQ(e[0].ref(), "Minga ||| München");

  std::stringstream js;
  write_synonym_groups_json(js, group_one_to_many(e));
  EXPECT_NO_THROW(nlohmann::json::parse(js.str()));
}
