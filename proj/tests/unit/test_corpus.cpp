#include <gtest/gtest.h>

#include <fstream>
#include <json.hpp>
#include <set>
#include <sstream>

#include "dblex/corpus.hpp"
#include "dblex/error.hpp"
#include "test_util.hpp"

using namespace dblex::corpus;

namespace {

Sentence make(std::vector<std::string> tokens, std::string text = {}) {
  Sentence s;
  s.id = "bar:p:0";
  s.page_id = "p";
  s.lang = "bar";
  if (text.empty()) {
    for (const auto& t : tokens) text += (text.empty() ? "" : " ") + t;
  }
  s.text = text;
  s.tokens = std::move(tokens);
  return s;
}

std::vector<std::vector<std::string>> token_lists(const std::vector<Sentence>& ss) {
  std::vector<std::vector<std::string>> out;
  for (const auto& s : ss) out.push_back(s.tokens);
  return out;
}

}  // namespace

TEST(Corpus, SplitsTwoSentences) {
  const auto ss = split_and_tokenize("Das Haus ist alt. Es steht dort.", "Haus.txt", "de", RuleBasedSplitter{});
  ASSERT_EQ(ss.size(), 2u);
  EXPECT_EQ(ss[0].tokens, (std::vector<std::string>{"Das", "Haus", "ist", "alt", "."}));
  EXPECT_EQ(ss[1].tokens, (std::vector<std::string>{"Es", "steht", "dort", "."}));
  EXPECT_EQ(ss[0].id, "de:Haus.txt:0");
  EXPECT_EQ(ss[1].id, "de:Haus.txt:1");
  EXPECT_EQ(ss[1].text, "Es steht dort.");
}

TEST(Corpus, EmptyPage) {
  EXPECT_TRUE(split_and_tokenize("", "p", "bar", RuleBasedSplitter{}).empty());
  EXPECT_TRUE(split_and_tokenize("  \n\n ", "p", "bar", RuleBasedSplitter{}).empty());
}

TEST(Corpus, GoldenPageTokens) {
  const auto text = testutil::read_file(testutil::data_dir() / "tokenizer" / "page.txt");
  const auto golden = nlohmann::json::parse(testutil::read_file(testutil::data_dir() / "tokenizer" / "tokens.json"));
  const auto ss = split_and_tokenize(text, "page.txt", "bar", RuleBasedSplitter{});
  EXPECT_EQ(token_lists(ss), golden.get<std::vector<std::vector<std::string>>>());
}

TEST(Corpus, TokenizePeelsPunctuation) {
  EXPECT_EQ(tokenize("(z'samm)"), (std::vector<std::string>{"(", "z'samm", ")"}));
  EXPECT_EQ(tokenize("  a  b "), (std::vector<std::string>{"a", "b"}));
  EXPECT_EQ(tokenize("Stod-Mitte!?"), (std::vector<std::string>{"Stod-Mitte", "!", "?"}));
  EXPECT_TRUE(tokenize("").empty());
}

TEST(Corpus, PresplitReaderUsesLinesAndSpaces) {
  const auto ss = split_and_tokenize("Des is a Satz .\n\nNo oana do .\n", "p", "bar", PresplitReader{});
  ASSERT_EQ(ss.size(), 2u);
  EXPECT_EQ(ss[1].tokens, (std::vector<std::string>{"No", "oana", "do", "."}));
}

TEST(Corpus, FilterRules) {
  EXPECT_EQ(filter_sentence(make({"a", "b", "c", "d"})), RejectReason::too_short);
  EXPECT_EQ(filter_sentence(make({"a", "b", "c", "d", "e"})), std::nullopt);
  EXPECT_EQ(filter_sentence(make(std::vector<std::string>(25, "x"))), std::nullopt);
  EXPECT_EQ(filter_sentence(make(std::vector<std::string>(26, "x"))), RejectReason::too_long);

  const auto cyr = split_and_tokenize("Der Берлин Artikel ist hier fertig geschrieben.", "p", "de", RuleBasedSplitter{});
  ASSERT_EQ(cyr.size(), 1u);
  EXPECT_EQ(filter_sentence(cyr[0]), RejectReason::foreign_script);

  const auto plain = split_and_tokenize("Da Sepp geht am Sunnda in de Kiach und hoam", "p", "bar", RuleBasedSplitter{});
  ASSERT_EQ(plain[0].tokens.size(), 10u);
  EXPECT_EQ(filter_sentence(plain[0]), std::nullopt);

  const auto bracket = split_and_tokenize("Des is (a bissl a langa Satz", "p", "bar", RuleBasedSplitter{});
  EXPECT_EQ(filter_sentence(bracket[0]), RejectReason::unbalanced_brackets);
  const auto bullet = split_and_tokenize("- Des is a Listn mit Punkt", "p", "bar", RuleBasedSplitter{});
  EXPECT_EQ(filter_sentence(bullet[0]), RejectReason::bullet_point);
}

TEST(Corpus, FilterFirstRuleWins) {
  // too short and foreign at once: length is checked first
  const auto s = split_and_tokenize("Берлин ist.", "p", "de", RuleBasedSplitter{});
  EXPECT_EQ(filter_sentence(s[0]), RejectReason::too_short);
}

TEST(Corpus, PairPages) {
  const PageIndex d = {{"a", 2}, {"b", 1}, {"e", 0}};
  const PageIndex s = {{"A", 3}, {"B", 1}, {"E", 1}};
  const std::vector<PageLink> links = {{"a", "A", "", ""}, {"b", "B", "", ""}, {"c", "C", "", ""}};
  const auto r = pair_pages(links, d, s);
  EXPECT_EQ(r.pairs.size(), 2u);
  ASSERT_EQ(r.dropped.size(), 1u);
  EXPECT_EQ(r.dropped[0].reason, "missing_dialect_page");

  const std::vector<PageLink> more = {{"a", "A", "", ""}, {"a", "B", "", ""}, {"b", "X", "", ""}, {"e", "E", "", ""}};
  const auto r2 = pair_pages(more, d, s);
  ASSERT_EQ(r2.dropped.size(), 3u);
  EXPECT_EQ(r2.dropped[0].reason, "duplicate_dialect_page");
  EXPECT_EQ(r2.dropped[1].reason, "missing_standard_page");
  EXPECT_EQ(r2.dropped[2].reason, "no_retained_sentences");

  EXPECT_TRUE(pair_pages({}, d, s).pairs.empty());
}

TEST(Corpus, PairsAreSubsetOfLinksWithPagesOnBothSides) {
  std::mt19937_64 gen(11);
  for (int n = 0; n < 100; ++n) {
    PageIndex d, s;
    for (int i = 0; i < 8; ++i) {
      if (gen() % 3) d["d" + std::to_string(i)] = gen() % 3;
      if (gen() % 3) s["s" + std::to_string(i)] = gen() % 3;
    }
    std::vector<PageLink> links;
    for (int i = 0; i < 10; ++i) {
      links.push_back({"d" + std::to_string(gen() % 9), "s" + std::to_string(gen() % 9), "", ""});
    }
    const auto r = pair_pages(links, d, s);
    EXPECT_EQ(r.pairs.size() + r.dropped.size(), links.size());
    std::set<std::string> seen;
    for (const auto& p : r.pairs) {
      EXPECT_TRUE(d.count(p.dialect_page_id) && d.at(p.dialect_page_id) > 0);
      EXPECT_TRUE(s.count(p.standard_page_id) && s.at(p.standard_page_id) > 0);
      EXPECT_TRUE(seen.insert(p.dialect_page_id).second);
    }
  }
}

TEST(Corpus, Stats) {
  const std::vector<Sentence> one = {make({"a", "b", "a", "c", "d"})};
  const auto st = compute_stats(one);
  EXPECT_EQ(st.n_tokens, 5u);
  EXPECT_EQ(st.n_types, 4u);
  EXPECT_EQ(st.n_pages, 1u);
  EXPECT_EQ(compute_stats({}), CorpusStats{});

  Sentence tiny = make({"a", "b", "a"});
  EXPECT_EQ(compute_stats(std::vector<Sentence>{tiny}).n_types, 2u);
}

TEST(Corpus, StatsAccumulatorMergeIsOrderIndependent) {
  Sentence a = make({"x", "y", "z", "w", "v"});
  Sentence b = make({"x", "q", "r", "s", "t"});
  b.page_id = "other";
  StatsAccumulator l, r;
  l.add(a);
  r.add(b);
  StatsAccumulator lr = l, rl = r;
  lr.merge(r);
  rl.merge(l);
  EXPECT_EQ(lr.finish(), rl.finish());
  EXPECT_EQ(lr.finish(), compute_stats(std::vector<Sentence>{a, b}));
}

TEST(Corpus, FrequencyIndexIsCaseSensitive) {
  const auto f = build_frequency_index(std::vector<Sentence>{make({"Stod", "stod", "Stod", "a", "b"})});
  EXPECT_EQ(f.at("Stod"), 2u);
  EXPECT_EQ(f.at("stod"), 1u);
}

TEST(Corpus, SentencesJsonlRoundTrip) {
  std::vector<Sentence> ss = split_and_tokenize("„Servus“, hod da Sepp gsogt. Des is a Test.", "Sepp.txt", "bar", RuleBasedSplitter{});
  std::stringstream buf;
  write_sentences_jsonl(buf, ss);
  EXPECT_EQ(read_sentences_jsonl(buf), ss);
}

TEST(Corpus, LinkTableRoundTripAndHeader) {
  testutil::TempDir dir;
  const std::vector<PageLink> links = {{"Minga.txt", "München.txt", "Minga", "München"}};
  {
    std::ofstream out(dir / "links.tsv");
    write_link_table(out, links);
  }
  EXPECT_EQ(read_link_table(dir / "links.tsv"), links);
  try {
    read_link_table(dir / "nope.tsv");
    FAIL();
  } catch (const dblex::Error& e) {
    EXPECT_EQ(e.code(), dblex::Errc::missing_input);
  }
}

TEST(Corpus, FixtureIngest) {
  const auto root = testutil::data_dir() / "fixture";
  const auto bar = ingest_directory(root / "bar", "bar", RuleBasedSplitter{});
  const auto de = ingest_directory(root / "de", "de", RuleBasedSplitter{}, 3);
  EXPECT_EQ(bar.page_ids.size(), 20u);
  EXPECT_EQ(de.page_ids.size(), 20u);
  EXPECT_EQ(bar.sentences.size(), 63u);
  EXPECT_EQ(de.sentences.size(), 63u);
  EXPECT_FALSE(bar.rejections.empty());

  // worker count does not change the result
  EXPECT_EQ(ingest_directory(root / "de", "de", RuleBasedSplitter{}, 1).sentences, de.sentences);

  // stats against a direct count
  std::set<std::string> pages, types;
  std::size_t tokens = 0;
  for (const auto& s : bar.sentences) {
    pages.insert(s.page_id);
    types.insert(s.tokens.begin(), s.tokens.end());
    tokens += s.tokens.size();
  }
  const auto st = compute_stats(bar.sentences);
  EXPECT_EQ(st.n_pages, pages.size());
  EXPECT_EQ(st.n_types, types.size());
  EXPECT_EQ(st.n_tokens, tokens);
  EXPECT_EQ(st.n_sentences, 63u);

  const auto links = read_link_table(root / "links.tsv");
  EXPECT_EQ(links.size(), 22u);
  const auto r = pair_pages(links, bar.page_index(), de.page_index());
  EXPECT_EQ(r.pairs.size(), 20u);
  EXPECT_EQ(r.dropped.size(), 2u);
}
