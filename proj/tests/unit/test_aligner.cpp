#include <gtest/gtest.h>

#include <cmath>
#include <set>
#include <sstream>

#include "dblex/aligner.hpp"
#include "dblex/embedder.hpp"
#include "dblex/error.hpp"
#include "generators.hpp"

using namespace dblex::aligner;
using dblex::embeddings::EmbeddingMatrix;
using dblex::embeddings::kMarkerRow;
using dblex::embeddings::Level;

namespace {

std::vector<std::tuple<std::size_t, std::size_t, double>> as_tuples(const std::vector<AlignmentLink>& links) {
  std::vector<std::tuple<std::size_t, std::size_t, double>> out;
  for (const auto& l : links) out.emplace_back(l.src_word_idx, l.tgt_word_idx, l.p);
  return out;
}

void expect_matches_oracle(const Matrix& m) {
  const auto got = extract_alignment(m);
  const auto want = oracle::alignment(gen::to_rows(m));
  ASSERT_EQ(got.size(), want.size());
  for (std::size_t k = 0; k < got.size(); ++k) {
    EXPECT_EQ(got[k].src_word_idx, want[k].i);
    EXPECT_EQ(got[k].tgt_word_idx, want[k].j);
    EXPECT_NEAR(got[k].p, want[k].p, 1e-12);
  }
}

dblex::corpus::Sentence sentence(const std::string& id, std::vector<std::string> tokens) {
  dblex::corpus::Sentence s;
  s.id = id;
  s.tokens = std::move(tokens);
  for (const auto& t : s.tokens) s.text += (s.text.empty() ? "" : " ") + t;
  return s;
}

}  // namespace

TEST(Aligner, WordVectorsAverageSubwords) {
  // marker, word 0 over two rows, word 1 over one row, marker
  const EmbeddingMatrix m({"s", "s", "s", "s", "s"}, 2, {9, 9, 1, 1, 3, 3, 5, -1, 7, 7}, Level::token,
                          {kMarkerRow, 0, 0, 1, kMarkerRow});
  const auto v = word_vectors(m, "s", 2);
  ASSERT_EQ(v.size(), 2u);
  EXPECT_EQ(v[0], (std::vector<float>{2, 2}));
  EXPECT_EQ(v[1], (std::vector<float>{5, -1}));
  try {
    word_vectors(m, "s", 3);
    FAIL();
  } catch (const dblex::Error& e) {
    EXPECT_EQ(e.code(), dblex::Errc::unmapped_word);
  }
}

TEST(Aligner, WordVectorsFourWordsOverSevenRows) {
  const std::vector<std::int32_t> map = {kMarkerRow, 0, 1, 1, 2, 3, 3, 3, kMarkerRow};
  std::vector<float> values;
  for (int r = 0; r < 9; ++r) {
    values.push_back(static_cast<float>(r));
    values.push_back(static_cast<float>(r * r));
  }
  const EmbeddingMatrix m(std::vector<std::string>(9, "s"), 2, values, Level::token, map);
  const auto v = word_vectors(m, "s", 4);
  for (int w = 0; w < 4; ++w) {
    double a = 0, b = 0, n = 0;
    for (int r = 0; r < 9; ++r) {
      if (map[r] == w) {
        a += r;
        b += r * r;
        ++n;
      }
    }
    EXPECT_FLOAT_EQ(v[w][0], static_cast<float>(a / n));
    EXPECT_FLOAT_EQ(v[w][1], static_cast<float>(b / n));
  }
}

TEST(Aligner, SimilarityMatrix) {
  const std::vector<std::vector<float>> one = {{0.6f, 0.8f}};
  EXPECT_DOUBLE_EQ(similarity_matrix(one, one).at(0, 0), 1.0);
  const std::vector<std::vector<float>> basis = {{1, 0, 0}, {0, 1, 0}, {0, 0, 1}};
  const auto id = similarity_matrix(basis, basis);
  for (std::size_t i = 0; i < 3; ++i) {
    for (std::size_t j = 0; j < 3; ++j) EXPECT_DOUBLE_EQ(id.at(i, j), i == j ? 1.0 : 0.0);
  }
  const std::vector<std::vector<float>> src = {{1, 2}, {-1, 0.5f}, {3, 3}}, tgt = {{0, 1}, {2, -1}};
  const auto m = similarity_matrix(src, tgt);
  ASSERT_EQ(m.rows, 3u);
  ASSERT_EQ(m.cols, 2u);
  for (std::size_t i = 0; i < 3; ++i) {
    for (std::size_t j = 0; j < 2; ++j) {
      EXPECT_NEAR(m.at(i, j),
                  oracle::cosine({src[i].begin(), src[i].end()}, {tgt[j].begin(), tgt[j].end()}), 1e-12);
    }
  }
  const std::vector<std::vector<float>> zero = {{0, 0}};
  const std::vector<std::string> words = {"Stod"};
  try {
    similarity_matrix(zero, tgt, words, {});
    FAIL();
  } catch (const dblex::Error& e) {
    EXPECT_EQ(e.code(), dblex::Errc::zero_norm);
    EXPECT_NE(e.detail().find("Stod"), std::string::npos);
  }
}

TEST(Aligner, DominantDiagonal) {
  const auto links = extract_alignment(Matrix::from_rows({{5, 0}, {0, 5}}));
  ASSERT_EQ(links.size(), 2u);
  const double p = std::exp(5.0) / (std::exp(5.0) + 1);
  EXPECT_EQ(links[0].tgt_word_idx, 0u);
  EXPECT_EQ(links[1].tgt_word_idx, 1u);
  EXPECT_NEAR(links[0].p, p, 1e-12);
  EXPECT_NEAR(links[1].p, p, 1e-12);
}

TEST(Aligner, UniformMatrixTakesDiagonal) {
  const auto links = extract_alignment(Matrix::from_rows({{1, 1}, {1, 1}}));
  EXPECT_EQ(as_tuples(links), (std::vector<std::tuple<std::size_t, std::size_t, double>>{{0, 0, 0.5}, {1, 1, 0.5}}));
}

TEST(Aligner, ThreeByFourAgainstOracle) {
  expect_matches_oracle(Matrix::from_rows({{0.9, 0.1, 0.2, 0.3}, {0.2, 0.8, 0.85, 0.1}, {0.1, 0.2, 0.7, 0.6}}));
}

TEST(Aligner, SingleCellHasProbabilityOne) {
  const auto links = extract_alignment(Matrix::from_rows({{-0.3}}));
  ASSERT_EQ(links.size(), 1u);
  EXPECT_EQ(links[0].p, 1.0);
  EXPECT_TRUE(extract_alignment(Matrix{}).empty());
}

TEST(Aligner, RandomMatricesAgainstOracle) {
  std::mt19937_64 rng(77);
  for (int n = 0; n < 300; ++n) {
    const std::size_t r = 1 + rng() % 12, c = 1 + rng() % 15;
    const int levels = n % 3 == 0 ? 5 : 513;
    expect_matches_oracle(gen::random_grid_matrix(rng, r, c, levels));
  }
}

TEST(Aligner, OneToOneAndProbabilityRange) {
  std::mt19937_64 rng(5);
  for (int n = 0; n < 300; ++n) {
    const auto m = gen::random_grid_matrix(rng, 1 + rng() % 12, 1 + rng() % 15, n % 2 ? 3 : 513);
    std::set<std::size_t> rows, cols;
    for (const auto& l : extract_alignment(m)) {
      EXPECT_TRUE(rows.insert(l.src_word_idx).second);
      EXPECT_TRUE(cols.insert(l.tgt_word_idx).second);
      EXPECT_GT(l.p, 0.0);
      EXPECT_LE(l.p, 1.0);
      if (m.rows > 1 || m.cols > 1) {
        EXPECT_LT(l.p, 1.0);
      }
    }
  }
}

TEST(Aligner, TranspositionAndShift) {
  std::mt19937_64 rng(6);
  for (int n = 0; n < 300; ++n) {
    const auto m = gen::random_grid_matrix(rng, 1 + rng() % 12, 1 + rng() % 15, n % 2 ? 4 : 513);
    const auto links = extract_alignment(m);

    auto t = extract_alignment(m.transposed());
    std::vector<AlignmentLink> back;
    for (const auto& l : t) back.push_back({l.tgt_word_idx, l.src_word_idx, l.p});
    std::sort(back.begin(), back.end(),
              [](const AlignmentLink& a, const AlignmentLink& b) { return a.src_word_idx < b.src_word_idx; });
    EXPECT_EQ(back, links);

    Matrix shifted = m;
    const double c = static_cast<double>(static_cast<int>(rng() % 17) - 8) / 4.0;
    for (auto& v : shifted.values) v += c;
    EXPECT_EQ(extract_alignment(shifted), links);
  }
}

TEST(Aligner, IdenticalSentencesAlignDiagonally) {
  dblex::embeddings::MockEmbedder mock(64);
  const auto src = sentence("bar:p:0", {"Do", "wohnan", "vui", "Leit", "do", "."});
  auto tgt = src;
  tgt.id = "de:p:0";
  const std::vector<dblex::corpus::Sentence> ss = {src}, ts = {tgt};
  const auto es = dblex::embeddings::fetch_embeddings(mock, ss, Level::token, dblex::embeddings::Pooling::cls);
  const auto et = dblex::embeddings::fetch_embeddings(mock, ts, Level::token, dblex::embeddings::Pooling::cls);
  const auto a = align_sentence_pair(src, tgt, es, et);
  ASSERT_EQ(a.links.size(), src.tokens.size());
  for (std::size_t k = 0; k < a.links.size(); ++k) {
    EXPECT_EQ(a.links[k].src_word_idx, k);
    EXPECT_EQ(a.links[k].tgt_word_idx, k);
    EXPECT_EQ(a.observations[k].dialect_word, src.tokens[k]);
    EXPECT_EQ(a.observations[k].standard_word, tgt.tokens[k]);
    EXPECT_EQ(a.observations[k].pair_ref, "bar:p:0 ||| de:p:0");
  }
}

TEST(Aligner, ExtraWordStaysUnaligned) {
  // two shared words plus an extra source word orthogonal to everything
  const EmbeddingMatrix es({"s", "s", "s"}, 3, {1, 0, 0, 0, 1, 0, 0, 0, 1}, Level::token, {0, 1, 2});
  const EmbeddingMatrix et({"t", "t"}, 3, {1, 0, 0, 0, 1, 0}, Level::token, {0, 1});
  const auto src = sentence("s", {"Leit", "do", "xyz"});
  const auto tgt = sentence("t", {"Leute", "da"});
  const auto a = align_sentence_pair(src, tgt, es, et);
  ASSERT_EQ(a.links.size(), 2u);
  for (const auto& l : a.links) EXPECT_NE(l.src_word_idx, 2u);
}

TEST(Aligner, ScaleIsAppliedBeforeExtraction) {
  const EmbeddingMatrix es({"s", "s"}, 2, {1, 0, 0, 1}, Level::token, {0, 1});
  const auto src = sentence("s", {"a", "b"});
  const auto tgt = sentence("t", {"a", "b"});
  const EmbeddingMatrix et({"t", "t"}, 2, {1, 0, 0, 1}, Level::token, {0, 1});
  const auto unscaled = align_sentence_pair(src, tgt, es, et, AlignOptions{1.0});
  const auto scaled = align_sentence_pair(src, tgt, es, et, AlignOptions{16.0});
  EXPECT_NEAR(unscaled.links[0].p, std::exp(1.0) / (std::exp(1.0) + 1), 1e-12);
  EXPECT_NEAR(scaled.links[0].p, std::exp(16.0) / (std::exp(16.0) + 1), 1e-12);
}

TEST(Aligner, OutputFormats) {
  SentenceAlignment a;
  a.src_id = "bar:p:1";
  a.tgt_id = "de:q:2";
  a.links = {{0, 1, 0.5}, {2, 0, 0.25}};
  EXPECT_EQ(pharaoh_line(a), "0-1 2-0");
  const auto j = nlohmann::json::parse(alignment_json_line(a));
  EXPECT_EQ(j.at("src_sentence_id"), "bar:p:1");
  EXPECT_EQ(j.at("links").size(), 2u);
  EXPECT_EQ(j.at("links")[1].at("i"), 2);

  const std::vector<WordPairObservation> obs = {{"Stod", "Stadt", 0.875, "bar:p:1 ||| de:q:2"}};
  std::stringstream buf;
  write_observations_tsv(buf, obs);
  const auto back = read_observations_tsv(buf);
  ASSERT_EQ(back.size(), 1u);
  EXPECT_EQ(back[0].dialect_word, "Stod");
  EXPECT_EQ(back[0].pair_ref, obs[0].pair_ref);
  EXPECT_NEAR(back[0].p, 0.875, 1e-9);
}
