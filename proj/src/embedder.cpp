#include "dblex/embedder.hpp"

#include <cmath>
#include <sstream>

#include "dblex/error.hpp"
#include "dblex/rng.hpp"
#include "dblex/unicode.hpp"

namespace dblex::embeddings {

namespace {

constexpr std::size_t kPieceLength = 4;
constexpr double kPieceWeight = 0.3;
constexpr double kKeyWeight = 3.0;

bool is_vowel(char32_t c) {
  static constexpr std::u32string_view vowels = U"aeiouyäöüåæøéèêáàíìóòúù";
  return vowels.find(c) != std::u32string_view::npos;
}

// Consonants with repeats collapsed, so spelling variants that differ in
// vowels or doubling share one feature: "Leit", "Leute" -> "lt".
std::string consonant_key(const std::u32string& word) {
  std::u32string key;
  for (char32_t c : word) {
    if (is_vowel(c) || (!key.empty() && key.back() == c)) continue;
    key.push_back(c);
  }
  return unicode::encode(key);
}

void normalize(std::vector<double>& v) {
  double norm = 0.0;
  for (double x : v) norm += x * x;
  if (norm == 0.0) return;
  norm = std::sqrt(norm);
  for (double& x : v) x /= norm;
}

void append_row(std::vector<float>& values, const std::vector<double>& row) {
  for (double x : row) values.push_back(static_cast<float>(x));
}

std::vector<std::string> split_words(const std::string& text) {
  std::vector<std::string> words;
  std::istringstream in(text);
  for (std::string w; in >> w;) words.push_back(std::move(w));
  return words;
}

}  // namespace

MockEmbedder::MockEmbedder(std::size_t dim, std::uint64_t seed) : dim_(dim), seed_(seed) {
  if (dim_ == 0) throw Error(Errc::invalid_argument, "mock embedder dim must be positive");
}

std::string MockEmbedder::embedder_id() const {
  std::string id = "mock-d" + std::to_string(dim_);
  if (seed_ != kDefaultMockSeed) id += "-s" + std::to_string(seed_);
  return id;
}

std::vector<double> MockEmbedder::feature_vector(std::string_view feature) const {
  std::uint64_t state = mix64(fnv1a64(feature.data(), feature.size()) ^ seed_);
  std::vector<double> v(dim_);
  for (std::size_t d = 0; d < dim_; ++d) {
    state = mix64(state + d);
    // 53 random bits mapped onto [-1, 1).
    v[d] = static_cast<double>(state >> 11) * 0x1.0p-52 - 1.0;
  }
  return v;
}

std::vector<double> MockEmbedder::word_vector(std::string_view word) const {
  const std::u32string cps = unicode::decode(unicode::fold_case(word));
  std::vector<double> acc = feature_vector("<" + unicode::encode(cps) + ">");
  auto add = [&](std::string_view feature, double weight) {
    const auto f = feature_vector(feature);
    for (std::size_t d = 0; d < dim_; ++d) acc[d] += weight * f[d];
  };
  const std::u32string padded = U"<" + cps + U">";
  for (std::size_t n = 2; n <= 3; ++n) {
    for (std::size_t i = 0; i + n <= padded.size(); ++i) {
      add(unicode::encode(std::u32string_view(padded).substr(i, n)), 1.0);
    }
  }
  add("#" + consonant_key(cps), kKeyWeight);
  normalize(acc);
  return acc;
}

void MockEmbedder::token_rows(const std::vector<std::string>& words, std::vector<float>& values,
                              std::vector<std::int32_t>& word_map) const {
  std::vector<std::vector<double>> word_vecs;
  word_vecs.reserve(words.size());
  std::vector<double> sentence(dim_, 0.0);
  for (const auto& w : words) {
    word_vecs.push_back(word_vector(w));
    for (std::size_t d = 0; d < dim_; ++d) sentence[d] += word_vecs.back()[d];
  }
  normalize(sentence);

  append_row(values, sentence);
  word_map.push_back(kMarkerRow);
  for (std::size_t w = 0; w < words.size(); ++w) {
    const std::u32string cps = unicode::decode(words[w]);
    for (std::size_t at = 0; at < cps.size(); at += kPieceLength) {
      const auto piece = unicode::encode(std::u32string_view(cps).substr(at, kPieceLength));
      auto row = feature_vector("##" + piece);
      for (std::size_t d = 0; d < dim_; ++d) row[d] = word_vecs[w][d] + kPieceWeight * row[d];
      normalize(row);
      append_row(values, row);
      word_map.push_back(static_cast<std::int32_t>(w));
    }
  }
  append_row(values, feature_vector("</s>"));
  word_map.push_back(kMarkerRow);
}

EmbeddingMatrix MockEmbedder::embed(std::span<const std::string> texts, Level level,
                                    Pooling pooling) {
  std::vector<std::string> ids;
  std::vector<float> values;
  std::vector<std::int32_t> word_map;

  for (std::size_t t = 0; t < texts.size(); ++t) {
    const std::string unit = std::to_string(t);
    const auto words = level == Level::token ? split_words(texts[t]) : corpus::tokenize(texts[t]);
    if (words.empty()) throw Error(Errc::empty_sentence, "text " + unit + " has no words");

    std::vector<float> rows;
    std::vector<std::int32_t> map;
    token_rows(words, rows, map);
    if (level == Level::token) {
      values.insert(values.end(), rows.begin(), rows.end());
      word_map.insert(word_map.end(), map.begin(), map.end());
      ids.insert(ids.end(), map.size(), unit);
      continue;
    }
    // Row 0 is the native sentence vector, so cls and native coincide.
    const auto strategy = pooling == Pooling::native ? Pooling::cls : pooling;
    const auto pooled = pool(rows, dim_, strategy);
    values.insert(values.end(), pooled.begin(), pooled.end());
    ids.push_back(unit);
  }
  return EmbeddingMatrix(std::move(ids), dim_, std::move(values), level, std::move(word_map));
}

std::vector<std::string> embedding_texts(std::span<const corpus::Sentence> sentences, Level level) {
  std::vector<std::string> texts;
  texts.reserve(sentences.size());
  for (const auto& s : sentences) {
    if (level == Level::sentence) {
      texts.push_back(s.text);
      continue;
    }
    std::string joined;
    for (const auto& t : s.tokens) {
      if (!joined.empty()) joined.push_back(' ');
      joined += t;
    }
    texts.push_back(std::move(joined));
  }
  return texts;
}

EmbeddingMatrix fetch_embeddings(Embedder& embedder, std::span<const corpus::Sentence> sentences,
                                 Level level, Pooling pooling) {
  const auto texts = embedding_texts(sentences, level);
  const EmbeddingMatrix raw = embedder.embed(texts, level, pooling);
  std::vector<std::string> ids;
  ids.reserve(sentences.size());
  for (const auto& s : sentences) ids.push_back(s.id);
  return raw.relabeled(ids);
}

}  // namespace dblex::embeddings
