#pragma once

#include <cstddef>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "dblex/corpus.hpp"
#include "dblex/embeddings.hpp"

namespace dblex::aligner {

/// Dense row-major matrix of doubles.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> values;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), values(r * c, fill) {}
  static Matrix from_rows(const std::vector<std::vector<double>>& rows);

  double& at(std::size_t i, std::size_t j) { return values[i * cols + j]; }
  double at(std::size_t i, std::size_t j) const { return values[i * cols + j]; }
  Matrix transposed() const;
};

struct AlignmentLink {
  std::size_t src_word_idx = 0;
  std::size_t tgt_word_idx = 0;
  double p = 0.0;

  bool operator==(const AlignmentLink&) const = default;
};

struct WordPairObservation {
  std::string dialect_word;
  std::string standard_word;
  double p = 0.0;
  std::string pair_ref;  // SentencePair::ref() of the source sentence pair
};

/// One vector per word: the mean of the word's subword rows. Marker rows are
/// skipped. Throws unmapped_word if a word in [0, n_words) has no rows.
std::vector<std::vector<float>> word_vectors(const embeddings::EmbeddingMatrix& token_matrix,
                                             std::string_view sentence_id, std::size_t n_words);

/// Entry (i, j) = cosine(src_i, tgt_j). Optional word labels are only used in
/// the zero_norm error message.
Matrix similarity_matrix(std::span<const std::vector<float>> src,
                         std::span<const std::vector<float>> tgt,
                         std::span<const std::string> src_words = {},
                         std::span<const std::string> tgt_words = {});

/// Row-wise softmax gives p_fwd, column-wise softmax p_bwd. (i, j) is a
/// candidate when j maximizes p_fwd(i, .) and i maximizes p_bwd(., j). Ties
/// can make a row or column hold several candidates; those are resolved
/// greedily in order of i + j (then i), preferring lower indices, which
/// keeps the result one-to-one and symmetric under transposition.
/// Link probability is sqrt(p_fwd * p_bwd). Links come back sorted by
/// source index.
std::vector<AlignmentLink> extract_alignment(const Matrix& sim);

/// Cosines lie in [-1, 1], so an unscaled softmax over a sentence of n words
/// can never exceed 1 / (1 + (n - 1) e^-2); for the 5-token minimum that is
/// about 0.65, below any useful probability cutoff. The similarity matrix is
/// therefore multiplied by `scale` before extraction. A word whose cosine
/// beats every competitor by 0.3 in a 25-token sentence reaches p >= 0.8 at
/// scale 16.
inline constexpr double kDefaultSimilarityScale = 16.0;

struct AlignOptions {
  double scale = kDefaultSimilarityScale;
};

struct SentenceAlignment {
  std::string src_id;
  std::string tgt_id;
  std::vector<AlignmentLink> links;
  std::vector<WordPairObservation> observations;
};

/// word_vectors -> similarity_matrix -> scale -> extract_alignment, with link
/// indices mapped back to surface tokens.
SentenceAlignment align_sentence_pair(const corpus::Sentence& src, const corpus::Sentence& tgt,
                                      const embeddings::EmbeddingMatrix& src_tokens,
                                      const embeddings::EmbeddingMatrix& tgt_tokens,
                                      const AlignOptions& options = {});

/// {"src_sentence_id", "tgt_sentence_id", "links": [{"i", "j", "p"}]}
std::string alignment_json_line(const SentenceAlignment& a);
/// "i-j i-j ..." ordered by source index.
std::string pharaoh_line(const SentenceAlignment& a);

void write_observations_tsv(std::ostream& out, std::span<const WordPairObservation> obs);
std::vector<WordPairObservation> read_observations_tsv(std::istream& in);

}  // namespace dblex::aligner
