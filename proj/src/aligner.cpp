#include "dblex/aligner.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>

#include <json.hpp>

#include "dblex/error.hpp"
#include "dblex/format.hpp"

namespace dblex::aligner {

using embeddings::EmbeddingMatrix;

Matrix Matrix::from_rows(const std::vector<std::vector<double>>& rows) {
  Matrix m(rows.size(), rows.empty() ? 0 : rows.front().size());
  for (std::size_t i = 0; i < m.rows; ++i) {
    if (rows[i].size() != m.cols) throw Error(Errc::invalid_argument, "ragged matrix rows");
    std::copy(rows[i].begin(), rows[i].end(), m.values.begin() + static_cast<std::ptrdiff_t>(i * m.cols));
  }
  return m;
}

Matrix Matrix::transposed() const {
  Matrix t(cols, rows);
  for (std::size_t i = 0; i < rows; ++i) {
    for (std::size_t j = 0; j < cols; ++j) t.at(j, i) = at(i, j);
  }
  return t;
}

std::vector<std::vector<float>> word_vectors(const EmbeddingMatrix& token_matrix,
                                             std::string_view sentence_id, std::size_t n_words) {
  if (token_matrix.level() != embeddings::Level::token) {
    throw Error(Errc::invalid_argument, "word_vectors needs a token-level matrix");
  }
  const auto range = token_matrix.find(sentence_id);
  if (!range) throw Error(Errc::missing_embedding, "no token rows for " + std::string(sentence_id));

  const std::size_t dim = token_matrix.dim();
  std::vector<std::vector<double>> sums(n_words, std::vector<double>(dim, 0.0));
  std::vector<std::size_t> counts(n_words, 0);
  for (std::size_t r = range->begin; r < range->end; ++r) {
    const auto w = token_matrix.word_map()[r];
    if (w == embeddings::kMarkerRow) continue;
    if (static_cast<std::size_t>(w) >= n_words) {
      throw Error(Errc::unmapped_word, std::string(sentence_id) + ": row maps to word " +
                                           std::to_string(w) + " beyond " + std::to_string(n_words));
    }
    const auto row = token_matrix.row(r);
    for (std::size_t d = 0; d < dim; ++d) sums[w][d] += row[d];
    ++counts[w];
  }

  std::vector<std::vector<float>> out(n_words, std::vector<float>(dim));
  for (std::size_t w = 0; w < n_words; ++w) {
    if (counts[w] == 0) {
      throw Error(Errc::unmapped_word, std::string(sentence_id) + ": word " + std::to_string(w) +
                                           " has no subword rows");
    }
    for (std::size_t d = 0; d < dim; ++d) {
      out[w][d] = static_cast<float>(sums[w][d] / static_cast<double>(counts[w]));
    }
  }
  return out;
}

Matrix similarity_matrix(std::span<const std::vector<float>> src,
                         std::span<const std::vector<float>> tgt,
                         std::span<const std::string> src_words,
                         std::span<const std::string> tgt_words) {
  if (src.empty() || tgt.empty()) throw Error(Errc::invalid_argument, "similarity of empty word list");
  auto check_norm = [](const std::vector<float>& v, std::span<const std::string> words,
                       std::size_t i, const char* side) {
    if (std::all_of(v.begin(), v.end(), [](float x) { return x == 0.0f; })) {
      const std::string name = i < words.size() ? words[i] : std::string(side) + "[" + std::to_string(i) + "]";
      throw Error(Errc::zero_norm, "word vector of '" + name + "' is zero");
    }
  };
  for (std::size_t i = 0; i < src.size(); ++i) check_norm(src[i], src_words, i, "src");
  for (std::size_t j = 0; j < tgt.size(); ++j) check_norm(tgt[j], tgt_words, j, "tgt");

  Matrix sim(src.size(), tgt.size());
  for (std::size_t i = 0; i < src.size(); ++i) {
    for (std::size_t j = 0; j < tgt.size(); ++j) sim.at(i, j) = embeddings::cosine(src[i], tgt[j]);
  }
  return sim;
}

namespace {

// Softmax over n values spaced `stride` apart. Row and column softmax share
// this code so that softmax(column j of M) is bitwise equal to
// softmax(row j of M^T).
void softmax_strided(const double* in, std::size_t n, std::size_t stride, double* out) {
  double max = in[0];
  for (std::size_t k = 1; k < n; ++k) max = std::max(max, in[k * stride]);
  double sum = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    out[k * stride] = std::exp(in[k * stride] - max);
    sum += out[k * stride];
  }
  for (std::size_t k = 0; k < n; ++k) out[k * stride] /= sum;
}

}  // namespace

std::vector<AlignmentLink> extract_alignment(const Matrix& sim) {
  const std::size_t R = sim.rows;
  const std::size_t C = sim.cols;
  if (R == 0 || C == 0) return {};
  for (double v : sim.values) {
    if (!std::isfinite(v)) throw Error(Errc::non_finite, "similarity matrix has NaN/Inf");
  }

  Matrix fwd(R, C), bwd(R, C);
  for (std::size_t i = 0; i < R; ++i) softmax_strided(&sim.values[i * C], C, 1, &fwd.values[i * C]);
  for (std::size_t j = 0; j < C; ++j) softmax_strided(&sim.values[j], R, C, &bwd.values[j]);

  std::vector<double> row_max(R, 0.0), col_max(C, 0.0);
  for (std::size_t i = 0; i < R; ++i) {
    for (std::size_t j = 0; j < C; ++j) {
      row_max[i] = std::max(row_max[i], fwd.at(i, j));
      col_max[j] = std::max(col_max[j], bwd.at(i, j));
    }
  }

  struct Candidate {
    std::size_t i, j;
  };
  std::vector<Candidate> candidates;
  for (std::size_t i = 0; i < R; ++i) {
    for (std::size_t j = 0; j < C; ++j) {
      if (fwd.at(i, j) == row_max[i] && bwd.at(i, j) == col_max[j]) candidates.push_back({i, j});
    }
  }
  // Two candidates can only conflict when they share a row or a column; in
  // either case i + j orders them by the index they differ in.
  std::stable_sort(candidates.begin(), candidates.end(), [](const Candidate& a, const Candidate& b) {
    return a.i + a.j < b.i + b.j;
  });

  std::vector<bool> row_used(R, false), col_used(C, false);
  std::vector<AlignmentLink> links;
  for (const auto& c : candidates) {
    if (row_used[c.i] || col_used[c.j]) continue;
    row_used[c.i] = col_used[c.j] = true;
    links.push_back({c.i, c.j, std::sqrt(fwd.at(c.i, c.j) * bwd.at(c.i, c.j))});
  }
  std::sort(links.begin(), links.end(), [](const AlignmentLink& a, const AlignmentLink& b) {
    return a.src_word_idx < b.src_word_idx;
  });
  return links;
}

SentenceAlignment align_sentence_pair(const corpus::Sentence& src, const corpus::Sentence& tgt,
                                      const EmbeddingMatrix& src_tokens,
                                      const EmbeddingMatrix& tgt_tokens,
                                      const AlignOptions& options) {
  const auto src_vecs = word_vectors(src_tokens, src.id, src.tokens.size());
  const auto tgt_vecs = word_vectors(tgt_tokens, tgt.id, tgt.tokens.size());
  Matrix sim = similarity_matrix(src_vecs, tgt_vecs, src.tokens, tgt.tokens);
  for (double& v : sim.values) v *= options.scale;

  SentenceAlignment out;
  out.src_id = src.id;
  out.tgt_id = tgt.id;
  out.links = extract_alignment(sim);
  const std::string ref = src.id + " ||| " + tgt.id;
  for (const auto& l : out.links) {
    out.observations.push_back({src.tokens[l.src_word_idx], tgt.tokens[l.tgt_word_idx], l.p, ref});
  }
  return out;
}

std::string alignment_json_line(const SentenceAlignment& a) {
  nlohmann::json links = nlohmann::json::array();
  for (const auto& l : a.links) links.push_back({{"i", l.src_word_idx}, {"j", l.tgt_word_idx}, {"p", l.p}});
  const nlohmann::json j = {{"src_sentence_id", a.src_id}, {"tgt_sentence_id", a.tgt_id}, {"links", links}};
  return j.dump();
}

std::string pharaoh_line(const SentenceAlignment& a) {
  std::string out;
  for (const auto& l : a.links) {
    if (!out.empty()) out.push_back(' ');
    out += std::to_string(l.src_word_idx) + "-" + std::to_string(l.tgt_word_idx);
  }
  return out;
}

void write_observations_tsv(std::ostream& out, std::span<const WordPairObservation> obs) {
  out << "dialect_word\tstandard_word\tp\tpair_ref\n";
  for (const auto& o : obs) {
    out << o.dialect_word << '\t' << o.standard_word << '\t' << format_fixed(o.p, 10) << '\t'
        << o.pair_ref << '\n';
  }
}

std::vector<WordPairObservation> read_observations_tsv(std::istream& in) {
  std::vector<WordPairObservation> out;
  std::string line;
  bool header = true;
  while (std::getline(in, line)) {
    if (header) {
      header = false;
      if (line.rfind("dialect_word\t", 0) == 0) continue;
    }
    if (line.empty()) continue;
    std::vector<std::string> cols;
    std::istringstream row(line);
    for (std::string col; std::getline(row, col, '\t');) cols.push_back(col);
    if (cols.size() != 4) throw Error(Errc::invalid_argument, "observation row needs 4 columns: " + line);
    out.push_back({cols[0], cols[1], std::stod(cols[2]), cols[3]});
  }
  return out;
}

}  // namespace dblex::aligner
