#include "dblex/miner.hpp"

#include <algorithm>
#include <istream>
#include <ostream>
#include <set>
#include <sstream>

#include "dblex/error.hpp"
#include "dblex/format.hpp"
#include "dblex/rng.hpp"
#include "dblex/stats.hpp"

namespace dblex::miner {

using embeddings::EmbeddingMatrix;
using nlohmann::json;

std::string SentencePair::ref() const { return src_id + " ||| " + tgt_id; }

namespace {

std::span<const float> sentence_row(const EmbeddingMatrix& m, const std::string& id) {
  const auto range = m.find(id);
  if (!range || range->size() != 1) {
    throw Error(Errc::missing_embedding, "no sentence embedding for " + id);
  }
  return m.row(range->begin);
}

}  // namespace

std::vector<SentencePair> mine_page_pair(std::span<const corpus::Sentence> src,
                                         std::span<const corpus::Sentence> tgt,
                                         const EmbeddingMatrix& src_embeddings,
                                         const EmbeddingMatrix& tgt_embeddings, std::size_t k,
                                         std::string_view embedder_id) {
  if (k == 0) throw Error(Errc::invalid_argument, "k must be positive");
  if (src.empty() || tgt.empty()) {
    throw Error(Errc::invalid_argument, "mine_page_pair needs sentences on both sides");
  }

  std::vector<std::span<const float>> tgt_rows;
  tgt_rows.reserve(tgt.size());
  for (const auto& t : tgt) tgt_rows.push_back(sentence_row(tgt_embeddings, t.id));

  std::vector<SentencePair> out;
  std::vector<std::pair<double, std::size_t>> scored(tgt.size());
  for (const auto& s : src) {
    if (!tgt.empty() && s.lang == tgt.front().lang) {
      throw Error(Errc::invalid_argument, "source and target share language " + s.lang);
    }
    const auto src_row = sentence_row(src_embeddings, s.id);
    for (std::size_t j = 0; j < tgt.size(); ++j) {
      scored[j] = {embeddings::cosine(src_row, tgt_rows[j]), j};
    }
    const std::size_t take = std::min(k, scored.size());
    std::partial_sort(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(take),
                      scored.end(), [&](const auto& a, const auto& b) {
                        if (a.first != b.first) return a.first > b.first;
                        return tgt[a.second].id < tgt[b.second].id;
                      });
    for (std::size_t r = 0; r < take; ++r) {
      out.push_back({s.id, tgt[scored[r].second].id, scored[r].first, std::string(embedder_id)});
    }
  }
  return out;
}

std::vector<SentencePair> apply_cutoff(std::span<const SentencePair> pairs, double tau) {
  if (!(tau >= -1.0 && tau <= 1.0)) {
    throw Error(Errc::invalid_argument, "cosine cutoff must lie in [-1, 1], got " + std::to_string(tau));
  }
  std::vector<SentencePair> out;
  std::copy_if(pairs.begin(), pairs.end(), std::back_inserter(out),
               [tau](const SentencePair& p) { return p.cos >= tau; });
  return out;
}

ScoreDistribution score_distribution(std::span<const SentencePair> pairs,
                                     std::span<const double> thresholds) {
  ScoreDistribution d;
  d.n = pairs.size();
  if (!pairs.empty()) d.embedder_id = pairs.front().embedder_id;
  std::vector<double> scores;
  scores.reserve(pairs.size());
  for (const auto& p : pairs) scores.push_back(p.cos);

  std::vector<double> sorted_thresholds(thresholds.begin(), thresholds.end());
  std::sort(sorted_thresholds.begin(), sorted_thresholds.end());
  if (!scores.empty()) {
    d.mean = stats::mean(scores);
    d.std = stats::sample_std(scores);
  }
  for (double t : sorted_thresholds) {
    const auto hits = std::count_if(scores.begin(), scores.end(), [t](double c) { return c >= t; });
    const double frac = scores.empty() ? 0.0 : static_cast<double>(hits) / static_cast<double>(scores.size());
    d.fraction_at_or_above.emplace_back(t, frac);
  }
  return d;
}

std::map<int, std::vector<double>> group_scores_by_label(std::span<const SentencePair> pairs,
                                                         std::span<const PairLabel> labels) {
  std::map<std::string, double> by_ref;
  for (const auto& p : pairs) by_ref.emplace(p.ref(), p.cos);
  std::map<int, std::vector<double>> groups;
  for (const auto& l : labels) {
    if (l.label.size() != 1 || l.label[0] < '1' || l.label[0] > '5') continue;
    const auto it = by_ref.find(l.pair_ref);
    if (it == by_ref.end()) continue;
    groups[l.label[0] - '0'].push_back(it->second);
  }
  return groups;
}

AnnotationSample sample_for_annotation(std::span<const SentencePair> pairs, std::size_t n,
                                       double lo, double hi, std::uint64_t seed) {
  std::vector<std::size_t> in_range;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    if (pairs[i].cos >= lo && pairs[i].cos <= hi) in_range.push_back(i);
  }
  AnnotationSample sample;
  sample.population = in_range.size();
  sample.short_population = in_range.size() < n;
  Rng rng(seed);
  for (std::size_t pick : sample_indices(in_range.size(), n, rng)) {
    sample.pairs.push_back(pairs[in_range[pick]]);
  }
  return sample;
}

json compare_models(const std::map<std::string, std::vector<SentencePair>>& by_embedder,
                    std::span<const double> thresholds) {
  json report;
  json per_model = json::object();
  for (const auto& [id, pairs] : by_embedder) {
    const auto d = score_distribution(pairs, thresholds);
    json fractions = json::object();
    for (const auto& [t, f] : d.fraction_at_or_above) fractions[format_fixed(t, 2)] = f;
    per_model[id] = {{"n", d.n}, {"mean", d.mean}, {"std", d.std}, {"fraction_at_or_above", fractions}};
  }
  report["embedders"] = per_model;

  json pairwise = json::array();
  for (auto a = by_embedder.begin(); a != by_embedder.end(); ++a) {
    std::map<std::string, double> scores_a;
    for (const auto& p : a->second) scores_a.emplace(p.ref(), p.cos);
    for (auto b = std::next(a); b != by_embedder.end(); ++b) {
      std::vector<double> xs, ys;
      for (const auto& p : b->second) {
        if (auto it = scores_a.find(p.ref()); it != scores_a.end()) {
          xs.push_back(it->second);
          ys.push_back(p.cos);
        }
      }
      json entry = {{"a", a->first}, {"b", b->first}, {"n_shared", xs.size()}};
      try {
        entry["pearson"] = stats::pearson(xs, ys);
      } catch (const Error& e) {
        entry["pearson"] = nullptr;
        entry["note"] = std::string(errc_name(e.code()));
      }
      pairwise.push_back(std::move(entry));
    }
  }
  report["pairwise"] = pairwise;
  return report;
}

void write_bitext_tsv(std::ostream& out, std::span<const SentencePair> pairs) {
  out << "src_sentence_id\ttgt_sentence_id\tcos\tembedder_id\n";
  for (const auto& p : pairs) {
    out << p.src_id << '\t' << p.tgt_id << '\t' << format_fixed(p.cos, 6) << '\t' << p.embedder_id
        << '\n';
  }
}

std::vector<SentencePair> read_bitext_tsv(std::istream& in) {
  std::vector<SentencePair> out;
  std::string line;
  bool header = true;
  while (std::getline(in, line)) {
    if (header) {
      header = false;
      if (line.rfind("src_sentence_id", 0) == 0) continue;
    }
    if (line.empty()) continue;
    std::vector<std::string> cols;
    std::istringstream row(line);
    for (std::string col; std::getline(row, col, '\t');) cols.push_back(col);
    if (cols.size() != 4) throw Error(Errc::invalid_argument, "bitext row needs 4 columns: " + line);
    SentencePair p{cols[0], cols[1], 0.0, cols[3]};
    try {
      p.cos = std::stod(cols[2]);
    } catch (const std::exception&) {
      throw Error(Errc::invalid_argument, "bad cos value: " + cols[2]);
    }
    out.push_back(std::move(p));
  }
  return out;
}

}  // namespace dblex::miner
