#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "dblex/corpus.hpp"
#include "dblex/embeddings.hpp"

namespace dblex::miner {

inline constexpr double kDefaultCosineCutoff = 0.7;
inline constexpr std::size_t kDefaultSampleSize = 1500;
inline constexpr double kDefaultSampleLo = 0.4;
inline constexpr double kDefaultSampleHi = 0.95;

struct SentencePair {
  std::string src_id;  // dialect sentence
  std::string tgt_id;  // standard sentence
  double cos = 0.0;
  std::string embedder_id;

  /// "<src_id> ||| <tgt_id>", the item reference used by annotation files.
  std::string ref() const;
  bool operator==(const SentencePair&) const = default;
};

/// For every source sentence, its top-k target sentences by cosine, ties
/// broken by target sentence id ascending. Source order is preserved.
std::vector<SentencePair> mine_page_pair(std::span<const corpus::Sentence> src,
                                         std::span<const corpus::Sentence> tgt,
                                         const embeddings::EmbeddingMatrix& src_embeddings,
                                         const embeddings::EmbeddingMatrix& tgt_embeddings,
                                         std::size_t k, std::string_view embedder_id);

/// Pairs with cos >= tau (inclusive). tau must lie in [-1, 1].
std::vector<SentencePair> apply_cutoff(std::span<const SentencePair> pairs, double tau);

struct ScoreDistribution {
  std::string embedder_id;
  std::size_t n = 0;
  double mean = 0.0;
  double std = 0.0;
  std::vector<std::pair<double, double>> fraction_at_or_above;  // threshold -> fraction
};

inline const std::vector<double> kDefaultDistributionThresholds = {0.5, 0.6, 0.7, 0.8, 0.9};

ScoreDistribution score_distribution(std::span<const SentencePair> pairs,
                                     std::span<const double> thresholds = kDefaultDistributionThresholds);

struct PairLabel {
  std::string pair_ref;
  std::string label;  // Likert label as stored by the annotation service
};

/// Likert label (1..5) -> cosines of the pairs carrying it. Escape labels and
/// refs to unknown pairs are skipped.
std::map<int, std::vector<double>> group_scores_by_label(std::span<const SentencePair> pairs,
                                                         std::span<const PairLabel> labels);

struct AnnotationSample {
  std::vector<SentencePair> pairs;  // in input order
  std::size_t population = 0;       // pairs inside [lo, hi]
  bool short_population = false;    // population < n: everything returned
};

AnnotationSample sample_for_annotation(std::span<const SentencePair> pairs, std::size_t n,
                                       double lo, double hi, std::uint64_t seed);

/// Per-embedder distributions plus pairwise Pearson over the (src, tgt)
/// pairs both embedders retrieved.
nlohmann::json compare_models(const std::map<std::string, std::vector<SentencePair>>& by_embedder,
                              std::span<const double> thresholds = kDefaultDistributionThresholds);

void write_bitext_tsv(std::ostream& out, std::span<const SentencePair> pairs);
std::vector<SentencePair> read_bitext_tsv(std::istream& in);

}  // namespace dblex::miner
