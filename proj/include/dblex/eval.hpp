#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "dblex/lexicon.hpp"

namespace dblex::eval {

inline constexpr std::size_t kDefaultPerBin = 250;

// ---------------------------------------------------------------------------
// Frequency-stratified sampling

/// Nearest-rank 25th/50th/75th percentiles of dialect_freq.
struct QuartileCuts {
  std::size_t q25 = 0;
  std::size_t q50 = 0;
  std::size_t q75 = 0;
};

QuartileCuts quartile_cuts(std::span<const lexicon::LexiconEntry> lexicon);

/// 1..4; a frequency equal to a cut point belongs to the lower bin.
int quartile_of(std::size_t freq, const QuartileCuts& cuts);

struct QuartileSample {
  int quartile = 0;
  std::size_t population = 0;  // entries of the full lexicon in this bin
  std::vector<lexicon::LexiconEntry> entries;
};

/// min(per_bin, bin size) entries per bin, uniformly without replacement,
/// kept in lexicon order. One seeded stream is consumed bin by bin.
std::array<QuartileSample, 4> stratified_sample(std::span<const lexicon::LexiconEntry> lexicon,
                                                std::size_t per_bin, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Dictionary evaluation

/// Case-folded headword -> case-folded translations.
using Dictionary = std::map<std::string, std::set<std::string>>;

/// TSV rows of (standard_word, dialect_translation); several rows may share a
/// headword. A leading "standard_word" header line is skipped.
Dictionary read_dictionary_tsv(std::istream& in);

struct DictionaryScore {
  std::size_t n = 0;
  std::size_t covered = 0;
  std::size_t matched = 0;
  double coverage = 0.0;      // covered / n
  double match = 0.0;         // matched / covered, 0 when nothing is covered
  bool match_defined = false; // false when covered == 0
};

/// Coverage: standard word is a headword. Match: among covered entries, the
/// dialect word is one of the headword's translations. Case-insensitive exact.
DictionaryScore score_against_dictionary(std::span<const lexicon::LexiconEntry> entries,
                                         const Dictionary& dictionary);

std::array<DictionaryScore, 4> dictionary_eval(std::span<const QuartileSample, 4> sample,
                                               const Dictionary& dictionary);

// ---------------------------------------------------------------------------
// Threshold sweep against binary human labels

struct LabeledScore {
  double p = 0.0;
  bool positive = false;
};

struct F1SweepPoint {
  double threshold = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::size_t tp = 0, fp = 0, fn = 0;
  bool precision_undefined = false;  // nothing predicted positive
  bool recall_undefined = false;     // no positive labels
};

/// 0.70, 0.71, ..., 0.99.
std::vector<double> default_sweep_thresholds();

/// Predicted positive iff p >= threshold. Undefined precision/recall are
/// reported as 0 with the matching flag set.
std::vector<F1SweepPoint> f1_sweep(std::span<const LabeledScore> items,
                                   std::span<const double> thresholds);

void write_f1_sweep_tsv(std::ostream& out, std::span<const F1SweepPoint> points);

// ---------------------------------------------------------------------------
// Edit distance

/// Unit-cost Levenshtein distance over code point sequences.
std::size_t levenshtein(std::u32string_view a, std::u32string_view b);

/// levenshtein(a, b) / ((|a| + |b|) / 2) on Unicode scalar values.
double normalized_edit_distance(std::string_view a, std::string_view b);

/// Pearson r between normalized edit distance and mean_p over all entries.
double edit_distance_correlation(std::span<const lexicon::LexiconEntry> entries);

// ---------------------------------------------------------------------------
// Inter-annotator agreement

enum class AgreementTask { likert, binary };

struct AgreementReport {
  std::size_t n_items = 0;
  double exact_match_rate = 0.0;
  std::optional<double> pearson_r;  // likert only; empty if variance is zero
};

/// Item ref -> label for each annotator. Only items both labeled count; the
/// likert task further drops items where either label is not 1..5.
AgreementReport agreement(const std::map<std::string, std::string>& labels_a,
                          const std::map<std::string, std::string>& labels_b, AgreementTask task);

// ---------------------------------------------------------------------------
// Nearest-neighbour baseline over pre-aligned word vectors

class WordVectors {
 public:
  WordVectors() = default;
  WordVectors(std::vector<std::string> words, std::size_t dim, std::vector<float> values);

  std::size_t size() const { return words_.size(); }
  std::size_t dim() const { return dim_; }
  const std::string& word(std::size_t i) const { return words_[i]; }
  std::span<const float> vector(std::size_t i) const { return {values_.data() + i * dim_, dim_}; }
  std::optional<std::size_t> find(std::string_view word) const;

 private:
  std::vector<std::string> words_;
  std::size_t dim_ = 0;
  std::vector<float> values_;
  std::map<std::string, std::size_t, std::less<>> index_;
};

/// Text format: first line "count dim", then "word v1 ... vdim" per line.
WordVectors read_word_vectors(std::istream& in);

struct GoldPair {
  std::string dialect_word;
  std::string standard_word;
};

struct Retrieval {
  std::string dialect_word;
  std::string retrieved;
  std::string gold;
  bool correct = false;
};

struct BaselineReport {
  std::size_t n_gold = 0;
  std::size_t n_evaluated = 0;
  std::size_t n_correct = 0;
  std::vector<std::string> missing;  // gold dialect words absent from the vocabulary
  std::vector<Retrieval> retrievals;
};

/// For each gold pair whose dialect word is in the dialect vocabulary, the
/// cosine-nearest standard word (ties: lower vocabulary index) is compared
/// case-insensitively with the gold translation.
BaselineReport nn_baseline(const WordVectors& dialect, const WordVectors& standard,
                           std::span<const GoldPair> gold);

}  // namespace dblex::eval
