#pragma once

#include <cstddef>
#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "dblex/aligner.hpp"
#include "dblex/corpus.hpp"

namespace dblex::lexicon {

inline constexpr double kDefaultProbabilityCutoff = 0.8;

struct LexiconEntry {
  std::string dialect_word;
  std::string standard_word;
  std::size_t count = 0;
  double mean_p = 0.0;
  std::size_t dialect_freq = 0;

  /// "<dialect_word> ||| <standard_word>", the annotation item reference.
  std::string ref() const;
  bool operator==(const LexiconEntry&) const = default;
};

struct SynonymGroup {
  std::string standard_word;
  std::vector<std::pair<std::string, std::size_t>> variants;  // (dialect_word, count)
};

/// At least one letter and no decimal digit.
bool is_word(std::string_view token);

/// Mergeable grouping state; shards can be accumulated independently.
class Aggregator {
 public:
  void add(const aligner::WordPairObservation& obs);
  void merge(const Aggregator& other);
  /// Entries sorted by count descending, then dialect word, then standard word.
  std::vector<LexiconEntry> entries() const;
  std::size_t accepted() const { return accepted_; }

 private:
  struct Group {
    std::size_t count = 0;
    double sum_p = 0.0;
  };
  std::map<std::pair<std::string, std::string>, Group> groups_;
  std::size_t accepted_ = 0;
};

/// Drops pairs with a non-word on either side, then groups by the exact
/// (dialect_word, standard_word) pair.
std::vector<LexiconEntry> aggregate(std::span<const aligner::WordPairObservation> observations);

/// Entries with mean_p >= theta; theta must lie in [0, 1].
std::vector<LexiconEntry> apply_probability_cutoff(std::span<const LexiconEntry> entries, double theta);

/// Groups sorted by standard word; variants by count descending, then word.
std::vector<SynonymGroup> group_one_to_many(std::span<const LexiconEntry> entries);

std::vector<LexiconEntry> attach_frequencies(std::span<const LexiconEntry> entries,
                                             const corpus::FrequencyIndex& dialect_frequencies);

/// Sort order of the lexicon TSV.
void sort_entries(std::vector<LexiconEntry>& entries);

/// dialect_word, standard_word, count, mean_p (4 decimals), dialect_freq.
void write_lexicon_tsv(std::ostream& out, std::span<const LexiconEntry> entries);
std::vector<LexiconEntry> read_lexicon_tsv(std::istream& in);
void write_synonym_groups_json(std::ostream& out, std::span<const SynonymGroup> groups);

}  // namespace dblex::lexicon
