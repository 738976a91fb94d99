#include "dblex/lexicon.hpp"

#include <algorithm>
#include <istream>
#include <ostream>
#include <sstream>

#include <json.hpp>

#include "dblex/error.hpp"
#include "dblex/format.hpp"
#include "dblex/unicode.hpp"

namespace dblex::lexicon {

std::string LexiconEntry::ref() const { return dialect_word + " ||| " + standard_word; }

bool is_word(std::string_view token) {
  bool letter = false;
  for (char32_t cp : unicode::decode(token)) {
    if (unicode::is_digit(cp)) return false;
    letter = letter || unicode::is_letter(cp);
  }
  return letter;
}

void Aggregator::add(const aligner::WordPairObservation& obs) {
  if (!is_word(obs.dialect_word) || !is_word(obs.standard_word)) return;
  auto& g = groups_[{obs.dialect_word, obs.standard_word}];
  ++g.count;
  g.sum_p += obs.p;
  ++accepted_;
}

void Aggregator::merge(const Aggregator& other) {
  for (const auto& [key, g] : other.groups_) {
    auto& mine = groups_[key];
    mine.count += g.count;
    mine.sum_p += g.sum_p;
  }
  accepted_ += other.accepted_;
}

void sort_entries(std::vector<LexiconEntry>& entries) {
  std::sort(entries.begin(), entries.end(), [](const LexiconEntry& a, const LexiconEntry& b) {
    if (a.count != b.count) return a.count > b.count;
    if (a.dialect_word != b.dialect_word) return a.dialect_word < b.dialect_word;
    return a.standard_word < b.standard_word;
  });
}

std::vector<LexiconEntry> Aggregator::entries() const {
  std::vector<LexiconEntry> out;
  out.reserve(groups_.size());
  for (const auto& [key, g] : groups_) {
    out.push_back({key.first, key.second, g.count, g.sum_p / static_cast<double>(g.count), 0});
  }
  sort_entries(out);
  return out;
}

std::vector<LexiconEntry> aggregate(std::span<const aligner::WordPairObservation> observations) {
  Aggregator agg;
  for (const auto& o : observations) agg.add(o);
  return agg.entries();
}

std::vector<LexiconEntry> apply_probability_cutoff(std::span<const LexiconEntry> entries, double theta) {
  if (!(theta >= 0.0 && theta <= 1.0)) {
    throw Error(Errc::invalid_argument, "probability cutoff must lie in [0, 1], got " + std::to_string(theta));
  }
  std::vector<LexiconEntry> out;
  std::copy_if(entries.begin(), entries.end(), std::back_inserter(out),
               [theta](const LexiconEntry& e) { return e.mean_p >= theta; });
  return out;
}

std::vector<SynonymGroup> group_one_to_many(std::span<const LexiconEntry> entries) {
  std::map<std::string, std::vector<std::pair<std::string, std::size_t>>> by_head;
  for (const auto& e : entries) by_head[e.standard_word].emplace_back(e.dialect_word, e.count);
  std::vector<SynonymGroup> out;
  out.reserve(by_head.size());
  for (auto& [head, variants] : by_head) {
    std::sort(variants.begin(), variants.end(), [](const auto& a, const auto& b) {
      if (a.second != b.second) return a.second > b.second;
      return a.first < b.first;
    });
    out.push_back({head, std::move(variants)});
  }
  return out;
}

std::vector<LexiconEntry> attach_frequencies(std::span<const LexiconEntry> entries,
                                             const corpus::FrequencyIndex& dialect_frequencies) {
  std::vector<LexiconEntry> out(entries.begin(), entries.end());
  for (auto& e : out) {
    const auto it = dialect_frequencies.find(e.dialect_word);
    e.dialect_freq = it == dialect_frequencies.end() ? 0 : it->second;
  }
  return out;
}

void write_lexicon_tsv(std::ostream& out, std::span<const LexiconEntry> entries) {
  out << "dialect_word\tstandard_word\tcount\tmean_p\tdialect_freq\n";
  for (const auto& e : entries) {
    out << e.dialect_word << '\t' << e.standard_word << '\t' << e.count << '\t'
        << format_fixed(e.mean_p, 4) << '\t' << e.dialect_freq << '\n';
  }
}

std::vector<LexiconEntry> read_lexicon_tsv(std::istream& in) {
  std::vector<LexiconEntry> out;
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
    if (cols.size() != 5) throw Error(Errc::invalid_argument, "lexicon row needs 5 columns: " + line);
    try {
      out.push_back({cols[0], cols[1], std::stoul(cols[2]), std::stod(cols[3]), std::stoul(cols[4])});
    } catch (const std::logic_error&) {
      throw Error(Errc::invalid_argument, "bad number in lexicon row: " + line);
    }
  }
  return out;
}

void write_synonym_groups_json(std::ostream& out, std::span<const SynonymGroup> groups) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& g : groups) {
    nlohmann::json variants = nlohmann::json::array();
    for (const auto& [word, count] : g.variants) variants.push_back({{"dialect_word", word}, {"count", count}});
    arr.push_back({{"standard_word", g.standard_word}, {"variants", variants}});
  }
  out << arr.dump(2) << '\n';
}

}  // namespace dblex::lexicon
