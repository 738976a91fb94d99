#include "dblex/eval.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>

#include "dblex/embeddings.hpp"
#include "dblex/error.hpp"
#include "dblex/format.hpp"
#include "dblex/rng.hpp"
#include "dblex/stats.hpp"
#include "dblex/unicode.hpp"

namespace dblex::eval {

using lexicon::LexiconEntry;

QuartileCuts quartile_cuts(std::span<const LexiconEntry> lexicon) {
  if (lexicon.empty()) throw Error(Errc::invalid_argument, "quartiles of an empty lexicon");
  std::vector<std::size_t> freqs;
  freqs.reserve(lexicon.size());
  for (const auto& e : lexicon) freqs.push_back(e.dialect_freq);
  std::sort(freqs.begin(), freqs.end());
  const std::size_t n = freqs.size();
  // Nearest rank: the ceil(P/100 * n)-th smallest value (1-based).
  auto at_percentile = [&](std::size_t p) {
    const std::size_t rank = std::max<std::size_t>(1, (p * n + 99) / 100);
    return freqs[rank - 1];
  };
  return {at_percentile(25), at_percentile(50), at_percentile(75)};
}

int quartile_of(std::size_t freq, const QuartileCuts& cuts) {
  if (freq <= cuts.q25) return 1;
  if (freq <= cuts.q50) return 2;
  if (freq <= cuts.q75) return 3;
  return 4;
}

std::array<QuartileSample, 4> stratified_sample(std::span<const LexiconEntry> lexicon,
                                                std::size_t per_bin, std::uint64_t seed) {
  const QuartileCuts cuts = quartile_cuts(lexicon);
  std::array<std::vector<std::size_t>, 4> members;
  for (std::size_t i = 0; i < lexicon.size(); ++i) {
    members[quartile_of(lexicon[i].dialect_freq, cuts) - 1].push_back(i);
  }
  std::array<QuartileSample, 4> out;
  Rng rng(seed);
  for (int q = 0; q < 4; ++q) {
    out[q].quartile = q + 1;
    out[q].population = members[q].size();
    for (std::size_t pick : sample_indices(members[q].size(), per_bin, rng)) {
      out[q].entries.push_back(lexicon[members[q][pick]]);
    }
  }
  return out;
}

Dictionary read_dictionary_tsv(std::istream& in) {
  Dictionary dict;
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (first) {
      first = false;
      if (line.rfind("standard_word\t", 0) == 0) continue;
    }
    if (line.empty()) continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos) throw Error(Errc::invalid_argument, "dictionary row needs 2 columns: " + line);
    const std::string head = unicode::fold_case(unicode::normalize_space(line.substr(0, tab)));
    const std::string translation = unicode::fold_case(unicode::normalize_space(line.substr(tab + 1)));
    if (head.empty()) continue;
    auto& set = dict[head];
    if (!translation.empty()) set.insert(translation);
  }
  return dict;
}

DictionaryScore score_against_dictionary(std::span<const LexiconEntry> entries, const Dictionary& dictionary) {
  DictionaryScore s;
  s.n = entries.size();
  for (const auto& e : entries) {
    const auto it = dictionary.find(unicode::fold_case(e.standard_word));
    if (it == dictionary.end()) continue;
    ++s.covered;
    if (it->second.contains(unicode::fold_case(e.dialect_word))) ++s.matched;
  }
  s.coverage = s.n == 0 ? 0.0 : static_cast<double>(s.covered) / static_cast<double>(s.n);
  s.match_defined = s.covered > 0;
  s.match = s.match_defined ? static_cast<double>(s.matched) / static_cast<double>(s.covered) : 0.0;
  return s;
}

std::array<DictionaryScore, 4> dictionary_eval(std::span<const QuartileSample, 4> sample,
                                               const Dictionary& dictionary) {
  std::array<DictionaryScore, 4> out;
  for (std::size_t q = 0; q < 4; ++q) out[q] = score_against_dictionary(sample[q].entries, dictionary);
  return out;
}

std::vector<double> default_sweep_thresholds() {
  std::vector<double> t;
  for (int k = 70; k <= 99; ++k) t.push_back(k / 100.0);
  return t;
}

std::vector<F1SweepPoint> f1_sweep(std::span<const LabeledScore> items, std::span<const double> thresholds) {
  std::vector<F1SweepPoint> out;
  out.reserve(thresholds.size());
  for (double t : thresholds) {
    F1SweepPoint pt;
    pt.threshold = t;
    for (const auto& item : items) {
      const bool predicted = item.p >= t;
      if (predicted && item.positive) ++pt.tp;
      if (predicted && !item.positive) ++pt.fp;
      if (!predicted && item.positive) ++pt.fn;
    }
    pt.precision_undefined = pt.tp + pt.fp == 0;
    pt.recall_undefined = pt.tp + pt.fn == 0;
    pt.precision = pt.precision_undefined ? 0.0 : static_cast<double>(pt.tp) / static_cast<double>(pt.tp + pt.fp);
    pt.recall = pt.recall_undefined ? 0.0 : static_cast<double>(pt.tp) / static_cast<double>(pt.tp + pt.fn);
    const double denom = pt.precision + pt.recall;
    pt.f1 = denom == 0.0 ? 0.0 : 2.0 * pt.precision * pt.recall / denom;
    out.push_back(pt);
  }
  return out;
}

void write_f1_sweep_tsv(std::ostream& out, std::span<const F1SweepPoint> points) {
  out << "threshold\tprecision\trecall\tf1\n";
  for (const auto& p : points) {
    out << format_fixed(p.threshold, 2) << '\t' << format_fixed(p.precision, 6) << '\t'
        << format_fixed(p.recall, 6) << '\t' << format_fixed(p.f1, 6) << '\n';
  }
}

std::size_t levenshtein(std::u32string_view a, std::u32string_view b) {
  if (a.size() < b.size()) std::swap(a, b);
  std::vector<std::size_t> prev(b.size() + 1), cur(b.size() + 1);
  for (std::size_t j = 0; j <= b.size(); ++j) prev[j] = j;
  for (std::size_t i = 1; i <= a.size(); ++i) {
    cur[0] = i;
    for (std::size_t j = 1; j <= b.size(); ++j) {
      const std::size_t subst = prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, subst});
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

double normalized_edit_distance(std::string_view a, std::string_view b) {
  const auto ca = unicode::decode(a);
  const auto cb = unicode::decode(b);
  if (ca.empty() || cb.empty()) throw Error(Errc::empty_word, "edit distance of an empty word");
  const double mean_len = static_cast<double>(ca.size() + cb.size()) / 2.0;
  return static_cast<double>(levenshtein(ca, cb)) / mean_len;
}

double edit_distance_correlation(std::span<const LexiconEntry> entries) {
  std::vector<double> dist, prob;
  dist.reserve(entries.size());
  prob.reserve(entries.size());
  for (const auto& e : entries) {
    dist.push_back(normalized_edit_distance(e.dialect_word, e.standard_word));
    prob.push_back(e.mean_p);
  }
  return stats::pearson(dist, prob);
}

AgreementReport agreement(const std::map<std::string, std::string>& labels_a,
                          const std::map<std::string, std::string>& labels_b, AgreementTask task) {
  auto likert_value = [](const std::string& label) -> std::optional<double> {
    if (label.size() == 1 && label[0] >= '1' && label[0] <= '5') return label[0] - '0';
    return std::nullopt;
  };
  std::vector<double> xs, ys;
  std::size_t n = 0, same = 0;
  for (const auto& [item, la] : labels_a) {
    const auto it = labels_b.find(item);
    if (it == labels_b.end()) continue;
    const std::string& lb = it->second;
    if (task == AgreementTask::likert) {
      const auto va = likert_value(la);
      const auto vb = likert_value(lb);
      if (!va || !vb) continue;
      xs.push_back(*va);
      ys.push_back(*vb);
    }
    ++n;
    same += la == lb;
  }
  if (n == 0) throw Error(Errc::no_overlap, "annotators share no labeled items");
  AgreementReport r;
  r.n_items = n;
  r.exact_match_rate = static_cast<double>(same) / static_cast<double>(n);
  if (task == AgreementTask::likert) {
    try {
      r.pearson_r = stats::pearson(xs, ys);
    } catch (const Error&) {
      r.pearson_r.reset();
    }
  }
  return r;
}

WordVectors::WordVectors(std::vector<std::string> words, std::size_t dim, std::vector<float> values)
    : words_(std::move(words)), dim_(dim), values_(std::move(values)) {
  if (values_.size() != words_.size() * dim_) throw Error(Errc::dim_mismatch, "word vector size mismatch");
  for (std::size_t i = 0; i < words_.size(); ++i) index_.emplace(words_[i], i);  // first wins
}

std::optional<std::size_t> WordVectors::find(std::string_view word) const {
  const auto it = index_.find(word);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

WordVectors read_word_vectors(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw Error(Errc::truncated, "word vector file is empty");
  std::size_t count = 0, dim = 0;
  {
    std::istringstream header(line);
    if (!(header >> count >> dim) || dim == 0) {
      throw Error(Errc::invalid_argument, "word vector header must be 'count dim'");
    }
  }
  std::vector<std::string> words;
  std::vector<float> values;
  words.reserve(count);
  values.reserve(count * dim);
  while (words.size() < count && std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream row(line);
    std::string word;
    row >> word;
    for (std::size_t d = 0; d < dim; ++d) {
      float v;
      if (!(row >> v)) throw Error(Errc::dim_mismatch, "vector for '" + word + "' is shorter than dim");
      values.push_back(v);
    }
    words.push_back(std::move(word));
  }
  if (words.size() != count) throw Error(Errc::truncated, "fewer vectors than the header announces");
  return WordVectors(std::move(words), dim, std::move(values));
}

BaselineReport nn_baseline(const WordVectors& dialect, const WordVectors& standard,
                           std::span<const GoldPair> gold) {
  if (dialect.size() > 0 && standard.size() > 0 && dialect.dim() != standard.dim()) {
    throw Error(Errc::dim_mismatch, "dialect and standard vectors differ in dim");
  }
  std::vector<double> norms(standard.size());
  for (std::size_t k = 0; k < standard.size(); ++k) {
    double s = 0.0;
    for (float x : standard.vector(k)) s += static_cast<double>(x) * x;
    norms[k] = std::sqrt(s);
  }

  std::map<std::string, std::optional<std::size_t>> cache;
  auto nearest = [&](std::size_t d) -> std::optional<std::size_t> {
    const auto v = dialect.vector(d);
    double vn = 0.0;
    for (float x : v) vn += static_cast<double>(x) * x;
    if (vn == 0.0) return std::nullopt;
    std::optional<std::size_t> best;
    double best_cos = -2.0;
    for (std::size_t k = 0; k < standard.size(); ++k) {
      if (norms[k] == 0.0) continue;
      const double c = embeddings::cosine(v, standard.vector(k));
      if (c > best_cos) {
        best_cos = c;
        best = k;
      }
    }
    return best;
  };

  BaselineReport report;
  report.n_gold = gold.size();
  for (const auto& g : gold) {
    const auto d = dialect.find(g.dialect_word);
    if (!d) {
      report.missing.push_back(g.dialect_word);
      continue;
    }
    auto [it, fresh] = cache.try_emplace(g.dialect_word);
    if (fresh) it->second = nearest(*d);
    if (!it->second) {
      report.missing.push_back(g.dialect_word);
      continue;
    }
    ++report.n_evaluated;
    Retrieval r{g.dialect_word, standard.word(*it->second), g.standard_word, false};
    r.correct = unicode::fold_case(r.retrieved) == unicode::fold_case(r.gold);
    report.n_correct += r.correct;
    report.retrievals.push_back(std::move(r));
  }
  return report;
}

}  // namespace dblex::eval
