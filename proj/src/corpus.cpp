#include "dblex/corpus.hpp"

#include <algorithm>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include <json.hpp>

#include "dblex/error.hpp"
#include "dblex/parallel.hpp"
#include "dblex/unicode.hpp"

namespace dblex::corpus {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

bool is_sentence_final(char32_t cp) { return cp == U'.' || cp == U'!' || cp == U'?'; }

std::vector<std::u32string_view> split_lines(std::u32string_view text) {
  std::vector<std::u32string_view> lines;
  std::size_t start = 0;
  for (std::size_t i = 0; i <= text.size(); ++i) {
    if (i == text.size() || text[i] == U'\n' || text[i] == U'\r' || text[i] == U'\u2029') {
      lines.push_back(text.substr(start, i - start));
      start = i + 1;
    }
  }
  return lines;
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::io_error, "cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

}  // namespace

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  const std::u32string cps = unicode::decode(text);
  std::size_t i = 0;
  while (i < cps.size()) {
    while (i < cps.size() && unicode::is_space(cps[i])) ++i;
    std::size_t end = i;
    while (end < cps.size() && !unicode::is_space(cps[end])) ++end;
    if (end == i) break;

    std::size_t lo = i;
    std::size_t hi = end;
    while (lo < hi && unicode::is_punct(cps[lo])) {
      tokens.push_back(unicode::encode(std::u32string_view(&cps[lo], 1)));
      ++lo;
    }
    std::vector<std::string> trailing;
    while (hi > lo && unicode::is_punct(cps[hi - 1])) {
      trailing.push_back(unicode::encode(std::u32string_view(&cps[hi - 1], 1)));
      --hi;
    }
    if (hi > lo) tokens.push_back(unicode::encode(std::u32string_view(&cps[lo], hi - lo)));
    tokens.insert(tokens.end(), trailing.rbegin(), trailing.rend());
    i = end;
  }
  return tokens;
}

std::vector<SplitSentence> RuleBasedSplitter::split(std::string_view page_text) const {
  std::vector<SplitSentence> out;
  const std::u32string cps = unicode::decode(page_text);
  auto emit = [&](std::u32string_view segment) {
    std::string text = unicode::normalize_space(unicode::encode(segment));
    if (text.empty()) return;
    auto tokens = tokenize(text);
    out.push_back({std::move(text), std::move(tokens)});
  };

  for (std::u32string_view line : split_lines(cps)) {
    std::size_t start = 0;
    for (std::size_t i = 0; i < line.size(); ++i) {
      if (!is_sentence_final(line[i])) continue;
      std::size_t j = i + 1;
      if (j >= line.size() || !unicode::is_space(line[j])) continue;
      while (j < line.size() && unicode::is_space(line[j])) ++j;
      if (j < line.size() && (unicode::is_upper(line[j]) || unicode::is_digit(line[j]))) {
        emit(line.substr(start, i + 1 - start));
        start = j;
        i = j - 1;
      }
    }
    emit(line.substr(start));
  }
  return out;
}

std::vector<SplitSentence> PresplitReader::split(std::string_view page_text) const {
  std::vector<SplitSentence> out;
  const std::u32string cps = unicode::decode(page_text);
  for (std::u32string_view line : split_lines(cps)) {
    std::string text = unicode::normalize_space(unicode::encode(line));
    if (text.empty()) continue;
    std::vector<std::string> tokens;
    std::istringstream words(text);
    for (std::string w; words >> w;) tokens.push_back(std::move(w));
    out.push_back({std::move(text), std::move(tokens)});
  }
  return out;
}

std::vector<Sentence> split_and_tokenize(std::string_view page_text, std::string_view page_id,
                                         std::string_view lang,
                                         const SentenceSplitter& splitter) {
  std::vector<Sentence> out;
  std::size_t n = 0;
  for (auto& piece : splitter.split(page_text)) {
    const std::size_t index = n++;
    if (piece.tokens.empty()) continue;
    Sentence s;
    s.id = std::string(lang) + ":" + std::string(page_id) + ":" + std::to_string(index);
    s.page_id = page_id;
    s.lang = lang;
    s.text = std::move(piece.text);
    s.tokens = std::move(piece.tokens);
    out.push_back(std::move(s));
  }
  return out;
}

std::string_view reason_name(RejectReason reason) {
  switch (reason) {
    case RejectReason::too_short: return "too_short";
    case RejectReason::too_long: return "too_long";
    case RejectReason::unbalanced_brackets: return "unbalanced_brackets";
    case RejectReason::bullet_point: return "bullet_point";
    case RejectReason::foreign_script: return "foreign_script";
  }
  return "unknown";
}

std::optional<RejectReason> filter_sentence(const Sentence& s) {
  if (s.tokens.size() < kMinTokens) return RejectReason::too_short;
  if (s.tokens.size() > kMaxTokens) return RejectReason::too_long;

  const std::u32string cps = unicode::decode(s.text);
  std::ptrdiff_t round = 0, square = 0;
  for (char32_t cp : cps) {
    round += (cp == U'(') - (cp == U')');
    square += (cp == U'[') - (cp == U']');
  }
  if (round != 0 || square != 0) return RejectReason::unbalanced_brackets;

  if (cps.find(U'\u2022') != std::u32string::npos) return RejectReason::bullet_point;
  if (cps.size() >= 2 && (cps[0] == U'-' || cps[0] == U'*' || cps[0] == U'\u00B7') &&
      unicode::is_space(cps[1])) {
    return RejectReason::bullet_point;
  }

  if (std::any_of(cps.begin(), cps.end(), unicode::is_foreign_script)) {
    return RejectReason::foreign_script;
  }
  return std::nullopt;
}

PairingResult pair_pages(std::span<const PageLink> links, const PageIndex& dialect_pages,
                         const PageIndex& standard_pages) {
  PairingResult result;
  std::set<std::string> seen;
  for (const auto& link : links) {
    auto drop = [&](const char* reason) { result.dropped.push_back({link, reason}); };
    if (!seen.insert(link.dialect_page_id).second) {
      drop("duplicate_dialect_page");
      continue;
    }
    const auto d = dialect_pages.find(link.dialect_page_id);
    const auto s = standard_pages.find(link.standard_page_id);
    if (d == dialect_pages.end()) {
      drop("missing_dialect_page");
    } else if (s == standard_pages.end()) {
      drop("missing_standard_page");
    } else if (d->second == 0 || s->second == 0) {
      drop("no_retained_sentences");
    } else {
      result.pairs.push_back(link);
    }
  }
  return result;
}

void StatsAccumulator::add(const Sentence& s) {
  pages_.insert(s.page_id);
  ++sentences_;
  tokens_ += s.tokens.size();
  types_.insert(s.tokens.begin(), s.tokens.end());
}

void StatsAccumulator::merge(const StatsAccumulator& other) {
  pages_.insert(other.pages_.begin(), other.pages_.end());
  types_.insert(other.types_.begin(), other.types_.end());
  sentences_ += other.sentences_;
  tokens_ += other.tokens_;
}

CorpusStats StatsAccumulator::finish() const {
  return {pages_.size(), sentences_, tokens_, types_.size()};
}

CorpusStats compute_stats(std::span<const Sentence> retained) {
  StatsAccumulator acc;
  for (const auto& s : retained) acc.add(s);
  return acc.finish();
}

FrequencyIndex build_frequency_index(std::span<const Sentence> sentences) {
  FrequencyIndex index;
  for (const auto& s : sentences) {
    for (const auto& t : s.tokens) ++index[t];
  }
  return index;
}

PageIndex LanguageCorpus::page_index() const {
  PageIndex index;
  for (const auto& id : page_ids) index[id] = 0;
  for (const auto& s : sentences) ++index[s.page_id];
  return index;
}

LanguageCorpus ingest_directory(const fs::path& dir, std::string_view lang,
                                const SentenceSplitter& splitter, std::size_t workers) {
  if (!fs::is_directory(dir)) {
    throw Error(Errc::missing_input, "corpus directory not found: " + dir.string());
  }
  LanguageCorpus corpus;
  corpus.lang = lang;
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file()) files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());

  struct PageResult {
    std::vector<Sentence> kept;
    std::vector<Rejection> rejected;
  };
  std::vector<PageResult> pages(files.size());
  parallel_for(files.size(), workers, [&](std::size_t i) {
    const std::string page_id = files[i].filename().string();
    for (auto& s : split_and_tokenize(read_file(files[i]), page_id, lang, splitter)) {
      if (auto reason = filter_sentence(s)) {
        pages[i].rejected.push_back({s.id, s.text, *reason});
      } else {
        pages[i].kept.push_back(std::move(s));
      }
    }
  });

  for (std::size_t i = 0; i < files.size(); ++i) {
    corpus.page_ids.push_back(files[i].filename().string());
    std::move(pages[i].kept.begin(), pages[i].kept.end(), std::back_inserter(corpus.sentences));
    std::move(pages[i].rejected.begin(), pages[i].rejected.end(),
              std::back_inserter(corpus.rejections));
  }
  return corpus;
}

std::vector<PageLink> read_link_table(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::missing_input, "link table not found: " + path.string());
  std::vector<PageLink> links;
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (first && line.rfind("dialect_page_id", 0) == 0) {
      first = false;
      continue;
    }
    first = false;
    std::vector<std::string> cols;
    std::istringstream row(line);
    for (std::string col; std::getline(row, col, '\t');) cols.push_back(col);
    if (cols.size() < 2) {
      throw Error(Errc::invalid_argument, "link table row needs at least 2 columns: " + line);
    }
    cols.resize(4);
    links.push_back({cols[0], cols[1], cols[2], cols[3]});
  }
  return links;
}

void write_link_table(std::ostream& out, std::span<const PageLink> links) {
  out << "dialect_page_id\tstandard_page_id\tdialect_title\tstandard_title\n";
  for (const auto& l : links) {
    out << l.dialect_page_id << '\t' << l.standard_page_id << '\t' << l.dialect_title << '\t'
        << l.standard_title << '\n';
  }
}

void write_sentences_jsonl(std::ostream& out, std::span<const Sentence> sentences) {
  for (const auto& s : sentences) {
    json j = {{"sentence_id", s.id},
              {"page_id", s.page_id},
              {"lang", s.lang},
              {"text", s.text},
              {"tokens", s.tokens}};
    out << j.dump() << '\n';
  }
}

std::vector<Sentence> read_sentences_jsonl(std::istream& in) {
  std::vector<Sentence> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      const json j = json::parse(line);
      Sentence s;
      s.id = j.at("sentence_id").get<std::string>();
      s.page_id = j.at("page_id").get<std::string>();
      s.lang = j.at("lang").get<std::string>();
      s.text = j.at("text").get<std::string>();
      s.tokens = j.at("tokens").get<std::vector<std::string>>();
      out.push_back(std::move(s));
    } catch (const json::exception& e) {
      throw Error(Errc::invalid_argument,
                  "sentences line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

void write_rejections_tsv(std::ostream& out, std::span<const Rejection> rejections) {
  out << "text\treason\n";
  for (const auto& r : rejections) out << r.text << '\t' << reason_name(r.reason) << '\n';
}

}  // namespace dblex::corpus
