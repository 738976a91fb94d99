#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace dblex::corpus {

inline constexpr std::size_t kMinTokens = 5;
inline constexpr std::size_t kMaxTokens = 25;

struct Sentence {
  std::string id;
  std::string page_id;
  std::string lang;
  std::string text;
  std::vector<std::string> tokens;

  bool operator==(const Sentence&) const = default;
};

struct SplitSentence {
  std::string text;
  std::vector<std::string> tokens;
};

/// Injection point for sentence segmentation. Implementations must return
/// sentences in page order with non-empty token lists.
class SentenceSplitter {
 public:
  virtual ~SentenceSplitter() = default;
  virtual std::vector<SplitSentence> split(std::string_view page_text) const = 0;
};

/// Default splitter. Line breaks are hard boundaries; within a line a boundary
/// follows '.', '!' or '?' when the next non-space character is an uppercase
/// letter or a digit. Tokens come from tokenize().
class RuleBasedSplitter final : public SentenceSplitter {
 public:
  std::vector<SplitSentence> split(std::string_view page_text) const override;
};

/// Reads the output of an external splitter: one sentence per line, tokens
/// separated by whitespace.
class PresplitReader final : public SentenceSplitter {
 public:
  std::vector<SplitSentence> split(std::string_view page_text) const override;
};

/// Whitespace tokenization, then leading and trailing punctuation characters
/// are peeled off one by one as separate tokens.
std::vector<std::string> tokenize(std::string_view text);

/// Sentence ids are "<lang>:<page_id>:<n>" with n counting all sentences the
/// splitter produced for the page, so ids survive changes to the filters.
std::vector<Sentence> split_and_tokenize(std::string_view page_text,
                                         std::string_view page_id,
                                         std::string_view lang,
                                         const SentenceSplitter& splitter);

enum class RejectReason { too_short, too_long, unbalanced_brackets, bullet_point, foreign_script };

std::string_view reason_name(RejectReason reason);

/// nullopt means keep. Rules are checked in enum order; the first hit wins.
std::optional<RejectReason> filter_sentence(const Sentence& s);

struct PageLink {
  std::string dialect_page_id;
  std::string standard_page_id;
  std::string dialect_title;
  std::string standard_title;

  bool operator==(const PageLink&) const = default;
};

struct DroppedLink {
  PageLink link;
  std::string reason;  // missing_dialect_page, missing_standard_page, no_retained_sentences, duplicate_dialect_page
};

struct PairingResult {
  std::vector<PageLink> pairs;
  std::vector<DroppedLink> dropped;
};

/// page id -> number of retained sentences on that page.
using PageIndex = std::map<std::string, std::size_t>;

PairingResult pair_pages(std::span<const PageLink> links, const PageIndex& dialect_pages,
                         const PageIndex& standard_pages);

struct CorpusStats {
  std::size_t n_pages = 0;
  std::size_t n_sentences = 0;
  std::size_t n_tokens = 0;
  std::size_t n_types = 0;

  bool operator==(const CorpusStats&) const = default;
};

/// Commutative accumulator so per-page partial stats can be merged.
class StatsAccumulator {
 public:
  void add(const Sentence& s);
  void merge(const StatsAccumulator& other);
  CorpusStats finish() const;

 private:
  std::set<std::string> pages_;
  std::set<std::string> types_;
  std::size_t sentences_ = 0;
  std::size_t tokens_ = 0;
};

CorpusStats compute_stats(std::span<const Sentence> retained);

/// Case-sensitive surface-form counts over a token stream.
using FrequencyIndex = std::map<std::string, std::size_t, std::less<>>;
FrequencyIndex build_frequency_index(std::span<const Sentence> sentences);

struct Rejection {
  std::string sentence_id;
  std::string text;
  RejectReason reason;
};

struct LanguageCorpus {
  std::string lang;
  std::vector<std::string> page_ids;  // every page file read, sorted
  std::vector<Sentence> sentences;    // retained, in page then sentence order
  std::vector<Rejection> rejections;

  PageIndex page_index() const;
};

/// Reads one UTF-8 file per page (file name = page id) from `dir`.
LanguageCorpus ingest_directory(const std::filesystem::path& dir, std::string_view lang,
                                const SentenceSplitter& splitter, std::size_t workers = 1);

/// TSV: dialect_page_id, standard_page_id, dialect_title, standard_title.
/// A first line starting with "dialect_page_id" is treated as a header.
std::vector<PageLink> read_link_table(const std::filesystem::path& path);
void write_link_table(std::ostream& out, std::span<const PageLink> links);

void write_sentences_jsonl(std::ostream& out, std::span<const Sentence> sentences);
std::vector<Sentence> read_sentences_jsonl(std::istream& in);
void write_rejections_tsv(std::ostream& out, std::span<const Rejection> rejections);

}  // namespace dblex::corpus
