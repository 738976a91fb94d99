#include "dblex/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>

#include <openssl/evp.h>

#include "dblex/aligner.hpp"
#include "dblex/annotation.hpp"
#include "dblex/corpus.hpp"
#include "dblex/error.hpp"
#include "dblex/eval.hpp"
#include "dblex/lexicon.hpp"
#include "dblex/miner.hpp"
#include "dblex/parallel.hpp"

namespace dblex::pipeline {

namespace fs = std::filesystem;
using nlohmann::json;

// ---------------------------------------------------------------------------
// Config

namespace {

std::optional<std::string> embedder_spec_error(const std::string& spec) {
  if (spec == "mock") return std::nullopt;
  if (spec.rfind("mock:", 0) == 0) {
    std::istringstream in(spec.substr(5));
    std::string dim, seed;
    std::getline(in, dim, ':');
    std::getline(in, seed);
    auto digits = [](const std::string& s) {
      return !s.empty() && std::all_of(s.begin(), s.end(), [](char c) { return c >= '0' && c <= '9'; });
    };
    if (!digits(dim) || std::stoull(dim) == 0 || (!seed.empty() && !digits(seed))) {
      return "embedder '" + spec + "': expected mock:<dim>[:<seed>] with positive integers";
    }
    return std::nullopt;
  }
  if (spec.rfind("file:", 0) == 0 && spec.size() > 5) return std::nullopt;
  if (spec.rfind("http:", 0) == 0 && spec.size() > 5) return std::nullopt;
  return "embedder '" + spec + "': expected mock, mock:<dim>[:<seed>], file:<dir> or http:<url>";
}

std::vector<std::string> check(const PipelineConfig& c) {
  std::vector<std::string> errors;
  auto need = [&](bool ok, const std::string& msg) {
    if (!ok) errors.push_back(msg);
  };
  need(!c.dialect_corpus.empty(), "dialect_corpus is required");
  need(!c.standard_corpus.empty(), "standard_corpus is required");
  need(!c.link_table.empty(), "link_table is required");
  need(!c.dialect_lang.empty() && !c.standard_lang.empty() && c.dialect_lang != c.standard_lang,
       "dialect_lang and standard_lang must be non-empty and different");
  need(c.splitter == "rules" || c.splitter == "presplit", "splitter must be rules or presplit");
  if (auto e = embedder_spec_error(c.embedder)) errors.push_back(*e);
  for (const auto& spec : c.compare_embedders) {
    if (auto e = embedder_spec_error(spec)) errors.push_back("compare_embedders: " + *e);
  }
  need(c.pooling == "cls" || c.pooling == "mean" || c.pooling == "native", "pooling must be cls, mean or native");
  need(c.k >= 1, "k must be at least 1");
  need(c.cosine_cutoff >= -1.0 && c.cosine_cutoff <= 1.0, "cosine_cutoff must lie in [-1, 1]");
  need(c.alignment_cutoff >= 0.0 && c.alignment_cutoff <= 1.0, "alignment_cutoff must lie in [0, 1]");
  need(std::isfinite(c.alignment_scale) && c.alignment_scale > 0.0, "alignment_scale must be positive");
  need(c.bitext_sample_lo >= -1.0 && c.bitext_sample_hi <= 1.0 && c.bitext_sample_lo <= c.bitext_sample_hi,
       "bitext_sample_lo/hi must satisfy -1 <= lo <= hi <= 1");
  need(c.workers >= 1, "workers must be at least 1");
  need(!c.out.empty(), "out is required");
  return errors;
}

[[noreturn]] void config_fail(const std::vector<std::string>& errors) {
  std::string msg;
  for (const auto& e : errors) msg += "\n  - " + e;
  throw Error(Errc::config_error, std::to_string(errors.size()) + " problem(s):" + msg);
}

fs::path resolve(const fs::path& base, const std::string& p) {
  const fs::path path(p);
  return (path.is_absolute() ? path : base / path).lexically_normal();
}

}  // namespace

json PipelineConfig::to_json() const {
  auto opt = [](const std::optional<fs::path>& p) { return p ? json(p->generic_string()) : json(nullptr); };
  return {{"dialect_corpus", dialect_corpus.generic_string()},
          {"standard_corpus", standard_corpus.generic_string()},
          {"link_table", link_table.generic_string()},
          {"dialect_lang", dialect_lang},
          {"standard_lang", standard_lang},
          {"splitter", splitter},
          {"embedder", embedder},
          {"compare_embedders", compare_embedders},
          {"pooling", pooling},
          {"k", k},
          {"cosine_cutoff", cosine_cutoff},
          {"alignment_cutoff", alignment_cutoff},
          {"alignment_scale", alignment_scale},
          {"bitext_sample_size", bitext_sample_size},
          {"bitext_sample_lo", bitext_sample_lo},
          {"bitext_sample_hi", bitext_sample_hi},
          {"wordpair_per_bin", wordpair_per_bin},
          {"control_size", control_size},
          {"seed", seed},
          {"workers", workers},
          {"dictionary", opt(dictionary)},
          {"wordpair_labels", opt(wordpair_labels)},
          {"bitext_labels", opt(bitext_labels)},
          {"dialect_vectors", opt(dialect_vectors)},
          {"standard_vectors", opt(standard_vectors)},
          {"baseline_gold", opt(baseline_gold)},
          {"out", out.generic_string()}};
}

PipelineConfig config_from_json(const json& j, const fs::path& base) {
  if (!j.is_object()) config_fail({"config must be a JSON object"});
  PipelineConfig c;
  c.out = resolve(base, c.out.string());
  std::vector<std::string> errors;
  std::set<std::string> known;

  auto field = [&](const char* key, auto&& assign) {
    known.insert(key);
    const auto it = j.find(key);
    if (it == j.end() || it->is_null()) return;
    try {
      assign(*it);
    } catch (const json::exception&) {
      errors.push_back(std::string(key) + " has the wrong type");
    }
  };
  auto str = [&](const char* key, std::string& dst) { field(key, [&](const json& v) { dst = v.get<std::string>(); }); };
  auto path = [&](const char* key, fs::path& dst) {
    field(key, [&](const json& v) { dst = resolve(base, v.get<std::string>()); });
  };
  auto opt_path = [&](const char* key, std::optional<fs::path>& dst) {
    field(key, [&](const json& v) { dst = resolve(base, v.get<std::string>()); });
  };
  auto num = [&](const char* key, double& dst) {
    field(key, [&](const json& v) {
      if (!v.is_number()) {
        errors.push_back(std::string(key) + " must be a number");
        return;
      }
      dst = v.get<double>();
    });
  };
  auto count = [&](const char* key, auto& dst) {
    field(key, [&](const json& v) {
      if (!v.is_number_unsigned()) {
        errors.push_back(std::string(key) + " must be a non-negative integer");
        return;
      }
      dst = v.get<std::remove_reference_t<decltype(dst)>>();
    });
  };

  path("dialect_corpus", c.dialect_corpus);
  path("standard_corpus", c.standard_corpus);
  path("link_table", c.link_table);
  str("dialect_lang", c.dialect_lang);
  str("standard_lang", c.standard_lang);
  str("splitter", c.splitter);
  str("embedder", c.embedder);
  field("compare_embedders", [&](const json& v) { c.compare_embedders = v.get<std::vector<std::string>>(); });
  str("pooling", c.pooling);
  count("k", c.k);
  num("cosine_cutoff", c.cosine_cutoff);
  num("alignment_cutoff", c.alignment_cutoff);
  num("alignment_scale", c.alignment_scale);
  count("bitext_sample_size", c.bitext_sample_size);
  num("bitext_sample_lo", c.bitext_sample_lo);
  num("bitext_sample_hi", c.bitext_sample_hi);
  count("wordpair_per_bin", c.wordpair_per_bin);
  count("control_size", c.control_size);
  count("seed", c.seed);
  count("workers", c.workers);
  opt_path("dictionary", c.dictionary);
  opt_path("wordpair_labels", c.wordpair_labels);
  opt_path("bitext_labels", c.bitext_labels);
  opt_path("dialect_vectors", c.dialect_vectors);
  opt_path("standard_vectors", c.standard_vectors);
  opt_path("baseline_gold", c.baseline_gold);
  path("out", c.out);

  for (const auto& [key, _] : j.items()) {
    if (!known.contains(key)) errors.push_back("unknown key '" + key + "'");
  }
  for (auto& e : check(c)) errors.push_back(std::move(e));
  if (!errors.empty()) config_fail(errors);
  return c;
}

PipelineConfig load_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::config_error, "cannot read config file " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw Error(Errc::config_error, path.string() + ": " + e.what());
  }
  const fs::path base = fs::absolute(path).parent_path();
  auto env = [](const char* name) -> std::optional<std::string> {
    const char* v = std::getenv(name);
    if (v == nullptr || *v == '\0') return std::nullopt;
    return std::string(v);
  };
  const fs::path cwd = fs::current_path();
  auto env_path = [&](const char* name, const char* key) {
    if (auto v = env(name)) j[key] = resolve(cwd, *v).string();
  };
  env_path("DBLEX_DIALECT_CORPUS", "dialect_corpus");
  env_path("DBLEX_STANDARD_CORPUS", "standard_corpus");
  env_path("DBLEX_LINK_TABLE", "link_table");
  env_path("DBLEX_DICTIONARY", "dictionary");
  env_path("DBLEX_OUT", "out");
  if (auto v = env("DBLEX_EMBEDDER")) j["embedder"] = *v;
  if (auto v = env("DBLEX_EMBEDDER_URL")) j["embedder"] = "http:" + *v;
  return config_from_json(j, base);
}

void validate(const PipelineConfig& config) {
  const auto errors = check(config);
  if (!errors.empty()) config_fail(errors);
}

namespace {

std::string sha256_hex(std::string_view data) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), md, &len, EVP_sha256(), nullptr) != 1) {
    throw Error(Errc::io_error, "SHA-256 failed");
  }
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(hex[md[i] >> 4]);
    out.push_back(hex[md[i] & 15]);
  }
  return out;
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::missing_input, path.filename().string() + " (expected at " + path.string() + ")");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

std::string config_hash(const PipelineConfig& config) { return sha256_hex(config.to_json().dump()); }

std::string sha256_file(const fs::path& path) { return sha256_hex(read_file(path)); }

// ---------------------------------------------------------------------------
// Embedders

std::shared_ptr<embeddings::Embedder> make_embedder(const std::string& spec) {
  if (auto e = embedder_spec_error(spec)) throw Error(Errc::config_error, *e);
  if (spec == "mock") return std::make_shared<embeddings::MockEmbedder>();
  if (spec.rfind("mock:", 0) == 0) {
    const std::string rest = spec.substr(5);
    const auto colon = rest.find(':');
    const std::size_t dim = std::stoull(rest.substr(0, colon));
    if (colon == std::string::npos) return std::make_shared<embeddings::MockEmbedder>(dim);
    return std::make_shared<embeddings::MockEmbedder>(dim, std::stoull(rest.substr(colon + 1)));
  }
  if (spec.rfind("http:", 0) == 0) {
    std::string url = spec.substr(5);
    // "http:" alone prefixes a bare host:port; a full URL is taken as is.
    if (url.rfind("//", 0) == 0) url = "http:" + url;
    else if (url.find("://") == std::string::npos) url = "http://" + url;
    return std::make_shared<embeddings::HttpEmbedderClient>(url);
  }
  throw Error(Errc::config_error, "embedder '" + spec + "' does not compute vectors; it names precomputed files");
}

namespace {

struct Embedded {
  std::string embedder_id;
  embeddings::EmbeddingMatrix matrix;
};

/// Vectors for `sentences` (all of one language). file:<dir> specs read
/// <dir>/<lang>.<level>.emb and the id from <dir>/info.json when present.
Embedded embed_sentences(const std::string& spec, std::span<const corpus::Sentence> sentences,
                         const std::string& lang, embeddings::Level level, embeddings::Pooling pooling) {
  if (spec.rfind("file:", 0) == 0) {
    const fs::path dir = spec.substr(5);
    const fs::path file = dir / (lang + "." + std::string(embeddings::to_string(level)) + ".emb");
    if (!fs::exists(file)) read_file(file);  // raises missing_input
    Embedded out;
    out.matrix = embeddings::load_embeddings(file);
    if (out.matrix.level() != level) {
      throw Error(Errc::invalid_argument, file.string() + " holds the wrong embedding level");
    }
    out.embedder_id = "file:" + dir.filename().string();
    if (fs::exists(dir / "info.json")) {
      const json info = json::parse(read_file(dir / "info.json"));
      out.embedder_id = info.value("embedder_id", out.embedder_id);
    }
    return out;
  }
  auto embedder = make_embedder(spec);
  Embedded out;
  out.embedder_id = embedder->embedder_id();
  if (sentences.empty()) {
    out.matrix = embeddings::EmbeddingMatrix({}, embedder->dim(), {}, level, {});
  } else {
    out.matrix = embeddings::fetch_embeddings(*embedder, sentences, level, pooling);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Stage plumbing

struct Layout {
  fs::path out;
  fs::path sentences() const { return out / "sentences.jsonl"; }
  fs::path rejections() const { return out / "rejections.tsv"; }
  fs::path page_pairs() const { return out / "page_pairs.tsv"; }
  fs::path dropped_links() const { return out / "dropped_links.tsv"; }
  fs::path corpus_stats() const { return out / "corpus_stats.json"; }
  fs::path embedding(const std::string& lang, embeddings::Level level) const {
    return out / "embeddings" / (lang + "." + std::string(embeddings::to_string(level)) + ".emb");
  }
  fs::path bitext_all() const { return out / "bitext_all.tsv"; }
  fs::path bitext() const { return out / "bitext.tsv"; }
  fs::path model_comparison() const { return out / "model_comparison.json"; }
  fs::path alignments() const { return out / "alignments.jsonl"; }
  fs::path pharaoh() const { return out / "alignments.pharaoh"; }
  fs::path observations() const { return out / "observations.tsv"; }
  fs::path lexicon_all() const { return out / "lexicon_all.tsv"; }
  fs::path lexicon() const { return out / "lexicon.tsv"; }
  fs::path synonym_groups() const { return out / "synonym_groups.json"; }
  fs::path bitext_task() const { return out / "annotation" / "bitext_task.json"; }
  fs::path wordpair_task() const { return out / "annotation" / "wordpair_task.json"; }
  fs::path wordpair_sample() const { return out / "annotation" / "wordpair_sample.tsv"; }
  fs::path evaluation() const { return out / "evaluation.json"; }
  fs::path f1_sweep() const { return out / "f1_sweep.tsv"; }
  fs::path quartile_report() const { return out / "report" / "quartiles.json"; }
  fs::path summary() const { return out / "report" / "summary.json"; }
  fs::path report_f1() const { return out / "report" / "f1_sweep.tsv"; }
  fs::path manifest() const { return out / "manifest.json"; }
};

/// Tracks what a stage read and wrote, then records it in the manifest.
class StageRun {
 public:
  StageRun(Stage stage, const PipelineConfig& config) : stage_(stage), config_(config), layout_{config.out} {}

  const Layout& layout() const { return layout_; }

  const fs::path& input(const fs::path& path) {
    if (!fs::is_regular_file(path)) read_file(path);
    if (std::find(inputs_.begin(), inputs_.end(), path) == inputs_.end()) inputs_.push_back(path);
    return path;
  }

  void write(const fs::path& path, const std::string& content) {
    fs::create_directories(path.parent_path());
    const fs::path tmp = path.string() + ".tmp";
    {
      std::ofstream out(tmp, std::ios::binary);
      out << content;
      if (!out) throw Error(Errc::io_error, "cannot write " + path.string());
    }
    fs::rename(tmp, path);
    outputs_.push_back(path);
  }

  template <typename Fn>
  void write_with(const fs::path& path, Fn&& fn) {
    std::ostringstream ss;
    fn(ss);
    write(path, ss.str());
  }

  void write_json(const fs::path& path, const json& j) { write(path, j.dump(2) + "\n"); }

  void finish() {
    json manifest = json::object();
    if (fs::exists(layout_.manifest())) {
      try {
        manifest = json::parse(read_file(layout_.manifest()));
      } catch (const json::exception&) {
        manifest = json::object();
      }
    }
    json inputs = json::object();
    for (const auto& p : inputs_) inputs[label(p)] = sha256_file(p);
    const std::string hash = config_hash(config_);
    for (const auto& p : outputs_) {
      manifest["outputs"][label(p)] = {{"sha256", sha256_file(p)},
                                       {"stage", to_string(stage_)},
                                       {"config_hash", hash},
                                       {"seed", config_.seed},
                                       {"inputs", inputs}};
    }
    manifest["stages"][to_string(stage_)] = {{"config_hash", hash}, {"inputs", inputs}};
    std::ofstream out(layout_.manifest(), std::ios::binary);
    out << manifest.dump(2) << '\n';
  }

 private:
  std::string label(const fs::path& p) const {
    const auto rel = p.lexically_relative(layout_.out);
    if (!rel.empty() && *rel.begin() != "..") return rel.generic_string();
    return p.generic_string();
  }

  Stage stage_;
  const PipelineConfig& config_;
  Layout layout_;
  std::vector<fs::path> inputs_;
  std::vector<fs::path> outputs_;
};

double round6(double x) { return std::round(x * 1e6) / 1e6; }

std::vector<corpus::Sentence> load_sentences(StageRun& run) {
  std::istringstream in(read_file(run.input(run.layout().sentences())));
  return corpus::read_sentences_jsonl(in);
}

std::vector<corpus::PageLink> load_page_pairs(StageRun& run) {
  return corpus::read_link_table(run.input(run.layout().page_pairs()));
}

std::vector<miner::SentencePair> load_bitext(StageRun& run, const fs::path& path) {
  std::istringstream in(read_file(run.input(path)));
  return miner::read_bitext_tsv(in);
}

std::vector<lexicon::LexiconEntry> load_lexicon(StageRun& run, const fs::path& path) {
  std::istringstream in(read_file(run.input(path)));
  return lexicon::read_lexicon_tsv(in);
}

using SentencesByPage = std::map<std::pair<std::string, std::string>, std::vector<corpus::Sentence>>;

SentencesByPage group_by_page(const std::vector<corpus::Sentence>& sentences) {
  SentencesByPage out;
  for (const auto& s : sentences) out[{s.lang, s.page_id}].push_back(s);
  return out;
}

// ---------------------------------------------------------------------------
// Stages

json stats_json(const corpus::LanguageCorpus& c) {
  const auto stats = corpus::compute_stats(c.sentences);
  json rejected = json::object();
  for (const auto& r : c.rejections) {
    const std::string key(corpus::reason_name(r.reason));
    rejected[key] = rejected.value(key, 0) + 1;
  }
  return {{"lang", c.lang},
          {"page_files", c.page_ids.size()},
          {"pages", stats.n_pages},
          {"sentences", stats.n_sentences},
          {"tokens", stats.n_tokens},
          {"types", stats.n_types},
          {"rejected", rejected}};
}

void stage_ingest(const PipelineConfig& config) {
  StageRun run(Stage::ingest, config);
  const auto& L = run.layout();
  std::unique_ptr<corpus::SentenceSplitter> splitter;
  if (config.splitter == "presplit") splitter = std::make_unique<corpus::PresplitReader>();
  else splitter = std::make_unique<corpus::RuleBasedSplitter>();

  if (!fs::is_directory(config.dialect_corpus)) read_file(config.dialect_corpus);
  if (!fs::is_directory(config.standard_corpus)) read_file(config.standard_corpus);
  const auto dialect = corpus::ingest_directory(config.dialect_corpus, config.dialect_lang, *splitter, config.workers);
  const auto standard = corpus::ingest_directory(config.standard_corpus, config.standard_lang, *splitter, config.workers);
  const auto links = corpus::read_link_table(run.input(config.link_table));
  const auto pairing = corpus::pair_pages(links, dialect.page_index(), standard.page_index());

  run.write_with(L.sentences(), [&](std::ostream& out) {
    corpus::write_sentences_jsonl(out, dialect.sentences);
    corpus::write_sentences_jsonl(out, standard.sentences);
  });
  run.write_with(L.rejections(), [&](std::ostream& out) {
    std::vector<corpus::Rejection> all = dialect.rejections;
    all.insert(all.end(), standard.rejections.begin(), standard.rejections.end());
    corpus::write_rejections_tsv(out, all);
  });
  run.write_with(L.page_pairs(), [&](std::ostream& out) { corpus::write_link_table(out, pairing.pairs); });
  run.write_with(L.dropped_links(), [&](std::ostream& out) {
    out << "dialect_page_id\tstandard_page_id\treason\n";
    for (const auto& d : pairing.dropped) {
      out << d.link.dialect_page_id << '\t' << d.link.standard_page_id << '\t' << d.reason << '\n';
    }
  });
  json dropped = json::object();
  for (const auto& d : pairing.dropped) dropped[d.reason] = dropped.value(d.reason, 0) + 1;
  run.write_json(L.corpus_stats(), {{"dialect", stats_json(dialect)},
                                    {"standard", stats_json(standard)},
                                    {"links", links.size()},
                                    {"page_pairs", pairing.pairs.size()},
                                    {"dropped_links", dropped}});
  run.finish();
}

struct MinedPages {
  std::vector<corpus::Sentence> dialect;   // sentences of paired pages, pair order
  std::vector<corpus::Sentence> standard;
};

MinedPages paired_sentences(const SentencesByPage& by_page, const std::vector<corpus::PageLink>& pairs,
                            const PipelineConfig& config) {
  MinedPages out;
  std::set<std::string> seen_d, seen_s;
  for (const auto& p : pairs) {
    auto add = [&](const std::string& lang, const std::string& page, std::set<std::string>& seen,
                   std::vector<corpus::Sentence>& dst) {
      if (!seen.insert(page).second) return;
      const auto it = by_page.find({lang, page});
      if (it != by_page.end()) dst.insert(dst.end(), it->second.begin(), it->second.end());
    };
    add(config.dialect_lang, p.dialect_page_id, seen_d, out.dialect);
    add(config.standard_lang, p.standard_page_id, seen_s, out.standard);
  }
  return out;
}

std::vector<miner::SentencePair> mine_all(const SentencesByPage& by_page, const std::vector<corpus::PageLink>& pairs,
                                          const embeddings::EmbeddingMatrix& d_emb,
                                          const embeddings::EmbeddingMatrix& s_emb, const std::string& embedder_id,
                                          const PipelineConfig& config) {
  static const std::vector<corpus::Sentence> none;
  std::vector<std::vector<miner::SentencePair>> per_pair(pairs.size());
  parallel_for(pairs.size(), config.workers, [&](std::size_t i) {
    const auto d = by_page.find({config.dialect_lang, pairs[i].dialect_page_id});
    const auto s = by_page.find({config.standard_lang, pairs[i].standard_page_id});
    const auto& src = d == by_page.end() ? none : d->second;
    const auto& tgt = s == by_page.end() ? none : s->second;
    if (src.empty() || tgt.empty()) return;
    per_pair[i] = miner::mine_page_pair(src, tgt, d_emb, s_emb, config.k, embedder_id);
  });
  std::vector<miner::SentencePair> all;
  for (auto& v : per_pair) all.insert(all.end(), v.begin(), v.end());
  return all;
}

void stage_mine(const PipelineConfig& config) {
  StageRun run(Stage::mine, config);
  const auto& L = run.layout();
  const auto sentences = load_sentences(run);
  const auto pairs = load_page_pairs(run);
  const auto by_page = group_by_page(sentences);
  const auto mined = paired_sentences(by_page, pairs, config);
  const auto pooling = embeddings::parse_pooling(config.pooling);
  using embeddings::Level;

  std::map<std::string, std::vector<miner::SentencePair>> by_embedder;
  std::vector<miner::SentencePair> primary;
  std::vector<std::string> specs = {config.embedder};
  specs.insert(specs.end(), config.compare_embedders.begin(), config.compare_embedders.end());
  for (std::size_t e = 0; e < specs.size(); ++e) {
    const auto d = embed_sentences(specs[e], mined.dialect, config.dialect_lang, Level::sentence, pooling);
    const auto s = embed_sentences(specs[e], mined.standard, config.standard_lang, Level::sentence, pooling);
    auto all = mine_all(by_page, pairs, d.matrix, s.matrix, d.embedder_id, config);
    if (e == 0) {
      run.write(L.embedding(config.dialect_lang, Level::sentence), embeddings::encode(d.matrix));
      run.write(L.embedding(config.standard_lang, Level::sentence), embeddings::encode(s.matrix));
      primary = all;
    }
    by_embedder[d.embedder_id] = std::move(all);
  }

  run.write_with(L.bitext_all(), [&](std::ostream& out) { miner::write_bitext_tsv(out, primary); });
  const auto kept = miner::apply_cutoff(primary, config.cosine_cutoff);
  run.write_with(L.bitext(), [&](std::ostream& out) { miner::write_bitext_tsv(out, kept); });
  json comparison = miner::compare_models(by_embedder);
  comparison["cosine_cutoff"] = config.cosine_cutoff;
  comparison["candidates"] = primary.size();
  comparison["retained"] = kept.size();
  run.write_json(L.model_comparison(), comparison);
  run.finish();
}

void stage_align(const PipelineConfig& config) {
  StageRun run(Stage::align, config);
  const auto& L = run.layout();
  const auto sentences = load_sentences(run);
  const auto bitext = load_bitext(run, L.bitext());
  std::map<std::string, const corpus::Sentence*> by_id;
  for (const auto& s : sentences) by_id.emplace(s.id, &s);
  auto lookup = [&](const std::string& id) -> const corpus::Sentence& {
    const auto it = by_id.find(id);
    if (it == by_id.end()) throw Error(Errc::missing_input, "sentence " + id + " from bitext.tsv is not in sentences.jsonl");
    return *it->second;
  };

  std::vector<corpus::Sentence> src, tgt;
  std::set<std::string> seen_src, seen_tgt;
  for (const auto& p : bitext) {
    if (seen_src.insert(p.src_id).second) src.push_back(lookup(p.src_id));
    if (seen_tgt.insert(p.tgt_id).second) tgt.push_back(lookup(p.tgt_id));
  }
  const auto pooling = embeddings::parse_pooling(config.pooling);
  using embeddings::Level;
  const auto d = embed_sentences(config.embedder, src, config.dialect_lang, Level::token, pooling);
  const auto s = embed_sentences(config.embedder, tgt, config.standard_lang, Level::token, pooling);
  run.write(L.embedding(config.dialect_lang, Level::token), embeddings::encode(d.matrix));
  run.write(L.embedding(config.standard_lang, Level::token), embeddings::encode(s.matrix));

  const aligner::AlignOptions options{config.alignment_scale};
  std::vector<aligner::SentenceAlignment> aligned(bitext.size());
  parallel_for(bitext.size(), config.workers, [&](std::size_t i) {
    aligned[i] = aligner::align_sentence_pair(lookup(bitext[i].src_id), lookup(bitext[i].tgt_id), d.matrix,
                                              s.matrix, options);
  });

  run.write_with(L.alignments(), [&](std::ostream& out) {
    for (const auto& a : aligned) out << aligner::alignment_json_line(a) << '\n';
  });
  run.write_with(L.pharaoh(), [&](std::ostream& out) {
    for (const auto& a : aligned) out << aligner::pharaoh_line(a) << '\n';
  });
  run.write_with(L.observations(), [&](std::ostream& out) {
    std::vector<aligner::WordPairObservation> obs;
    for (const auto& a : aligned) obs.insert(obs.end(), a.observations.begin(), a.observations.end());
    aligner::write_observations_tsv(out, obs);
  });
  run.finish();
}

void stage_build_lexicon(const PipelineConfig& config) {
  StageRun run(Stage::build_lexicon, config);
  const auto& L = run.layout();
  std::istringstream obs_in(read_file(run.input(L.observations())));
  const auto observations = aligner::read_observations_tsv(obs_in);
  const auto sentences = load_sentences(run);
  std::vector<corpus::Sentence> dialect;
  std::copy_if(sentences.begin(), sentences.end(), std::back_inserter(dialect),
               [&](const corpus::Sentence& s) { return s.lang == config.dialect_lang; });
  const auto freq = corpus::build_frequency_index(dialect);

  const auto all = lexicon::attach_frequencies(lexicon::aggregate(observations), freq);
  const auto kept = lexicon::apply_probability_cutoff(all, config.alignment_cutoff);
  run.write_with(L.lexicon_all(), [&](std::ostream& out) { lexicon::write_lexicon_tsv(out, all); });
  run.write_with(L.lexicon(), [&](std::ostream& out) { lexicon::write_lexicon_tsv(out, kept); });
  run.write_with(L.synonym_groups(), [&](std::ostream& out) {
    lexicon::write_synonym_groups_json(out, lexicon::group_one_to_many(kept));
  });
  run.finish();
}

std::array<eval::QuartileSample, 4> sample_lexicon(const std::vector<lexicon::LexiconEntry>& lex,
                                                   const PipelineConfig& config) {
  if (lex.empty()) {
    std::array<eval::QuartileSample, 4> empty;
    for (int q = 0; q < 4; ++q) empty[q].quartile = q + 1;
    return empty;
  }
  return eval::stratified_sample(lex, config.wordpair_per_bin, config.seed);
}

void stage_sample_annotation(const PipelineConfig& config) {
  StageRun run(Stage::sample_annotation, config);
  const auto& L = run.layout();
  const auto sentences = load_sentences(run);
  const auto candidates = load_bitext(run, L.bitext_all());
  const auto lex = load_lexicon(run, L.lexicon());
  std::map<std::string, std::string> text_of;
  for (const auto& s : sentences) text_of.emplace(s.id, s.text);

  const auto bitext = miner::sample_for_annotation(candidates, config.bitext_sample_size, config.bitext_sample_lo,
                                                   config.bitext_sample_hi, config.seed);
  json bitext_items = json::array();
  for (const auto& p : bitext.pairs) {
    bitext_items.push_back(
        {{"ref", p.ref()}, {"context", {{"dialect_sentence", text_of[p.src_id]}, {"standard_sentence", text_of[p.tgt_id]}}}});
  }
  run.write_json(L.bitext_task(), {{"task_id", "bitext"},
                                   {"kind", "bitext"},
                                   {"seed", config.seed},
                                   {"control_size", std::min(config.control_size, bitext.pairs.size())},
                                   {"population", bitext.population},
                                   {"short_population", bitext.short_population},
                                   {"items", bitext_items}});

  const auto sample = sample_lexicon(lex, config);
  json word_items = json::array();
  run.write_with(L.wordpair_sample(), [&](std::ostream& out) {
    out << "quartile\tdialect_word\tstandard_word\tcount\tmean_p\tdialect_freq\n";
    for (const auto& bin : sample) {
      for (const auto& e : bin.entries) {
        out << bin.quartile << '\t' << e.dialect_word << '\t' << e.standard_word << '\t' << e.count << '\t'
            << round6(e.mean_p) << '\t' << e.dialect_freq << '\n';
        // Word pairs are shown without their sentence context.
        word_items.push_back({{"ref", e.ref()},
                              {"context", {{"dialect_word", e.dialect_word}, {"standard_word", e.standard_word}}}});
      }
    }
  });
  run.write_json(L.wordpair_task(), {{"task_id", "wordpair"},
                                     {"kind", "wordpair"},
                                     {"seed", config.seed},
                                     {"control_size", std::min(config.control_size, word_items.size())},
                                     {"items", word_items}});
  run.finish();
}

std::vector<annotation::Annotation> read_labels(StageRun& run, const fs::path& path, annotation::TaskKind kind) {
  std::istringstream in(read_file(run.input(path)));
  std::vector<annotation::Annotation> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      auto a = annotation::annotation_from_json(json::parse(line), kind);
      annotation::validate(a);
      out.push_back(std::move(a));
    } catch (const json::exception& e) {
      throw Error(Errc::schema_violation, path.filename().string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

/// ref -> label per annotator; later lines win.
std::map<std::string, std::map<std::string, std::string>> labels_by_annotator(
    const std::vector<annotation::Annotation>& labels) {
  std::map<std::string, std::map<std::string, std::string>> out;
  for (const auto& a : labels) {
    const std::string& label = std::visit([](const auto& x) -> const std::string& { return x.label; }, a);
    out[annotation::annotator_of(a)][annotation::item_ref(a)] = label;
  }
  return out;
}

/// The annotator with the most labels (ties: smallest id) is the primary one.
std::map<std::string, std::string> primary_labels(
    const std::map<std::string, std::map<std::string, std::string>>& by_annotator, std::string* who = nullptr) {
  const std::map<std::string, std::string>* best = nullptr;
  for (const auto& [id, labels] : by_annotator) {
    if (best == nullptr || labels.size() > best->size()) {
      best = &labels;
      if (who) *who = id;
    }
  }
  return best ? *best : std::map<std::string, std::string>{};
}

json agreement_json(const std::map<std::string, std::map<std::string, std::string>>& by_annotator,
                    eval::AgreementTask task) {
  json out = json::array();
  for (auto a = by_annotator.begin(); a != by_annotator.end(); ++a) {
    for (auto b = std::next(a); b != by_annotator.end(); ++b) {
      json row = {{"annotator_a", a->first}, {"annotator_b", b->first}};
      try {
        const auto r = eval::agreement(a->second, b->second, task);
        row["n_items"] = r.n_items;
        row["exact_match"] = round6(r.exact_match_rate);
        row["pearson_r"] = r.pearson_r ? json(round6(*r.pearson_r)) : json(nullptr);
      } catch (const Error& e) {
        row["n_items"] = 0;
        row["note"] = std::string(errc_name(e.code()));
      }
      out.push_back(std::move(row));
    }
  }
  return out;
}

json score_json(const eval::DictionaryScore& s) {
  return {{"n", s.n},
          {"covered", s.covered},
          {"matched", s.matched},
          {"coverage", round6(s.coverage)},
          {"match", s.match_defined ? json(round6(s.match)) : json(nullptr)}};
}

std::vector<eval::GoldPair> read_gold(StageRun& run, const fs::path& path) {
  std::istringstream in(read_file(run.input(path)));
  std::vector<eval::GoldPair> out;
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (first) {
      first = false;
      if (line.rfind("dialect_word\t", 0) == 0) continue;
    }
    if (line.empty()) continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos) throw Error(Errc::invalid_argument, "gold row needs 2 columns: " + line);
    out.push_back({line.substr(0, tab), line.substr(tab + 1, line.find('\t', tab + 1) - tab - 1)});
  }
  return out;
}

void stage_evaluate(const PipelineConfig& config) {
  StageRun run(Stage::evaluate, config);
  const auto& L = run.layout();
  const auto lex = load_lexicon(run, L.lexicon());
  const auto lex_all = load_lexicon(run, L.lexicon_all());
  const auto sample = sample_lexicon(lex, config);

  std::optional<eval::Dictionary> dict;
  if (config.dictionary) {
    std::istringstream in(read_file(run.input(*config.dictionary)));
    dict = eval::read_dictionary_tsv(in);
  }
  std::map<std::string, std::map<std::string, std::string>> word_by_annotator;
  std::map<std::string, std::string> word_labels;
  std::string primary_annotator;
  if (config.wordpair_labels) {
    word_by_annotator = labels_by_annotator(read_labels(run, *config.wordpair_labels, annotation::TaskKind::wordpair));
    word_labels = primary_labels(word_by_annotator, &primary_annotator);
  }

  json report = json::object();
  report["lexicon"] = {{"entries_before_cutoff", lex_all.size()},
                       {"entries", lex.size()},
                       {"alignment_cutoff", config.alignment_cutoff}};
  json cuts = nullptr;
  if (!lex.empty()) {
    const auto c = eval::quartile_cuts(lex);
    cuts = {{"q25", c.q25}, {"q50", c.q50}, {"q75", c.q75}};
  }
  report["sampling"] = {{"per_bin", config.wordpair_per_bin}, {"seed", config.seed}, {"cuts", cuts}};

  json table = json::array();
  std::size_t total_labeled = 0, total_yes = 0, total_sampled = 0;
  for (const auto& bin : sample) {
    json row = {{"quartile", bin.quartile}, {"population", bin.population}, {"n", bin.entries.size()}};
    total_sampled += bin.entries.size();
    std::vector<lexicon::LexiconEntry> accepted;
    std::size_t labeled = 0, yes = 0;
    for (const auto& e : bin.entries) {
      const auto it = word_labels.find(e.ref());
      if (it == word_labels.end()) continue;
      ++labeled;
      if (it->second == "yes") {
        ++yes;
        accepted.push_back(e);
      }
    }
    total_labeled += labeled;
    total_yes += yes;
    row["dictionary"] = dict ? score_json(eval::score_against_dictionary(bin.entries, *dict)) : json(nullptr);
    row["dictionary_accepted"] = dict && config.wordpair_labels
                                     ? score_json(eval::score_against_dictionary(accepted, *dict))
                                     : json(nullptr);
    if (config.wordpair_labels) {
      row["human"] = {{"labeled", labeled},
                      {"yes", yes},
                      {"accepted", labeled == 0 ? json(nullptr) : json(round6(static_cast<double>(yes) / labeled))}};
    } else {
      row["human"] = nullptr;
    }
    table.push_back(std::move(row));
  }
  report["quartiles"] = table;
  report["overall"] = {{"sampled", total_sampled},
                       {"labeled", config.wordpair_labels ? json(total_labeled) : json(nullptr)},
                       {"yes", config.wordpair_labels ? json(total_yes) : json(nullptr)}};

  try {
    report["edit_distance"] = {{"n", lex.size()}, {"pearson_r", round6(eval::edit_distance_correlation(lex))}};
  } catch (const Error& e) {
    report["edit_distance"] = {{"n", lex.size()}, {"pearson_r", nullptr}, {"note", std::string(errc_name(e.code()))}};
  }

  if (config.wordpair_labels) {
    std::vector<eval::LabeledScore> scored;
    for (const auto& e : lex_all) {
      const auto it = word_labels.find(e.ref());
      if (it == word_labels.end() || it->second == "idk") continue;
      scored.push_back({e.mean_p, it->second == "yes"});
    }
    const auto thresholds = eval::default_sweep_thresholds();
    const auto sweep = eval::f1_sweep(scored, thresholds);
    json points = json::array();
    for (const auto& p : sweep) {
      points.push_back({{"threshold", round6(p.threshold)},
                        {"precision", round6(p.precision)},
                        {"recall", round6(p.recall)},
                        {"f1", round6(p.f1)},
                        {"tp", p.tp},
                        {"fp", p.fp},
                        {"fn", p.fn}});
    }
    report["f1_sweep"] = {{"annotator", primary_annotator}, {"n", scored.size()}, {"points", points}};
    run.write_with(L.f1_sweep(), [&](std::ostream& out) { eval::write_f1_sweep_tsv(out, sweep); });
    report["agreement_wordpair"] = agreement_json(word_by_annotator, eval::AgreementTask::binary);
  } else {
    report["f1_sweep"] = nullptr;
  }

  if (config.bitext_labels) {
    const auto by_annotator = labels_by_annotator(read_labels(run, *config.bitext_labels, annotation::TaskKind::bitext));
    const auto labels = primary_labels(by_annotator);
    std::vector<miner::PairLabel> pair_labels;
    for (const auto& [ref, label] : labels) pair_labels.push_back({ref, label});
    const auto candidates = load_bitext(run, L.bitext_all());
    json groups = json::object();
    for (const auto& [label, scores] : miner::group_scores_by_label(candidates, pair_labels)) {
      double sum = 0.0;
      for (double s : scores) sum += s;
      groups[std::to_string(label)] = {{"n", scores.size()}, {"mean_cos", round6(sum / scores.size())}};
    }
    report["bitext_labels"] = groups;
    report["agreement_bitext"] = agreement_json(by_annotator, eval::AgreementTask::likert);
  }

  if (config.dialect_vectors && config.standard_vectors) {
    std::istringstream din(read_file(run.input(*config.dialect_vectors)));
    std::istringstream sin(read_file(run.input(*config.standard_vectors)));
    const auto dvec = eval::read_word_vectors(din);
    const auto svec = eval::read_word_vectors(sin);
    std::vector<eval::GoldPair> gold;
    if (config.baseline_gold) {
      gold = read_gold(run, *config.baseline_gold);
    } else {
      for (const auto& e : lex_all) {
        const auto it = word_labels.find(e.ref());
        if (it != word_labels.end() && it->second == "yes") gold.push_back({e.dialect_word, e.standard_word});
      }
    }
    const auto b = eval::nn_baseline(dvec, svec, gold);
    report["nn_baseline"] = {{"n_gold", b.n_gold},
                             {"n_evaluated", b.n_evaluated},
                             {"n_correct", b.n_correct},
                             {"missing", b.missing.size()}};
  }

  run.write_json(L.evaluation(), report);
  run.finish();
}

json percent(const json& v) {
  if (!v.is_number()) return nullptr;
  return std::round(v.get<double>() * 1000.0) / 10.0;
}

void stage_report(const PipelineConfig& config) {
  StageRun run(Stage::report, config);
  const auto& L = run.layout();
  const json evaluation = json::parse(read_file(run.input(L.evaluation())));
  const json stats = json::parse(read_file(run.input(L.corpus_stats())));
  const json comparison = json::parse(read_file(run.input(L.model_comparison())));

  json rows = json::array();
  for (const auto& q : evaluation.at("quartiles")) {
    json row = {{"quartile", q.at("quartile")}, {"n", q.at("n")}};
    const json& d = q.at("dictionary");
    const json& da = q.at("dictionary_accepted");
    const json& h = q.at("human");
    row["coverage_pct"] = d.is_null() ? json(nullptr) : percent(d.at("coverage"));
    row["match_pct"] = d.is_null() ? json(nullptr) : percent(d.at("match"));
    row["coverage_accepted_pct"] = da.is_null() ? json(nullptr) : percent(da.at("coverage"));
    row["match_accepted_pct"] = da.is_null() ? json(nullptr) : percent(da.at("match"));
    row["human_pct"] = h.is_null() ? json(nullptr) : percent(h.at("accepted"));
    rows.push_back(std::move(row));
  }
  run.write_json(L.quartile_report(), {{"quartiles", rows}, {"overall", evaluation.at("overall")}});

  json summary = {{"corpus", {{"dialect", stats.at("dialect")}, {"standard", stats.at("standard")}}},
                  {"page_pairs", stats.at("page_pairs")},
                  {"bitext", {{"candidates", comparison.value("candidates", 0)},
                              {"retained", comparison.value("retained", 0)},
                              {"cosine_cutoff", config.cosine_cutoff}}},
                  {"lexicon", evaluation.at("lexicon")},
                  {"edit_distance", evaluation.at("edit_distance")}};
  if (evaluation.contains("nn_baseline")) summary["nn_baseline"] = evaluation.at("nn_baseline");
  run.write_json(L.summary(), summary);

  if (fs::exists(L.f1_sweep())) {
    run.write(L.report_f1(), read_file(run.input(L.f1_sweep())));
  } else {
    run.write(L.report_f1(), "threshold\tprecision\trecall\tf1\n");
  }
  run.finish();
}

}  // namespace

std::string to_string(Stage stage) {
  switch (stage) {
    case Stage::ingest: return "ingest";
    case Stage::mine: return "mine";
    case Stage::align: return "align";
    case Stage::build_lexicon: return "build-lexicon";
    case Stage::sample_annotation: return "sample-annotation";
    case Stage::evaluate: return "evaluate";
    case Stage::report: return "report";
  }
  return "?";
}

const std::vector<Stage>& all_stages() {
  static const std::vector<Stage> v = {Stage::ingest,           Stage::mine,     Stage::align, Stage::build_lexicon,
                                       Stage::sample_annotation, Stage::evaluate, Stage::report};
  return v;
}

Stage parse_stage(const std::string& name) {
  for (Stage s : all_stages()) {
    if (to_string(s) == name) return s;
  }
  throw Error(Errc::config_error, "unknown stage '" + name + "'");
}

void run_stage(Stage stage, const PipelineConfig& config) {
  validate(config);
  fs::create_directories(config.out);
  switch (stage) {
    case Stage::ingest: return stage_ingest(config);
    case Stage::mine: return stage_mine(config);
    case Stage::align: return stage_align(config);
    case Stage::build_lexicon: return stage_build_lexicon(config);
    case Stage::sample_annotation: return stage_sample_annotation(config);
    case Stage::evaluate: return stage_evaluate(config);
    case Stage::report: return stage_report(config);
  }
}

void run_all(const PipelineConfig& config) {
  for (Stage s : all_stages()) run_stage(s, config);
}

}  // namespace dblex::pipeline
