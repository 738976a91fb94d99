#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "dblex/embedder.hpp"

namespace dblex::pipeline {

/// Effective pipeline settings. Relative paths in a config file resolve
/// against the file's directory.
struct PipelineConfig {
  std::filesystem::path dialect_corpus;
  std::filesystem::path standard_corpus;
  std::filesystem::path link_table;
  std::string dialect_lang = "bar";
  std::string standard_lang = "de";
  std::string splitter = "rules";  // rules | presplit

  std::string embedder = "mock";   // mock[:dim[:seed]] | file:<dir> | http:<url>
  std::vector<std::string> compare_embedders;
  std::string pooling = "cls";

  std::size_t k = 1;
  double cosine_cutoff = 0.7;
  double alignment_cutoff = 0.8;
  double alignment_scale = 16.0;

  std::size_t bitext_sample_size = 1500;
  double bitext_sample_lo = 0.4;
  double bitext_sample_hi = 0.95;
  std::size_t wordpair_per_bin = 250;
  std::size_t control_size = 200;

  std::uint64_t seed = 42;
  std::size_t workers = 1;

  // Optional evaluation inputs.
  std::optional<std::filesystem::path> dictionary;
  std::optional<std::filesystem::path> wordpair_labels;  // annotation export, JSON lines
  std::optional<std::filesystem::path> bitext_labels;    // annotation export, JSON lines
  std::optional<std::filesystem::path> dialect_vectors;
  std::optional<std::filesystem::path> standard_vectors;
  std::optional<std::filesystem::path> baseline_gold;    // TSV dialect_word, standard_word

  std::filesystem::path out = "out";

  nlohmann::json to_json() const;
};

/// Parses a config object; every problem is collected and reported in one
/// config_error. `base` anchors relative paths.
PipelineConfig config_from_json(const nlohmann::json& j, const std::filesystem::path& base);

/// Reads a config file (missing file: config_error) and applies overrides
/// from DBLEX_DIALECT_CORPUS, DBLEX_STANDARD_CORPUS, DBLEX_LINK_TABLE,
/// DBLEX_EMBEDDER, DBLEX_EMBEDDER_URL, DBLEX_DICTIONARY and DBLEX_OUT.
PipelineConfig load_config(const std::filesystem::path& path);

/// Re-checks ranges after command-line overrides; throws config_error.
void validate(const PipelineConfig& config);

/// Hex SHA-256 of the canonical JSON form of the config.
std::string config_hash(const PipelineConfig& config);
std::string sha256_file(const std::filesystem::path& path);

/// Builds the embedder for a mock or http spec. file: specs are handled by
/// the stages directly since they carry precomputed vectors.
std::shared_ptr<embeddings::Embedder> make_embedder(const std::string& spec);

enum class Stage { ingest, mine, align, build_lexicon, sample_annotation, evaluate, report };

std::string to_string(Stage stage);
Stage parse_stage(const std::string& name);
const std::vector<Stage>& all_stages();

/// Runs one stage. Inputs from earlier stages are read from config.out; a
/// missing one raises missing_input naming the file. Outputs are written
/// into config.out and recorded in config.out/manifest.json.
void run_stage(Stage stage, const PipelineConfig& config);

/// All stages in order.
void run_all(const PipelineConfig& config);

}  // namespace dblex::pipeline
