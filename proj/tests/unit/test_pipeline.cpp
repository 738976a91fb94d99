#include <gtest/gtest.h>

#include <cstdlib>
#include <sys/wait.h>

#include <json.hpp>

#include "dblex/error.hpp"
#include "dblex/pipeline.hpp"
#include "test_util.hpp"

using namespace dblex::pipeline;
using dblex::Errc;
using dblex::Error;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

fs::path fixture() { return testutil::data_dir() / "fixture"; }

PipelineConfig fixture_config(const fs::path& out) {
  auto c = config_from_json(json::parse(testutil::read_file(fixture() / "config.json")), fixture());
  c.out = out;
  return c;
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string("\"") + DBLEX_CLI + "\" " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string quoted(const fs::path& p) { return "\"" + p.string() + "\""; }

}  // namespace

TEST(PipelineConfig, DefaultsMatchCalibratedValues) {
  const json j = {{"dialect_corpus", "a"}, {"standard_corpus", "b"}, {"link_table", "l.tsv"}};
  const auto c = config_from_json(j, "/base");
  EXPECT_EQ(c.cosine_cutoff, 0.7);
  EXPECT_EQ(c.alignment_cutoff, 0.8);
  EXPECT_EQ(c.k, 1u);
  EXPECT_EQ(c.seed, 42u);
  EXPECT_EQ(c.embedder, "mock");
  EXPECT_EQ(c.dialect_corpus, fs::path("/base/a"));
  EXPECT_EQ(c.out, fs::path("/base/out"));
}

TEST(PipelineConfig, ErrorsAreListedExhaustively) {
  const json j = {{"cosine_cutoff", 1.5},
                  {"alignment_cutoff", "high"},
                  {"seed", -3},
                  {"pooling", "max"},
                  {"embedder", "gpt:foo"},
                  {"colour", "blue"}};
  try {
    config_from_json(j, "/base");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::config_error);
    const std::string d = e.detail();
    for (const char* needle : {"dialect_corpus", "standard_corpus", "link_table", "cosine_cutoff",
                               "alignment_cutoff", "seed", "pooling", "embedder", "colour"}) {
      EXPECT_NE(d.find(needle), std::string::npos) << needle << " missing from: " << d;
    }
  }
}

TEST(PipelineConfig, EnvironmentOverrides) {
  testutil::TempDir dir;
  testutil::write_file(dir / "c.json", R"({"dialect_corpus":"a","standard_corpus":"b","link_table":"l.tsv"})");
  ::setenv("DBLEX_OUT", "/tmp/elsewhere", 1);
  ::setenv("DBLEX_EMBEDDER_URL", "http://127.0.0.1:9999", 1);
  const auto c = load_config(dir / "c.json");
  ::unsetenv("DBLEX_OUT");
  ::unsetenv("DBLEX_EMBEDDER_URL");
  EXPECT_EQ(c.out, fs::path("/tmp/elsewhere"));
  EXPECT_EQ(c.embedder, "http:http://127.0.0.1:9999");
  EXPECT_EQ(c.dialect_corpus, (dir / "a").lexically_normal());
}

TEST(PipelineConfig, MissingFileIsConfigError) {
  try {
    load_config("/nonexistent/config.json");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::config_error);
  }
}

TEST(PipelineConfig, HashFollowsContent) {
  testutil::TempDir dir;
  auto a = fixture_config(dir.path());
  auto b = a;
  EXPECT_EQ(config_hash(a), config_hash(b));
  b.seed = 7;
  EXPECT_NE(config_hash(a), config_hash(b));
  EXPECT_EQ(config_hash(a).size(), 64u);
}

TEST(PipelineStages, StageNames) {
  for (auto s : all_stages()) EXPECT_EQ(parse_stage(to_string(s)), s);
  EXPECT_EQ(to_string(Stage::build_lexicon), "build-lexicon");
  EXPECT_THROW(parse_stage("train"), Error);
}

TEST(PipelineStages, MineWithoutIngestNamesSentencesFile) {
  testutil::TempDir dir;
  try {
    run_stage(Stage::mine, fixture_config(dir.path()));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::missing_input);
    EXPECT_EQ(e.detail().rfind("sentences.jsonl", 0), 0u) << e.detail();
  }
}

TEST(PipelineStages, FullRunIsReproducibleAndManifestMatches) {
  testutil::TempDir a, b;
  run_all(fixture_config(a.path()));
  run_all(fixture_config(b.path()));
  for (const char* f : {"sentences.jsonl", "bitext.tsv", "alignments.jsonl", "observations.tsv", "lexicon.tsv",
                        "lexicon_all.tsv", "synonym_groups.json", "evaluation.json", "f1_sweep.tsv",
                        "report/quartiles.json", "report/summary.json", "annotation/wordpair_task.json"}) {
    ASSERT_TRUE(fs::exists(a / f)) << f;
    EXPECT_EQ(testutil::read_file(a / f), testutil::read_file(b / f)) << f;
  }

  const auto manifest = json::parse(testutil::read_file(a / "manifest.json"));
  ASSERT_TRUE(manifest.contains("outputs"));
  EXPECT_GE(manifest.at("outputs").size(), 12u);
  for (const auto& [name, rec] : manifest.at("outputs").items()) {
    EXPECT_EQ(rec.at("sha256"), sha256_file(a.path() / name)) << name;
    EXPECT_EQ(rec.at("seed"), 42);
  }
  EXPECT_EQ(manifest.at("stages").size(), all_stages().size());

  // rerunning one stage leaves everything byte-identical
  const std::string before = testutil::read_file(a / "lexicon.tsv");
  run_stage(Stage::build_lexicon, fixture_config(a.path()));
  EXPECT_EQ(testutil::read_file(a / "lexicon.tsv"), before);
  const auto m2 = json::parse(testutil::read_file(a / "manifest.json"));
  for (const auto& [name, rec] : m2.at("outputs").items()) EXPECT_EQ(rec.at("sha256"), sha256_file(a.path() / name));

  // report content
  const auto table = json::parse(testutil::read_file(a / "report/quartiles.json"));
  EXPECT_FALSE(table.empty());
  EXPECT_TRUE(fs::exists(a / "report/f1_sweep.tsv"));
}

TEST(PipelineStages, CutoffChangesLexiconSize) {
  testutil::TempDir a, b;
  auto ca = fixture_config(a.path());
  auto cb = fixture_config(b.path());
  cb.alignment_cutoff = 0.95;
  for (auto s : {Stage::ingest, Stage::mine, Stage::align, Stage::build_lexicon}) {
    run_stage(s, ca);
    run_stage(s, cb);
  }
  auto lines = [](const fs::path& p) {
    const auto s = testutil::read_file(p);
    return std::count(s.begin(), s.end(), '\n');
  };
  EXPECT_GE(lines(a / "lexicon.tsv"), lines(b / "lexicon.tsv"));
  EXPECT_EQ(testutil::read_file(a / "lexicon_all.tsv"), testutil::read_file(b / "lexicon_all.tsv"));
}

TEST(PipelineCli, ExitCodes) {
  testutil::TempDir dir;
  const auto config = quoted(fixture() / "config.json");
  EXPECT_EQ(run_cli("--config " + config + " --out " + quoted(dir.path()) + " mine"), 3);
  EXPECT_EQ(run_cli("--config " + config + " --out " + quoted(dir.path()) + " --cosine-cutoff 2 mine"), 2);
  EXPECT_EQ(run_cli("--config /nonexistent.json ingest"), 2);
  EXPECT_EQ(run_cli("--bogus-flag ingest"), 2);
  EXPECT_EQ(run_cli("--config " + config + " --out " + quoted(dir.path()) + " ingest"), 0);
  EXPECT_TRUE(fs::exists(dir / "sentences.jsonl"));
  EXPECT_EQ(run_cli("--config " + config + " --out " + quoted(dir.path()) + " run --stage mine --stage align"), 0);
  EXPECT_TRUE(fs::exists(dir / "observations.tsv"));
  EXPECT_EQ(run_cli("--config " + config + " --out " + quoted(dir.path()) + " run --stage nonsense"), 2);
}

TEST(PipelineCli, EmbedderOverrideFromCommandLine) {
  testutil::TempDir dir;
  const auto config = quoted(fixture() / "config.json");
  EXPECT_EQ(run_cli("--config " + config + " --out " + quoted(dir.path()) + " --embedder mock:32:7 run --stage ingest --stage mine"), 0);
  EXPECT_NE(testutil::read_file(dir / "bitext_all.tsv").find("mock-d32"), std::string::npos);
}
