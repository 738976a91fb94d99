// dblex: dialect lexicon pipeline driver.
//
//   dblex --config run.json run
//   dblex --config run.json mine --cosine-cutoff 0.8
//   dblex --config run.json run --stage evaluate
//   dblex serve-annotation --dir labels --task out/annotation/wordpair_task.json
//
// Exit codes: 0 success, 2 config error, 3 missing input, 4 runtime failure.

#include <csignal>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "dblex/annotation.hpp"
#include "dblex/embedder.hpp"
#include "dblex/error.hpp"
#include "dblex/pipeline.hpp"

namespace {

using dblex::Errc;
using dblex::Error;
namespace pipeline = dblex::pipeline;

struct Overrides {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> workers;
  std::optional<std::string> embedder;
  std::optional<double> cosine_cutoff;
  std::optional<double> alignment_cutoff;
  std::optional<std::string> out;
};

pipeline::PipelineConfig effective_config(const Overrides& o) {
  if (o.config.empty()) throw Error(Errc::config_error, "--config is required");
  auto config = pipeline::load_config(o.config);
  if (o.seed) config.seed = *o.seed;
  if (o.workers) config.workers = *o.workers;
  if (o.embedder) config.embedder = *o.embedder;
  if (o.cosine_cutoff) config.cosine_cutoff = *o.cosine_cutoff;
  if (o.alignment_cutoff) config.alignment_cutoff = *o.alignment_cutoff;
  if (o.out) config.out = std::filesystem::absolute(*o.out).lexically_normal();
  pipeline::validate(config);
  return config;
}

int exit_code(Errc code) {
  switch (code) {
    case Errc::config_error: return 2;
    case Errc::missing_input: return 3;
    default: return 4;
  }
}

std::function<void()> g_stop;

void on_signal(int) {
  if (g_stop) g_stop();
}

void load_task_file(dblex::annotation::AnnotationStore& store, const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::missing_input, path);
  const auto body = nlohmann::json::parse(in);
  std::vector<dblex::annotation::TaskItem> items;
  for (const auto& item : body.at("items")) {
    items.push_back({item.at("ref").get<std::string>(), item.value("context", nlohmann::json::object())});
  }
  const std::string id = body.at("task_id").get<std::string>();
  const auto kind = dblex::annotation::parse_task_kind(body.at("kind").get<std::string>());
  for (const auto& t : store.tasks()) {
    if (t.task_id == id) return;  // already loaded on an earlier start
  }
  store.add_task(dblex::annotation::create_task(
      id, kind, std::move(items), body.value("control_size", std::size_t{0}), body.value("seed", std::uint64_t{0}),
      body.value("primary_annotators", std::vector<std::string>{})));
  std::cerr << "loaded task " << id << " from " << path << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Bitext mining and dialect lexicon induction pipeline"};
  app.require_subcommand(1);
  app.fallthrough();

  Overrides o;
  app.add_option("--config", o.config, "pipeline config file (JSON)");
  app.add_option("--seed", o.seed, "random seed for sampling");
  app.add_option("--workers", o.workers, "worker threads per stage")->check(CLI::PositiveNumber);
  app.add_option("--embedder", o.embedder, "mock[:dim[:seed]] | file:<dir> | http:<url>");
  app.add_option("--cosine-cutoff", o.cosine_cutoff, "bitext cosine cutoff");
  app.add_option("--alignment-cutoff", o.alignment_cutoff, "lexicon probability cutoff");
  app.add_option("--out", o.out, "output directory");

  std::vector<std::pair<CLI::App*, pipeline::Stage>> stage_commands;
  for (auto stage : pipeline::all_stages()) {
    stage_commands.emplace_back(app.add_subcommand(pipeline::to_string(stage), "run the " + pipeline::to_string(stage) + " stage"), stage);
  }

  std::vector<std::string> run_stages;
  auto* run = app.add_subcommand("run", "run all stages, or the ones given with --stage");
  run->add_option("--stage", run_stages, "stage to run (repeatable)");

  std::string store_dir = "annotation-store";
  std::string host = "127.0.0.1";
  int port = 8080;
  std::string token;
  std::vector<std::string> task_files;
  auto* serve_ann = app.add_subcommand("serve-annotation", "serve the annotation HTTP API");
  serve_ann->add_option("--dir", store_dir, "task and label directory");
  serve_ann->add_option("--host", host);
  serve_ann->add_option("--port", port);
  serve_ann->add_option("--token", token, "shared token (default: $DBLEX_ANNOTATION_TOKEN)");
  serve_ann->add_option("--task", task_files, "task JSON written by sample-annotation (repeatable)");

  std::string embed_spec = "mock";
  int embed_port = 8090;
  auto* serve_emb = app.add_subcommand("serve-embedder", "serve a mock embedder over the /embed contract");
  serve_emb->add_option("--spec", embed_spec, "mock[:dim[:seed]]");
  serve_emb->add_option("--host", host);
  serve_emb->add_option("--port", embed_port);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    for (const auto& [cmd, stage] : stage_commands) {
      if (cmd->parsed()) {
        pipeline::run_stage(stage, effective_config(o));
        return 0;
      }
    }
    if (run->parsed()) {
      const auto config = effective_config(o);
      if (run_stages.empty()) {
        pipeline::run_all(config);
      } else {
        for (const auto& s : run_stages) pipeline::parse_stage(s);
        for (const auto& s : run_stages) pipeline::run_stage(pipeline::parse_stage(s), config);
      }
      return 0;
    }
    if (serve_ann->parsed()) {
      if (token.empty()) {
        if (const char* t = std::getenv("DBLEX_ANNOTATION_TOKEN")) token = t;
      }
      auto store = std::make_shared<dblex::annotation::AnnotationStore>(store_dir);
      for (const auto& f : task_files) load_task_file(*store, f);
      dblex::annotation::AnnotationServer server(store, token);
      g_stop = [&server] { server.stop(); };
      std::signal(SIGINT, on_signal);
      std::signal(SIGTERM, on_signal);
      std::cerr << "annotation service on " << host << ":" << port << '\n';
      server.listen(host, port);
      return 0;
    }
    if (serve_emb->parsed()) {
      dblex::embeddings::EmbeddingService service(pipeline::make_embedder(embed_spec));
      g_stop = [&service] { service.stop(); };
      std::signal(SIGINT, on_signal);
      std::signal(SIGTERM, on_signal);
      std::cerr << "embedder " << embed_spec << " on " << host << ":" << embed_port << '\n';
      service.listen(host, embed_port);
      return 0;
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_code(e.code());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 4;
  }
  return 0;
}
