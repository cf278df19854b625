// claimagg command-line tool.
//
// Exit codes: 0 success, 2 configuration error, 3 stage failure,
// 4 model endpoint failure.

#include <atomic>
#include <chrono>
#include <csignal>
#include <iostream>
#include <thread>

#include <CLI11.hpp>

#include "claimagg/claimagg.hpp"

using namespace claimagg;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitStage = 3;
constexpr int kExitEndpoint = 4;

std::atomic<bool> g_stop{false};

void on_signal(int) { g_stop = true; }

void wait_for_signal() {
  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
  while (!g_stop) std::this_thread::sleep_for(std::chrono::milliseconds(100));
}

int exit_code(FailureKind k) {
  switch (k) {
    case FailureKind::Config: return kExitConfig;
    case FailureKind::Endpoint: return kExitEndpoint;
    case FailureKind::Stage: return kExitStage;
  }
  return kExitStage;
}

// Options shared by every pipeline subcommand.
struct ConfigArgs {
  std::string config_file;
  std::vector<std::string> sets;
  std::string corpus, embeddings, references, method;
  std::optional<std::uint64_t> seed;
  std::optional<double> delta;

  void add_to(CLI::App* app) {
    app->add_option("-c,--config", config_file, "INI config file")->check(CLI::ExistingFile);
    app->add_option("--set", sets, "Override one key, section.key=value (repeatable)");
    app->add_option("--corpus", corpus, "Posts JSONL (paths.corpus)");
    app->add_option("--embeddings", embeddings, "Embedding file (paths.embeddings)");
    app->add_option("--references", references, "References JSONL (paths.references)");
    app->add_option("--method", method, "agglomerative or leiden (clustering.method)");
    app->add_option("--seed", seed, "Root seed (run.seed)");
    app->add_option("--delta", delta, "Similarity threshold (clustering.delta)");
  }

  // Precedence: base < config file < environment < flags and --set.
  RunConfig resolve(RunConfig base) const {
    if (!config_file.empty()) base.merge_ini(config_file);
    base.apply_env();
    if (!corpus.empty()) base.corpus = corpus;
    if (!embeddings.empty()) base.embeddings = embeddings;
    if (!references.empty()) base.references = references;
    if (!method.empty()) base.cluster_method = method;
    if (seed) base.seed = *seed;
    if (delta) base.delta = *delta;
    for (const auto& kv : sets) {
      const auto eq = kv.find('=');
      if (eq == std::string::npos || eq == 0) throw ConfigError("--set expects section.key=value, got '" + kv + "'");
      base.set(kv.substr(0, eq), kv.substr(eq + 1));
    }
    return base;
  }
};

void print_stats(const RunManifest& m, std::ostream& out) {
  const auto& s = m.stats;
  auto get = [&](const char* k) { return s.contains(k) ? s[k].dump() : std::string("-"); };
  out << "status " << m.status << ": posts_in " << get("posts_in") << ", posts_clean " << get("posts_clean")
      << ", clusters " << get("clusters") << ", summaries " << get("summaries") << ", reduction_ratio "
      << get("reduction_ratio") << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Claim clustering and summarization for social-media posts"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "claimagg 0.1.0");

  ConfigArgs run_args;
  std::string run_out;
  auto* run_cmd = app.add_subcommand("run", "Run every stage into an output directory");
  run_args.add_to(run_cmd);
  run_cmd->add_option("-o,--out", run_out, "Run directory")->required();

  struct Staged {
    Stage stage;
    ConfigArgs args;
    std::string dir;
    CLI::App* cmd = nullptr;
  };
  std::vector<std::unique_ptr<Staged>> staged;
  const std::pair<Stage, const char*> stage_cmds[] = {
      {Stage::Ingest, "Clean the corpus and attach embeddings"},
      {Stage::Cluster, "Build the similarity graph and cluster"},
      {Stage::Summarize, "Summarize every cluster with each configured method"},
      {Stage::Evaluate, "Score summaries against references with ROUGE"},
      {Stage::SummaryGraph, "Community structure among the summaries"}};
  for (const auto& [stage, help] : stage_cmds) {
    auto s = std::make_unique<Staged>();
    s->stage = stage;
    s->cmd = app.add_subcommand(to_string(stage), help);
    s->args.add_to(s->cmd);
    s->cmd->add_option("-d,--run-dir", s->dir, "Run directory")->required();
    staged.push_back(std::move(s));
  }

  std::string serve_dir, serve_ratings, serve_refs, serve_host = "127.0.0.1";
  int serve_port = 8080;
  std::optional<std::size_t> session_size;
  std::uint64_t session_seed = 0;
  auto* serve_cmd = app.add_subcommand("serve", "Serve the review API over a run directory");
  serve_cmd->add_option("-d,--run-dir", serve_dir, "Run directory")->required();
  serve_cmd->add_option("--ratings", serve_ratings, "Ratings log (default <run-dir>/ratings.jsonl)");
  serve_cmd->add_option("--references", serve_refs, "References JSONL for Reference cards");
  serve_cmd->add_option("--host", serve_host, "Bind address");
  serve_cmd->add_option("--port", serve_port, "Bind port")->check(CLI::Range(1, 65535));
  serve_cmd->add_option("--session-size", session_size, "Clusters sampled for rating (default all)");
  serve_cmd->add_option("--session-seed", session_seed, "Sampling and blinding seed");

  std::string replay_manifest, replay_out;
  auto* replay_cmd = app.add_subcommand("replay", "Rerun a manifest and compare artifact checksums");
  replay_cmd->add_option("manifest", replay_manifest, "manifest.json of the original run")->required()->check(CLI::ExistingFile);
  replay_cmd->add_option("-o,--out", replay_out, "Run directory for the replay")->required();

  SyntheticSpec synth;
  std::string synth_out;
  auto* synth_cmd = app.add_subcommand("synth", "Write a planted-group synthetic corpus");
  synth_cmd->add_option("-o,--out", synth_out, "Output directory")->required();
  synth_cmd->add_option("--groups", synth.groups);
  synth_cmd->add_option("--per-group", synth.per_group);
  synth_cmd->add_option("--dim", synth.dim);
  synth_cmd->add_option("--noise", synth.noise);
  synth_cmd->add_option("--seed", synth.seed);

  StubSidecarOptions stub_opt;
  std::string stub_host = "127.0.0.1";
  int stub_port = 8765;
  auto* stub_cmd = app.add_subcommand("stub-sidecar", "Run the deterministic stand-in model service");
  stub_cmd->add_option("--host", stub_host);
  stub_cmd->add_option("--port", stub_port)->check(CLI::Range(0, 65535));
  stub_cmd->add_option("--dim", stub_opt.dim);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitConfig;
  }

  try {
    if (run_cmd->parsed()) {
      const auto cfg = run_args.resolve(RunConfig{});
      const auto m = run_pipeline(cfg, run_out);
      print_stats(m, std::cout);
      return kExitOk;
    }
    for (const auto& s : staged) {
      if (!s->cmd->parsed()) continue;
      RunConfig base;
      const auto manifest = fs::path(s->dir) / artifact::kManifest;
      if (s->stage != Stage::Ingest || fs::exists(manifest)) {
        if (!fs::exists(manifest))
          throw ConfigError(s->dir + " has no " + artifact::kManifest + " (run ingest first)");
        base = RunManifest::load(manifest).config;
      }
      const auto cfg = s->args.resolve(base);
      const StageRequest req[] = {{s->stage, true}};
      const auto m = run_stages(cfg, s->dir, req, false);
      print_stats(m, std::cout);
      return kExitOk;
    }
    if (serve_cmd->parsed()) {
      ReviewOptions opt;
      opt.session_size = session_size;
      opt.session_seed = session_seed;
      const auto ratings = serve_ratings.empty() ? fs::path(serve_dir) / "ratings.jsonl" : fs::path(serve_ratings);
      ReviewService svc(load_review_data(serve_dir, serve_refs), ratings, opt);
      ReviewServer server(svc);
      server.start(serve_host, serve_port);
      std::cout << "review service on " << server.url() << " (" << svc.session().cluster_ids.size()
                << " clusters, ratings in " << ratings.string() << ")" << std::endl;
      wait_for_signal();
      server.stop();
      return kExitOk;
    }
    if (replay_cmd->parsed()) {
      const auto r = replay(replay_manifest, replay_out);
      for (const auto& d : r.differences) std::cout << "differs " << d << "\n";
      std::cout << (r.identical() ? "replay identical" : "replay differs") << "\n";
      return r.identical() ? kExitOk : kExitStage;
    }
    if (synth_cmd->parsed()) {
      write_synthetic(generate_synthetic(synth), synth_out);
      std::cout << "wrote " << synth.groups * synth.per_group << " posts in " << synth.groups << " groups to "
                << synth_out << "\n";
      return kExitOk;
    }
    if (stub_cmd->parsed()) {
      StubSidecar sidecar(stub_opt);
      sidecar.start(stub_host, stub_port);
      std::cout << "stub sidecar on " << sidecar.url() << std::endl;
      wait_for_signal();
      sidecar.stop();
      return kExitOk;
    }
  } catch (const StageError& e) {
    std::cerr << "claimagg: " << e.what() << "\n";
    return exit_code(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "claimagg: " << e.what() << "\n";
    return exit_code(classify(e));
  }
  return kExitStage;
}
