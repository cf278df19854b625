#pragma once

// End-to-end run orchestration: config, stages, run directory artifacts and
// the manifest that makes a run replayable.

#include <algorithm>
#include <charconv>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "claimagg/centrality.hpp"
#include "claimagg/checksum.hpp"
#include "claimagg/clustering.hpp"
#include "claimagg/corpus.hpp"
#include "claimagg/embedding.hpp"
#include "claimagg/evaluate.hpp"
#include "claimagg/http.hpp"
#include "claimagg/leiden.hpp"
#include "claimagg/random.hpp"
#include "claimagg/simgraph.hpp"
#include "claimagg/summarize.hpp"

namespace claimagg {

namespace fs = std::filesystem;

inline constexpr int kManifestSchemaVersion = 1;

/// File names inside a run directory.
namespace artifact {
inline constexpr const char* kCorpus = "corpus.jsonl";
inline constexpr const char* kEmbeddings = "embeddings.bin";
inline constexpr const char* kGraph = "graph.tsv";
inline constexpr const char* kNodes = "nodes.jsonl";
inline constexpr const char* kClusters = "clusters.jsonl";
inline constexpr const char* kClustersMeta = "clusters_meta.json";
inline constexpr const char* kSummaries = "summaries.jsonl";
inline constexpr const char* kSummariesMeta = "summaries_meta.json";
inline constexpr const char* kEvalReport = "eval_report.json";
inline constexpr const char* kSummaryGraph = "summary_graph.json";
inline constexpr const char* kManifest = "manifest.json";

inline const std::vector<std::string>& all() {
  static const std::vector<std::string> names = {kCorpus,        kEmbeddings, kGraph,          kNodes,
                                                 kClusters,      kClustersMeta, kSummaries,    kSummariesMeta,
                                                 kEvalReport,    kSummaryGraph};
  return names;
}
}  // namespace artifact

// ---------------------------------------------------------------------------
// Config

struct RunConfig {
  // [paths]
  std::string corpus;
  std::string embeddings;
  std::string references;
  // [preprocess]
  std::string relevance = "none";  // none | file | endpoint
  std::string relevance_scores;
  std::string relevance_query;
  double theta = 0.1;
  std::size_t min_words = 4;
  // [clustering]
  std::string cluster_method = "agglomerative";
  double delta = 0.85;
  std::optional<double> epsilon;
  double resolution = 1.0;
  std::size_t max_leiden_iterations = 50;
  // [summarize]
  std::vector<SummaryMethod> methods = {SummaryMethod::DG, SummaryMethod::MCI};
  double delta_dup = 0.95;
  std::size_t max_chars = 4000;
  int max_tokens = 128;
  std::size_t max_in_flight = 4;
  // [summary_graph]
  double summary_graph_epsilon = 0.75;
  // [endpoints]
  std::string embed_url;
  std::string summarize_url;
  std::string summarize_b_url;
  std::string score_url;
  // [run]
  std::uint64_t seed = 0;
  std::size_t threads = 1;

  double effective_epsilon() const { return epsilon.value_or(delta); }

  bool has_abstractive() const {
    return std::any_of(methods.begin(), methods.end(), [](SummaryMethod m) { return !is_extractive(m); });
  }

  ClusterMethod clustering_method() const {
    if (cluster_method == "agglomerative") return ClusterMethod::Agglomerative;
    if (cluster_method == "leiden") return ClusterMethod::Leiden;
    throw ConfigError("clustering.method must be agglomerative or leiden, got '" + cluster_method + "'");
  }

  /// Assigns "section.key" from its text form.
  void set(const std::string& key, const std::string& value);

  void validate() const {
    auto unit = [](double x, const char* name) {
      if (!(x >= 0.0 && x <= 1.0)) throw ConfigError(std::string(name) + " must lie in [0, 1]");
    };
    unit(theta, "preprocess.theta");
    unit(delta, "clustering.delta");
    if (epsilon) unit(*epsilon, "clustering.epsilon");
    unit(delta_dup, "summarize.delta_dup");
    unit(summary_graph_epsilon, "summary_graph.epsilon");
    if (min_words == 0) throw ConfigError("preprocess.min_words must be positive");
    if (relevance != "none" && relevance != "file" && relevance != "endpoint")
      throw ConfigError("preprocess.relevance must be none, file or endpoint");
    clustering_method();
    if (!(resolution > 0.0)) throw ConfigError("clustering.resolution must be positive");
    if (max_leiden_iterations == 0) throw ConfigError("clustering.max_leiden_iterations must be positive");
    if (methods.empty()) throw ConfigError("summarize.methods is empty");
    if (has_abstractive()) DedupConfig{delta_dup}.validate(delta);
    if (max_chars == 0 || max_tokens <= 0 || max_in_flight == 0)
      throw ConfigError("summarize.max_chars, max_tokens and max_in_flight must be positive");
    if (threads == 0) throw ConfigError("run.threads must be positive");
  }

  json to_json() const {
    json methods_json = json::array();
    for (auto m : methods) methods_json.push_back(to_string(m));
    return {{"paths", {{"corpus", corpus}, {"embeddings", embeddings}, {"references", references}}},
            {"preprocess",
             {{"relevance", relevance},
              {"relevance_scores", relevance_scores},
              {"relevance_query", relevance_query},
              {"theta", theta},
              {"min_words", min_words}}},
            {"clustering",
             {{"method", cluster_method},
              {"delta", delta},
              {"epsilon", effective_epsilon()},
              {"resolution", resolution},
              {"max_leiden_iterations", max_leiden_iterations}}},
            {"summarize",
             {{"methods", methods_json},
              {"delta_dup", delta_dup},
              {"max_chars", max_chars},
              {"max_tokens", max_tokens},
              {"max_in_flight", max_in_flight}}},
            {"summary_graph", {{"epsilon", summary_graph_epsilon}}},
            {"endpoints",
             {{"embed", embed_url}, {"summarize", summarize_url}, {"summarize_b", summarize_b_url}, {"score", score_url}}},
            {"run", {{"seed", seed}, {"threads", threads}}}};
  }

  static RunConfig from_json(const json& j) {
    RunConfig cfg;
    for (const auto& [section, body] : j.items()) {
      if (!body.is_object()) throw ConfigError("config section '" + section + "' is not an object");
      for (const auto& [key, value] : body.items()) {
        if (value.is_string()) {
          cfg.set(section + "." + key, value.get<std::string>());
        } else if (value.is_array()) {
          std::string joined;
          for (const auto& v : value) joined += (joined.empty() ? "" : ",") + v.get<std::string>();
          cfg.set(section + "." + key, joined);
        } else {
          cfg.set(section + "." + key, value.dump());
        }
      }
    }
    return cfg;
  }

  /// INI file: [section] blocks of key = value lines.
  static RunConfig from_ini(const fs::path& path) {
    RunConfig cfg;
    cfg.merge_ini(path);
    return cfg;
  }

  void merge_ini(const fs::path& path) {
    boost::property_tree::ptree tree;
    try {
      boost::property_tree::ini_parser::read_ini(path.string(), tree);
    } catch (const boost::property_tree::ini_parser_error& e) {
      throw ConfigError(e.what());
    }
    for (const auto& [section, body] : tree) {
      if (body.empty()) throw ConfigError(path.string() + ": key '" + section + "' is outside any [section]");
      for (const auto& [key, value] : body) set(section + "." + key, value.data());
    }
  }

  /// Endpoint overrides from CLAIMAGG_EMBED_URL, CLAIMAGG_SUMMARIZE_URL,
  /// CLAIMAGG_SUMMARIZE_B_URL and CLAIMAGG_SCORE_URL.
  void apply_env() {
    const std::pair<const char*, std::string*> vars[] = {{"CLAIMAGG_EMBED_URL", &embed_url},
                                                         {"CLAIMAGG_SUMMARIZE_URL", &summarize_url},
                                                         {"CLAIMAGG_SUMMARIZE_B_URL", &summarize_b_url},
                                                         {"CLAIMAGG_SCORE_URL", &score_url}};
    for (const auto& [name, target] : vars)
      if (const char* v = std::getenv(name); v && *v) *target = v;
  }
};

namespace config_detail {

template <typename T>
T parse(const std::string& key, const std::string& text) {
  T value{};
  const char* first = text.data();
  const char* last = text.data() + text.size();
  auto res = std::from_chars(first, last, value);
  if (res.ec != std::errc{} || res.ptr != last) throw ConfigError(key + ": invalid number '" + text + "'");
  return value;
}

inline std::vector<SummaryMethod> parse_methods(const std::string& text) {
  std::vector<SummaryMethod> out;
  std::size_t start = 0;
  while (start <= text.size()) {
    auto comma = text.find(',', start);
    if (comma == std::string::npos) comma = text.size();
    std::string item = text.substr(start, comma - start);
    item.erase(0, item.find_first_not_of(" \t"));
    item.erase(item.find_last_not_of(" \t") + 1);
    if (!item.empty()) {
      const auto m = summary_method_from_string(item);
      if (std::find(out.begin(), out.end(), m) == out.end()) out.push_back(m);
    }
    start = comma + 1;
  }
  return out;
}

}  // namespace config_detail

inline void RunConfig::set(const std::string& key, const std::string& value) {
  using config_detail::parse;
  using Setter = std::function<void(RunConfig&, const std::string&, const std::string&)>;
  static const std::map<std::string, Setter> setters = {
      {"paths.corpus", [](RunConfig& c, auto&, auto& v) { c.corpus = v; }},
      {"paths.embeddings", [](RunConfig& c, auto&, auto& v) { c.embeddings = v; }},
      {"paths.references", [](RunConfig& c, auto&, auto& v) { c.references = v; }},
      {"preprocess.relevance", [](RunConfig& c, auto&, auto& v) { c.relevance = v; }},
      {"preprocess.relevance_scores", [](RunConfig& c, auto&, auto& v) { c.relevance_scores = v; }},
      {"preprocess.relevance_query", [](RunConfig& c, auto&, auto& v) { c.relevance_query = v; }},
      {"preprocess.theta", [](RunConfig& c, auto& k, auto& v) { c.theta = parse<double>(k, v); }},
      {"preprocess.min_words", [](RunConfig& c, auto& k, auto& v) { c.min_words = parse<std::size_t>(k, v); }},
      {"clustering.method", [](RunConfig& c, auto&, auto& v) { c.cluster_method = v; }},
      {"clustering.delta", [](RunConfig& c, auto& k, auto& v) { c.delta = parse<double>(k, v); }},
      {"clustering.epsilon",
       [](RunConfig& c, auto& k, auto& v) {
         if (v.empty()) c.epsilon.reset();
         else c.epsilon = parse<double>(k, v);
       }},
      {"clustering.resolution", [](RunConfig& c, auto& k, auto& v) { c.resolution = parse<double>(k, v); }},
      {"clustering.max_leiden_iterations",
       [](RunConfig& c, auto& k, auto& v) { c.max_leiden_iterations = parse<std::size_t>(k, v); }},
      {"summarize.methods", [](RunConfig& c, auto&, auto& v) { c.methods = config_detail::parse_methods(v); }},
      {"summarize.delta_dup", [](RunConfig& c, auto& k, auto& v) { c.delta_dup = parse<double>(k, v); }},
      {"summarize.max_chars", [](RunConfig& c, auto& k, auto& v) { c.max_chars = parse<std::size_t>(k, v); }},
      {"summarize.max_tokens", [](RunConfig& c, auto& k, auto& v) { c.max_tokens = parse<int>(k, v); }},
      {"summarize.max_in_flight",
       [](RunConfig& c, auto& k, auto& v) { c.max_in_flight = parse<std::size_t>(k, v); }},
      {"summary_graph.epsilon",
       [](RunConfig& c, auto& k, auto& v) { c.summary_graph_epsilon = parse<double>(k, v); }},
      {"endpoints.embed", [](RunConfig& c, auto&, auto& v) { c.embed_url = v; }},
      {"endpoints.summarize", [](RunConfig& c, auto&, auto& v) { c.summarize_url = v; }},
      {"endpoints.summarize_b", [](RunConfig& c, auto&, auto& v) { c.summarize_b_url = v; }},
      {"endpoints.score", [](RunConfig& c, auto&, auto& v) { c.score_url = v; }},
      {"run.seed", [](RunConfig& c, auto& k, auto& v) { c.seed = parse<std::uint64_t>(k, v); }},
      {"run.threads", [](RunConfig& c, auto& k, auto& v) { c.threads = parse<std::size_t>(k, v); }},
  };
  auto it = setters.find(key);
  if (it == setters.end()) throw ConfigError("unknown config key '" + key + "'");
  it->second(*this, key, value);
}

// ---------------------------------------------------------------------------
// Stage errors and the manifest

enum class Stage { Ingest, Cluster, Summarize, Evaluate, SummaryGraph };

inline std::string to_string(Stage s) {
  switch (s) {
    case Stage::Ingest: return "ingest";
    case Stage::Cluster: return "cluster";
    case Stage::Summarize: return "summarize";
    case Stage::Evaluate: return "evaluate";
    case Stage::SummaryGraph: return "summary-graph";
  }
  return "ingest";
}

enum class FailureKind { Config, Endpoint, Stage };

class StageError : public Error {
 public:
  StageError(std::string stage, FailureKind kind, const std::string& cause)
      : Error("stage " + stage + " failed: " + cause), stage_(std::move(stage)), kind_(kind) {}
  const std::string& stage() const noexcept { return stage_; }
  FailureKind kind() const noexcept { return kind_; }

 private:
  std::string stage_;
  FailureKind kind_;
};

inline FailureKind classify(const std::exception& e) {
  if (dynamic_cast<const ConfigError*>(&e)) return FailureKind::Config;
  if (dynamic_cast<const EndpointError*>(&e) || dynamic_cast<const ProtocolError*>(&e)) return FailureKind::Endpoint;
  if (auto* s = dynamic_cast<const StageError*>(&e)) return s->kind();
  return FailureKind::Stage;
}

struct StageSeeds {
  std::uint64_t cluster, dedup, summary_graph;
  explicit StageSeeds(std::uint64_t root)
      : cluster(derive_seed(root, "cluster")),
        dedup(derive_seed(root, "dedup")),
        summary_graph(derive_seed(root, "summary-graph")) {}
};

struct RunManifest {
  std::string status = "complete";  // complete | partial
  std::optional<std::string> failed_stage;
  std::optional<std::string> error;
  RunConfig config;
  json stats = json::object();
  std::map<std::string, FileDigest> artifacts;

  json to_json() const {
    const StageSeeds seeds(config.seed);
    json arts = json::object();
    for (const auto& [name, d] : artifacts) arts[name] = {{"sha256", d.sha256}, {"bytes", d.bytes}};
    return {{"schema_version", kManifestSchemaVersion},
            {"status", status},
            {"failed_stage", failed_stage ? json(*failed_stage) : json(nullptr)},
            {"error", error ? json(*error) : json(nullptr)},
            {"config", config.to_json()},
            {"seeds",
             {{"root", config.seed},
              {"cluster", seeds.cluster},
              {"dedup", seeds.dedup},
              {"summary-graph", seeds.summary_graph}}},
            {"stats", stats},
            {"artifacts", arts}};
  }

  static RunManifest from_json(const json& j) {
    if (j.value("schema_version", 0) != kManifestSchemaVersion)
      throw ValidationError("manifest schema_version " + j.value("schema_version", json(nullptr)).dump() +
                            " is not supported (expected " + std::to_string(kManifestSchemaVersion) + ")");
    RunManifest m;
    m.status = j.at("status").get<std::string>();
    if (!j.at("failed_stage").is_null()) m.failed_stage = j["failed_stage"].get<std::string>();
    if (!j.at("error").is_null()) m.error = j["error"].get<std::string>();
    m.config = RunConfig::from_json(j.at("config"));
    m.stats = j.value("stats", json::object());
    for (const auto& [name, d] : j.at("artifacts").items())
      m.artifacts[name] = FileDigest{d.at("sha256").get<std::string>(), d.at("bytes").get<std::uintmax_t>()};
    return m;
  }

  static RunManifest load(const fs::path& path) {
    try {
      return from_json(jsonl::read_json(path));
    } catch (const json::exception& e) {
      throw ParseError(path.string(), 0, std::string("malformed manifest: ") + e.what());
    }
  }
};

inline void write_manifest(RunManifest& m, const fs::path& dir) {
  m.artifacts.clear();
  for (const auto& name : artifact::all())
    if (fs::exists(dir / name)) m.artifacts[name] = sha256_file(dir / name);
  jsonl::write_json(dir / artifact::kManifest, m.to_json());
}

// ---------------------------------------------------------------------------
// Stages

namespace pipeline_detail {

inline void require_file(const std::string& path, const std::string& what) {
  if (path.empty()) throw ConfigError(what + " is not configured");
  if (!fs::is_regular_file(path)) throw ConfigError(what + " not found: " + path);
}

struct RunInputs {
  std::vector<CleanPost> posts;
  std::vector<std::string> ids;
  EmbeddingMatrix embeddings;
};

inline RunInputs load_inputs(const fs::path& dir) {
  RunInputs in;
  in.posts = load_clean_corpus(dir / artifact::kCorpus);
  for (const auto& p : in.posts) in.ids.push_back(p.id());
  in.embeddings = load_embeddings(dir / artifact::kEmbeddings);
  if (in.embeddings.post_ids != in.ids)
    throw ValidationError(std::string(artifact::kEmbeddings) + " rows do not match " + artifact::kCorpus +
                          " (rerun ingest)");
  return in;
}

inline Clustering load_run_clustering(const fs::path& dir, const RunInputs& in) {
  const json meta = jsonl::read_json(dir / artifact::kClustersMeta);
  if (meta.value("schema_version", 0) != 1) throw ValidationError("unsupported clusters_meta schema_version");
  return load_clustering(dir / artifact::kClusters, in.ids, cluster_method_from_string(meta.at("method")));
}

inline std::vector<double> fetch_relevance(const RunConfig& cfg, std::span<const CleanPost> posts) {
  if (posts.empty()) return {};
  json pairs = json::array();
  for (const auto& p : posts) pairs.push_back({p.clean_text, cfg.relevance_query});
  const json reply = post_json(cfg.score_url, "/score", json{{"pairs", pairs}});
  if (!reply.contains("scores") || !reply["scores"].is_array() || reply["scores"].size() != posts.size())
    throw ProtocolError("/score returned the wrong number of scores");
  std::vector<double> out;
  for (const auto& s : reply["scores"]) {
    if (!s.is_number()) throw ProtocolError("/score returned a non-numeric score");
    out.push_back(s.get<double>());
  }
  return out;
}

}  // namespace pipeline_detail

/// Checks everything a stage needs before it starts.
inline void preflight(const RunConfig& cfg, Stage stage, bool references_required = false) {
  using pipeline_detail::require_file;
  cfg.validate();
  switch (stage) {
    case Stage::Ingest:
      require_file(cfg.corpus, "paths.corpus");
      if (cfg.embeddings.empty() && cfg.embed_url.empty())
        throw ConfigError("no embeddings file (paths.embeddings) and no embed endpoint (endpoints.embed)");
      if (!cfg.embeddings.empty()) require_file(cfg.embeddings, "paths.embeddings");
      if (!cfg.embed_url.empty()) Endpoint::parse(cfg.embed_url);
      if (cfg.relevance == "file") require_file(cfg.relevance_scores, "preprocess.relevance_scores");
      if (cfg.relevance == "endpoint") {
        if (cfg.score_url.empty()) throw ConfigError("preprocess.relevance = endpoint needs endpoints.score");
        if (cfg.relevance_query.empty()) throw ConfigError("preprocess.relevance = endpoint needs relevance_query");
        Endpoint::parse(cfg.score_url);
      }
      break;
    case Stage::Summarize:
      for (auto m : cfg.methods) {
        if (m == SummaryMethod::AbstractiveA && cfg.summarize_url.empty())
          throw ConfigError("AbstractiveA needs endpoints.summarize");
        if (m == SummaryMethod::AbstractiveB && cfg.summarize_b_url.empty())
          throw ConfigError("AbstractiveB needs endpoints.summarize_b");
      }
      if (!cfg.summarize_url.empty()) Endpoint::parse(cfg.summarize_url);
      if (!cfg.summarize_b_url.empty()) Endpoint::parse(cfg.summarize_b_url);
      break;
    case Stage::Evaluate:
      if (cfg.references.empty()) {
        if (references_required) throw ConfigError("references required: set paths.references or pass --references");
      } else {
        require_file(cfg.references, "paths.references");
      }
      break;
    case Stage::Cluster:
    case Stage::SummaryGraph: break;
  }
}

inline void stage_ingest(const RunConfig& cfg, const fs::path& dir, json& stats) {
  std::vector<std::string> warnings;
  const auto posts = load_corpus(cfg.corpus, &warnings);
  const RelevanceConfig rc{cfg.theta, cfg.min_words};
  auto clean = preprocess(posts, rc);
  const std::size_t after_length = clean.size();
  if (cfg.relevance == "file") {
    clean = filter_relevant(clean, load_relevance_scores(cfg.relevance_scores), rc);
  } else if (cfg.relevance == "endpoint") {
    const auto scores = pipeline_detail::fetch_relevance(cfg, clean);
    std::map<std::string, double> by_id;
    for (std::size_t i = 0; i < clean.size(); ++i) by_id[clean[i].id()] = scores[i];
    clean = filter_relevant(clean, by_id, rc);
  }
  save_clean_corpus(dir / artifact::kCorpus, clean);

  std::vector<std::string> ids, texts;
  for (const auto& p : clean) {
    ids.push_back(p.id());
    texts.push_back(p.clean_text);
  }
  EmbeddingMatrix e;
  if (!cfg.embeddings.empty()) {
    const auto all = load_embeddings(cfg.embeddings);
    try {
      e = all.select(ids);
    } catch (const NotFoundError& err) {
      throw ValidationError(cfg.embeddings + ": " + err.what());
    }
  } else {
    e = fetch_embeddings(texts, ids, cfg.embed_url);
  }
  save_embeddings(e, dir / artifact::kEmbeddings);

  stats["posts_in"] = posts.size();
  stats["duplicate_ids"] = warnings.size();
  stats["posts_after_length_filter"] = after_length;
  stats["posts_clean"] = clean.size();
  stats["embedding_dim"] = e.dim;
  stats["embedding_model"] = e.model_name;
}

inline void stage_cluster(const RunConfig& cfg, const fs::path& dir, json& stats) {
  const auto in = pipeline_detail::load_inputs(dir);
  const auto s = similarity_matrix(in.embeddings, cfg.threads);
  const double eps = cfg.effective_epsilon();
  const auto g = epsilon_graph(s, GraphConfig{eps}, in.ids);
  export_edgelist(g, dir / artifact::kGraph);
  export_node_labels(g, dir / artifact::kNodes);

  ClusterConfig cc;
  cc.delta = cfg.delta;
  cc.resolution = cfg.resolution;
  cc.seed = StageSeeds(cfg.seed).cluster;
  cc.max_leiden_iterations = cfg.max_leiden_iterations;
  const auto method = cfg.clustering_method();
  const Clustering c = method == ClusterMethod::Agglomerative ? agglomerative(s, cc) : leiden(g, cc);
  const auto ranking = rank_clusters(c, in.ids);
  save_clustering(c, in.ids, dir / artifact::kClusters);

  json sil = nullptr, mod = nullptr;
  if (c.k >= 2 && c.k + 1 <= c.node_count()) sil = silhouette(dissimilarity_from_similarity(s), c);
  if (g.total_weight() > 0) mod = modularity(g, c, cfg.resolution);
  const auto sizes = c.sizes();
  json ranked_sizes = json::array();
  for (auto id : ranking.order) ranked_sizes.push_back(sizes[id]);
  jsonl::write_json(dir / artifact::kClustersMeta, {{"schema_version", 1},
                                                    {"method", to_string(method)},
                                                    {"delta", cfg.delta},
                                                    {"epsilon", eps},
                                                    {"resolution", cfg.resolution},
                                                    {"seed", cc.seed},
                                                    {"n", c.node_count()},
                                                    {"k", c.k},
                                                    {"graph_edges", g.edge_count()},
                                                    {"silhouette", sil},
                                                    {"modularity", mod},
                                                    {"ranking", ranking.order},
                                                    {"ranked_sizes", ranked_sizes}});
  stats["clusters"] = c.k;
  stats["graph_edges"] = g.edge_count();
  const double posts_in = stats.value("posts_in", 0.0);
  stats["reduction_ratio"] = posts_in > 0 ? static_cast<double>(c.k) / posts_in : 0.0;
}

/// Returns the per-entry failures; the summaries that did succeed are written either way.
inline std::vector<SummaryFailure> stage_summarize(const RunConfig& cfg, const fs::path& dir, json& stats) {
  const auto in = pipeline_detail::load_inputs(dir);
  const auto c = pipeline_detail::load_run_clustering(dir, in);
  const auto ranking = rank_clusters(c, in.ids);
  const auto s = similarity_matrix(in.embeddings, cfg.threads);

  SummarizeInputs si;
  si.posts = in.posts;
  si.similarity = &s;
  si.clustering = &c;
  si.ranking = &ranking;
  si.epsilon = cfg.effective_epsilon();
  si.dedup = DedupConfig{cfg.delta_dup, StageSeeds(cfg.seed).dedup};
  si.methods = cfg.methods;
  if (!cfg.summarize_url.empty()) si.summarizers[SummaryMethod::AbstractiveA] = std::make_shared<HttpSummarizer>(cfg.summarize_url);
  if (!cfg.summarize_b_url.empty())
    si.summarizers[SummaryMethod::AbstractiveB] = std::make_shared<HttpSummarizer>(cfg.summarize_b_url);
  si.max_chars = cfg.max_chars;
  si.max_tokens = cfg.max_tokens;
  si.max_in_flight = cfg.max_in_flight;
  const auto result = summarize_all(si);
  save_summaries(result.summaries, dir / artifact::kSummaries);

  json per_method = json::object();
  std::size_t max_per_method = 0;
  for (auto m : cfg.methods) {
    std::vector<ClusterSummary> mine;
    for (const auto& x : result.summaries)
      if (x.method == m) mine.push_back(x);
    per_method[to_string(m)] = {{"summaries", mine.size()}, {"mean_word_count", mean_word_count(mine)}};
    max_per_method = std::max(max_per_method, mine.size());
  }
  json failures = json::array();
  for (const auto& f : result.failures)
    failures.push_back({{"cluster_id", f.cluster_id},
                        {"rank", f.rank},
                        {"method", to_string(f.method)},
                        {"endpoint_failure", f.endpoint_failure},
                        {"message", f.message}});
  jsonl::write_json(dir / artifact::kSummariesMeta, {{"schema_version", 1},
                                                     {"delta_dup", cfg.delta_dup},
                                                     {"dedup_seed", si.dedup.seed},
                                                     {"max_chars", cfg.max_chars},
                                                     {"max_tokens", cfg.max_tokens},
                                                     {"methods", per_method},
                                                     {"failures", failures}});
  stats["summaries"] = result.summaries.size();
  stats["summaries_per_method"] = max_per_method;
  stats["summary_failures"] = result.failures.size();
  const double posts_in = stats.value("posts_in", 0.0);
  stats["reduction_ratio"] = posts_in > 0 ? static_cast<double>(max_per_method) / posts_in : 0.0;
  return result.failures;
}

inline void stage_evaluate(const RunConfig& cfg, const fs::path& dir, json& stats) {
  const auto in = pipeline_detail::load_inputs(dir);
  const auto c = pipeline_detail::load_run_clustering(dir, in);
  const auto summaries = load_summaries(dir / artifact::kSummaries);
  const auto refs = load_references(cfg.references);
  const auto report = evaluate_run(summaries, resolve_cluster_references(c, in.posts), refs);
  jsonl::write_json(dir / artifact::kEvalReport, to_json(report));
  stats["evaluated_pairs"] = report.evaluated;
}

inline void stage_summary_graph(const RunConfig& cfg, const fs::path& dir, json& stats) {
  const auto in = pipeline_detail::load_inputs(dir);
  const auto summaries = load_summaries(dir / artifact::kSummaries);
  std::map<std::string, std::size_t> row_of_id, row_of_text;
  for (std::size_t i = 0; i < in.posts.size(); ++i) {
    row_of_id.emplace(in.ids[i], i);
    row_of_text.emplace(in.posts[i].clean_text, i);
  }
  json methods = json::object();
  std::size_t singletons = 0, communities = 0;
  for (auto m : cfg.methods) {
    std::vector<const ClusterSummary*> mine;
    for (const auto& s : summaries)
      if (s.method == m) mine.push_back(&s);
    EmbeddingMatrix e;
    e.dim = in.embeddings.dim;
    e.model_name = in.embeddings.model_name;
    auto add_row = [&](const ClusterSummary& s, std::size_t row) {
      e.post_ids.push_back("cluster-" + std::to_string(s.cluster_id));
      const auto r = in.embeddings.row(row);
      e.values.insert(e.values.end(), r.begin(), r.end());
    };
    std::string skipped;
    if (is_extractive(m)) {
      for (auto* s : mine) add_row(*s, row_of_id.at(*s->source_post_id));
    } else if (!cfg.embed_url.empty()) {
      std::vector<std::string> texts, ids;
      for (auto* s : mine) {
        texts.push_back(s->text);
        ids.push_back("cluster-" + std::to_string(s->cluster_id));
      }
      e = fetch_embeddings(texts, ids, cfg.embed_url);
    } else {
      for (auto* s : mine) {
        auto it = row_of_text.find(s->text);
        if (it == row_of_text.end()) {
          skipped = "generated text has no corpus embedding and no embed endpoint is configured";
          break;
        }
        add_row(*s, it->second);
      }
    }
    if (!skipped.empty()) {
      methods[to_string(m)] = {{"skipped", skipped}};
      continue;
    }
    const auto report = summary_graph_report(e, cfg.summary_graph_epsilon, StageSeeds(cfg.seed).summary_graph);
    methods[to_string(m)] = to_json(report);
    communities += report.community_count;
    singletons += report.community_count - report.multi_member_communities;
  }
  jsonl::write_json(dir / artifact::kSummaryGraph,
                    {{"schema_version", 1}, {"epsilon", cfg.summary_graph_epsilon}, {"methods", methods}});
  stats["summary_graph_singleton_fraction"] =
      communities ? static_cast<double>(singletons) / static_cast<double>(communities) : 0.0;
}

// ---------------------------------------------------------------------------
// Runs

struct StageRequest {
  Stage stage;
  bool required = true;  // evaluate is optional in a full run
};

/// Runs the given stages in order against `dir`, updating its manifest after
/// every stage. A fresh run clears old artifacts first; a staged run keeps
/// the existing manifest's stats.
inline RunManifest run_stages(const RunConfig& cfg, const fs::path& dir, std::span<const StageRequest> stages,
                              bool fresh) {
  for (const auto& s : stages) preflight(cfg, s.stage, s.required);
  fs::create_directories(dir);
  RunManifest m;
  if (fresh) {
    for (const auto& name : artifact::all()) fs::remove(dir / name);
    fs::remove(dir / artifact::kManifest);
  } else if (fs::exists(dir / artifact::kManifest)) {
    m = RunManifest::load(dir / artifact::kManifest);
  }
  m.config = cfg;
  m.status = "complete";
  m.failed_stage.reset();
  m.error.reset();

  std::vector<SummaryFailure> failures;
  for (const auto& req : stages) {
    const auto name = to_string(req.stage);
    try {
      switch (req.stage) {
        case Stage::Ingest: stage_ingest(cfg, dir, m.stats); break;
        case Stage::Cluster: stage_cluster(cfg, dir, m.stats); break;
        case Stage::Summarize: failures = stage_summarize(cfg, dir, m.stats); break;
        case Stage::Evaluate:
          if (!cfg.references.empty()) stage_evaluate(cfg, dir, m.stats);
          break;
        case Stage::SummaryGraph: stage_summary_graph(cfg, dir, m.stats); break;
      }
    } catch (const std::exception& e) {
      m.status = "partial";
      m.failed_stage = name;
      m.error = e.what();
      write_manifest(m, dir);
      throw StageError(name, classify(e), e.what());
    }
    write_manifest(m, dir);
  }
  if (!failures.empty()) {
    const bool endpoint = std::any_of(failures.begin(), failures.end(), [](const auto& f) { return f.endpoint_failure; });
    m.status = "partial";
    m.failed_stage = to_string(Stage::Summarize);
    m.error = std::to_string(failures.size()) + " summaries failed; first: " + failures.front().message;
    write_manifest(m, dir);
    throw StageError(*m.failed_stage, endpoint ? FailureKind::Endpoint : FailureKind::Stage, *m.error);
  }
  return m;
}

inline RunManifest run_pipeline(const RunConfig& cfg, const fs::path& dir) {
  static const StageRequest all[] = {{Stage::Ingest},
                                     {Stage::Cluster},
                                     {Stage::Summarize},
                                     {Stage::Evaluate, false},
                                     {Stage::SummaryGraph}};
  return run_stages(cfg, dir, all, true);
}

struct ReplayResult {
  RunManifest original;
  RunManifest replayed;
  std::vector<std::string> differences;
  bool identical() const { return differences.empty(); }
};

/// Reruns the manifest's config into `dir` and compares artifact checksums.
/// Relative input paths resolve against the current directory.
inline ReplayResult replay(const fs::path& manifest_path, const fs::path& dir) {
  ReplayResult r;
  r.original = RunManifest::load(manifest_path);
  r.replayed = run_pipeline(r.original.config, dir);
  std::set<std::string> names;
  for (const auto& [n, d] : r.original.artifacts) names.insert(n);
  for (const auto& [n, d] : r.replayed.artifacts) names.insert(n);
  for (const auto& n : names) {
    auto a = r.original.artifacts.find(n), b = r.replayed.artifacts.find(n);
    if (a == r.original.artifacts.end()) r.differences.push_back(n + ": only in replay");
    else if (b == r.replayed.artifacts.end()) r.differences.push_back(n + ": missing from replay");
    else if (a->second.sha256 != b->second.sha256) r.differences.push_back(n + ": checksum differs");
  }
  return r;
}

}  // namespace claimagg
