// Acceptance checks: one PASS/FAIL line per criterion. Exit status is the
// number of failed criteria (0 when everything passes).

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>
#include <string>
#include <unistd.h>

#include "claimagg/claimagg.hpp"
#include "oracles.hpp"

using namespace claimagg;

namespace {

// Pinned tolerances.
constexpr double kRougeF1Tol = 1e-12;
constexpr double kRougeSeconds = 5.0;
constexpr double kModularityOptimumTol = 1e-9;
constexpr double kModularityAboveTol = 1e-12;
constexpr double kSingleCommunityTol = 1e-12;
constexpr int kLeidenOptimalRequired = 95;
constexpr double kLeidenSeconds = 60.0;
constexpr double kSilhouetteTol = 1e-9;
constexpr double kPageRankTol = 1e-8;
constexpr double kMciZeroTol = 1e-12;
constexpr double kMinAri = 0.9;
constexpr std::size_t kMaxSummaries = 25;
constexpr double kMaxReductionRatio = 0.05;
constexpr double kPipelineSeconds = 120.0;
constexpr double kSummaryGraphEpsilon = 0.75;
constexpr double kMinSingletonFraction = 0.9;

int failures = 0;

void report(const std::string& name, bool ok, const std::string& detail) {
  std::printf("%s  %-34s %s\n", ok ? "PASS" : "FAIL", name.c_str(), detail.c_str());
  std::fflush(stdout);
  if (!ok) ++failures;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(const char* f, auto... args) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

// ---------------------------------------------------------------------------

void rouge_vs_brute_force() {
  const auto t0 = std::chrono::steady_clock::now();
  Rng rng(2024);
  static const std::vector<std::string> words = {"vaccine", "mask", "cause", "the", "a", "5g"};
  int mismatches = 0;
  for (int pair = 0; pair < 50; ++pair) {
    auto draw = [&] {
      std::vector<std::string> t(rng.below(13));
      for (auto& w : t) w = words[rng.below(1 + rng.below(words.size()))];
      return t;
    };
    const auto c = draw(), r = draw();
    auto check = [&](std::size_t m, std::size_t cand, std::size_t ref, const RougeScore& s) {
      const double f1 = cand + ref > 0 && m > 0 ? 2.0 * static_cast<double>(m) / static_cast<double>(cand + ref) : 0.0;
      if (s.matches != m || s.candidate_total != cand || s.reference_total != ref || std::abs(s.f1 - f1) > kRougeF1Tol)
        ++mismatches;
    };
    for (std::size_t n : {1u, 2u}) {
      const std::size_t cand = c.size() >= n ? c.size() - n + 1 : 0;
      const std::size_t ref = r.size() >= n ? r.size() - n + 1 : 0;
      const auto s = rouge_n(c, r, static_cast<int>(n));
      if (ref == 0) {
        if (!s.degenerate || s.f1 != 0.0) ++mismatches;
        continue;
      }
      check(oracle::ngram_matches(c, r, n), cand, ref, s);
    }
    const auto l = rouge_l(c, r);
    if (r.empty()) {
      if (!l.degenerate || l.f1 != 0.0) ++mismatches;
    } else {
      check(oracle::lcs_brute(c, r), c.size(), r.size(), l);
    }
  }
  const double secs = seconds_since(t0);
  report("rouge-brute-force", mismatches == 0 && secs < kRougeSeconds,
         fmt("50 pairs, %d mismatches (counts exact, f1 tol %.0e), %.3fs < %.0fs", mismatches, kRougeF1Tol, secs,
             kRougeSeconds));
}

// Random connected weighted graph: a random spanning tree plus extra edges.
WeightedGraph random_connected_graph(Rng& rng, std::size_t n) {
  std::set<std::pair<std::size_t, std::size_t>> seen;
  std::vector<Edge> edges;
  auto add = [&](std::size_t u, std::size_t v) {
    if (u == v) return;
    if (u > v) std::swap(u, v);
    if (!seen.insert({u, v}).second) return;
    edges.push_back({u, v, 0.05 + 0.95 * rng.unit()});
  };
  for (std::size_t i = 1; i < n; ++i) add(i, rng.below(i));
  const std::size_t extra = rng.below(n * (n - 1) / 2);
  for (std::size_t k = 0; k < extra; ++k) add(rng.below(n), rng.below(n));
  return WeightedGraph(n, edges);
}

void leiden_vs_optimum() {
  const auto t0 = std::chrono::steady_clock::now();
  Rng rng(31337);
  int above = 0, optimal = 0, single_bad = 0;
  double worst_gap = 0.0, worst_single = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 2 + rng.below(7);
    const auto g = random_connected_graph(rng, n);
    oracle::Matrix adj(n, std::vector<double>(n, 0.0));
    for (const auto& e : g.edges()) adj[e.u][e.v] = adj[e.v][e.u] = e.weight;
    const double best = oracle::best_modularity(adj);

    ClusterConfig cfg;
    cfg.seed = static_cast<std::uint64_t>(trial);
    const auto c = leiden(g, cfg);
    const double q = modularity(g, c);
    if (q > best + kModularityAboveTol) ++above;
    if (std::abs(q - best) <= kModularityOptimumTol) ++optimal;
    worst_gap = std::max(worst_gap, best - q);

    const std::vector<std::size_t> one(n, 0);
    const double q1 = modularity(g, Clustering::from_labels(one, ClusterMethod::External));
    worst_single = std::max(worst_single, std::abs(q1));
    if (std::abs(q1) > kSingleCommunityTol) ++single_bad;
  }
  const double secs = seconds_since(t0);
  report("leiden-never-above-optimum", above == 0, fmt("%d of 100 graphs above the brute-force optimum", above));
  report("leiden-reaches-optimum", optimal >= kLeidenOptimalRequired,
         fmt("%d of 100 optimal (need >= %d), worst gap %.3g", optimal, kLeidenOptimalRequired, worst_gap));
  report("modularity-one-community", single_bad == 0,
         fmt("max |Q| of one-community partition %.3g (tol %.0e)", worst_single, kSingleCommunityTol));
  report("leiden-time", secs < kLeidenSeconds, fmt("%.3fs < %.0fs", secs, kLeidenSeconds));
}

void silhouette_vs_formula() {
  Rng rng(99);
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 3 + rng.below(28);
    const std::size_t k = 2 + rng.below(n - 2);
    std::vector<std::size_t> labels(n);
    for (std::size_t i = 0; i < k; ++i) labels[i] = i;
    for (std::size_t i = k; i < n; ++i) labels[i] = rng.below(k);
    std::vector<std::array<double, 3>> pts(n);
    for (auto& p : pts)
      for (auto& x : p) x = rng.normal();
    oracle::Matrix d(n, std::vector<double>(n, 0.0));
    DissimilarityMatrix dm(n);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) {
        double s = 0.0;
        for (int a = 0; a < 3; ++a) s += (pts[i][a] - pts[j][a]) * (pts[i][a] - pts[j][a]);
        d[i][j] = std::sqrt(s);
        dm(i, j) = d[i][j];
      }
    const double got = silhouette(dm, Clustering::from_labels(labels, ClusterMethod::External));
    worst = std::max(worst, std::abs(got - oracle::silhouette(d, labels)));
  }
  report("silhouette-formula", worst <= kSilhouetteTol,
         fmt("100 instances n <= 30, max error %.3g (tol %.0e)", worst, kSilhouetteTol));
}

void centrality_anchors() {
  const WeightedGraph triangle(3, {{0, 1, 1.0}, {1, 2, 1.0}, {0, 2, 1.0}});
  const auto pr = pagerank(triangle).scores;
  double pr_err = 0.0;
  for (double x : pr) pr_err = std::max(pr_err, std::abs(x - 1.0 / 3.0));
  report("pagerank-triangle", pr_err <= kPageRankTol, fmt("max |PR - 1/3| %.3g (tol %.0e)", pr_err, kPageRankTol));

  const WeightedGraph path(4, {{0, 1, 1.0}, {1, 2, 1.0}, {2, 3, 1.0}});
  const auto bc = betweenness(path).scores;
  report("betweenness-path", bc == std::vector<double>{0, 2, 2, 0},
         fmt("(%g, %g, %g, %g) expected (0, 2, 2, 0)", bc[0], bc[1], bc[2], bc[3]));

  const WeightedGraph star(4, {{0, 1, 1.0}, {0, 2, 1.0}, {0, 3, 1.0}});
  const auto dg = degree_centrality(star).scores;
  report("degree-star", dg == std::vector<double>{3, 1, 1, 1},
         fmt("(%g, %g, %g, %g) expected (3, 1, 1, 1)", dg[0], dg[1], dg[2], dg[3]));

  // Every signal constant: a 5-cycle with equal engagement.
  const WeightedGraph cycle(5, {{0, 1, 0.9}, {1, 2, 0.9}, {2, 3, 0.9}, {3, 4, 0.9}, {0, 4, 0.9}});
  const EngagementVector eng{{7, 7, 7, 7, 7}, {3, 3, 3, 3, 3}};
  double mci_max = 0.0;
  for (double x : mci(cycle, eng).scores) mci_max = std::max(mci_max, std::abs(x));
  report("mci-constant-signals", mci_max <= kMciZeroTol, fmt("max |MCI| %.3g (tol %.0e)", mci_max, kMciZeroTol));
}

// Synthetic end-to-end run, both clusterers, plus determinism and the summary graph.
void synthetic_pipeline() {
  const fs::path root = fs::temp_directory_path() / ("claimagg-acceptance-" + std::to_string(::getpid()));
  fs::remove_all(root);
  SyntheticSpec spec;  // 20 groups x 30 posts
  const auto synth = generate_synthetic(spec);
  write_synthetic(synth, root / "in");
  std::map<std::string, std::size_t> planted;
  for (std::size_t i = 0; i < synth.posts.size(); ++i) planted[synth.posts[i].id] = synth.planted[i];

  for (const char* method : {"agglomerative", "leiden"}) {
    RunConfig cfg;
    cfg.corpus = (root / "in" / "corpus.jsonl").string();
    cfg.embeddings = (root / "in" / "embeddings.bin").string();
    cfg.references = (root / "in" / "references.jsonl").string();
    cfg.cluster_method = method;
    cfg.delta = 0.85;
    cfg.summary_graph_epsilon = kSummaryGraphEpsilon;
    cfg.seed = 5;
    cfg.threads = 4;
    const auto out = root / method;
    const auto t0 = std::chrono::steady_clock::now();
    RunManifest m;
    try {
      m = run_pipeline(cfg, out);
    } catch (const std::exception& e) {
      report(std::string("pipeline-") + method, false, e.what());
      continue;
    }
    const double secs = seconds_since(t0);

    const auto posts = load_clean_corpus(out / artifact::kCorpus);
    std::vector<std::string> ids;
    for (const auto& p : posts) ids.push_back(p.id());
    const auto c = load_clustering(out / artifact::kClusters, ids, ClusterMethod::External);
    std::vector<std::size_t> truth;
    for (const auto& id : ids) truth.push_back(planted.at(id));
    const double ari = oracle::adjusted_rand_index(c.labels, truth);
    report(std::string("ari-") + method, ari >= kMinAri && posts.size() == 600,
           fmt("ARI %.4f >= %.2f over %zu posts, k = %zu", ari, kMinAri, posts.size(), c.k));

    const auto summaries = load_summaries(out / artifact::kSummaries);
    std::map<SummaryMethod, std::size_t> per_method;
    for (const auto& s : summaries) ++per_method[s.method];
    std::size_t most = 0;
    for (const auto& [mm, n] : per_method) most = std::max(most, n);
    const double ratio = m.stats.at("reduction_ratio").get<double>();
    report(std::string("reduction-") + method, most <= kMaxSummaries && ratio <= kMaxReductionRatio,
           fmt("%zu summaries per method <= %zu, reduction ratio %.4f <= %.2f", most, kMaxSummaries, ratio,
               kMaxReductionRatio));

    // Majority planted group per cluster; every extractive source must sit in it.
    std::vector<std::map<std::size_t, std::size_t>> votes(c.k);
    for (std::size_t i = 0; i < ids.size(); ++i) ++votes[c.labels[i]][truth[i]];
    std::size_t checked = 0, misplaced = 0;
    for (const auto& s : summaries) {
      if (!is_extractive(s.method)) continue;
      ++checked;
      const auto& v = votes[s.cluster_id];
      const auto major = std::max_element(v.begin(), v.end(), [](auto& a, auto& b) { return a.second < b.second; })->first;
      if (planted.at(*s.source_post_id) != major) ++misplaced;
    }
    report(std::string("extractive-in-group-") + method, misplaced == 0 && checked > 0,
           fmt("%zu of %zu extractive sources outside their planted group", misplaced, checked));

    const auto sg = jsonl::read_json(out / artifact::kSummaryGraph);
    double worst_fraction = 1.0;
    for (const auto& [name, r] : sg.at("methods").items()) {
      const double total = r.at("community_count").get<double>();
      const double multi = r.at("multi_member_communities").get<double>();
      worst_fraction = std::min(worst_fraction, total > 0 ? (total - multi) / total : 0.0);
    }
    report(std::string("summary-graph-") + method, worst_fraction >= kMinSingletonFraction,
           fmt("singleton fraction %.3f >= %.2f at eps %.2f", worst_fraction, kMinSingletonFraction,
               kSummaryGraphEpsilon));
    report(std::string("pipeline-time-") + method, secs < kPipelineSeconds, fmt("%.2fs < %.0fs", secs, kPipelineSeconds));

    if (std::string(method) == "leiden") {
      const auto again = root / "leiden-again";
      run_pipeline(cfg, again);
      std::size_t differing = 0, compared = 0;
      for (const auto& name : artifact::all()) {
        ++compared;
        if (fs::exists(out / name) != fs::exists(again / name) || slurp(out / name) != slurp(again / name)) ++differing;
      }
      const bool manifest_same = slurp(out / artifact::kManifest) == slurp(again / artifact::kManifest);
      const auto rep = replay(out / artifact::kManifest, root / "replay");
      report("determinism", differing == 0 && manifest_same && rep.identical(),
             fmt("%zu of %zu artifacts differ, manifests %s, replay %s", differing, compared,
                 manifest_same ? "identical" : "differ", rep.identical() ? "identical" : "differs"));
    }
  }
  fs::remove_all(root);
}

}  // namespace

int main() {
  rouge_vs_brute_force();
  leiden_vs_optimum();
  silhouette_vs_formula();
  centrality_anchors();
  synthetic_pipeline();
  std::printf("%s: %d failed\n", failures == 0 ? "ALL PASS" : "FAILURES", failures);
  return failures;
}
