#pragma once

// Node centralities on a cluster's epsilon-graph and the Multi-Centrality
// Index (equal-weight sum of z-scored degree, PageRank, betweenness, reposts
// and likes).

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "claimagg/error.hpp"
#include "claimagg/jsonl.hpp"
#include "claimagg/simgraph.hpp"

namespace claimagg {

enum class CentralityMeasure { Degree, PageRank, Betweenness, MCI };

inline std::string to_string(CentralityMeasure m) {
  switch (m) {
    case CentralityMeasure::Degree: return "degree";
    case CentralityMeasure::PageRank: return "pagerank";
    case CentralityMeasure::Betweenness: return "betweenness";
    case CentralityMeasure::MCI: return "mci";
  }
  return "mci";
}

struct CentralityScores {
  CentralityMeasure measure;
  std::vector<double> scores;
};

struct EngagementVector {
  std::vector<std::int64_t> reposts;
  std::vector<std::int64_t> likes;
};

/// Unweighted incident-edge count, or summed edge weight when `weighted`.
inline CentralityScores degree_centrality(const WeightedGraph& g, bool weighted = false) {
  CentralityScores out{CentralityMeasure::Degree, std::vector<double>(g.node_count())};
  for (std::size_t i = 0; i < g.node_count(); ++i)
    out.scores[i] = weighted ? g.strength(i) : static_cast<double>(g.degree(i));
  return out;
}

struct PageRankOptions {
  double damping = 0.85;
  double tolerance = 1e-9;
  std::size_t max_iterations = 1000;
};

/// Power iteration on the weight-normalized random walk; dangling mass is
/// spread uniformly. Stops when the L1 change drops below the tolerance.
inline CentralityScores pagerank(const WeightedGraph& g, const PageRankOptions& opt = {}) {
  if (!(opt.damping > 0.0 && opt.damping < 1.0)) throw ValidationError("pagerank: damping must lie in (0, 1)");
  const std::size_t n = g.node_count();
  CentralityScores out{CentralityMeasure::PageRank, {}};
  if (n == 0) return out;
  std::vector<double> strength(n);
  for (std::size_t i = 0; i < n; ++i) strength[i] = g.strength(i);
  const double uniform = 1.0 / static_cast<double>(n);
  std::vector<double> x(n, uniform), next(n);
  for (std::size_t iter = 0; iter < opt.max_iterations; ++iter) {
    double dangling = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      if (strength[i] == 0.0) dangling += x[i];
    const double base = (1.0 - opt.damping) * uniform + opt.damping * dangling * uniform;
    std::fill(next.begin(), next.end(), base);
    for (std::size_t i = 0; i < n; ++i) {
      if (strength[i] == 0.0) continue;
      const double share = opt.damping * x[i] / strength[i];
      for (const auto& nb : g.neighbors(i)) next[nb.node] += share * nb.weight;
    }
    double total = 0.0;
    for (double v : next) total += v;
    double change = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      next[i] /= total;
      change += std::abs(next[i] - x[i]);
    }
    x.swap(next);
    if (change < opt.tolerance) {
      out.scores = std::move(x);
      return out;
    }
  }
  throw ConvergenceError("pagerank did not converge in " + std::to_string(opt.max_iterations) + " iterations",
                         std::move(x));
}

/// Brandes betweenness over unweighted shortest paths; each unordered pair counted once.
inline CentralityScores betweenness(const WeightedGraph& g) {
  const std::size_t n = g.node_count();
  std::vector<double> cb(n, 0.0);
  std::vector<std::size_t> stack;
  std::vector<std::vector<std::size_t>> preds(n);
  std::vector<double> sigma(n), delta(n);
  std::vector<long long> dist(n);
  for (std::size_t s = 0; s < n; ++s) {
    stack.clear();
    for (std::size_t i = 0; i < n; ++i) {
      preds[i].clear();
      sigma[i] = 0.0;
      delta[i] = 0.0;
      dist[i] = -1;
    }
    sigma[s] = 1.0;
    dist[s] = 0;
    std::deque<std::size_t> queue{s};
    while (!queue.empty()) {
      const auto v = queue.front();
      queue.pop_front();
      stack.push_back(v);
      for (const auto& nb : g.neighbors(v)) {
        const auto w = nb.node;
        if (dist[w] < 0) {
          dist[w] = dist[v] + 1;
          queue.push_back(w);
        }
        if (dist[w] == dist[v] + 1) {
          sigma[w] += sigma[v];
          preds[w].push_back(v);
        }
      }
    }
    while (!stack.empty()) {
      const auto w = stack.back();
      stack.pop_back();
      for (auto v : preds[w]) delta[v] += sigma[v] / sigma[w] * (1.0 + delta[w]);
      if (w != s) cb[w] += delta[w];
    }
  }
  for (auto& v : cb) v /= 2.0;
  return {CentralityMeasure::Betweenness, std::move(cb)};
}

/// Population z-scores; a signal with (numerically) zero spread maps to all zeros.
inline std::vector<double> z_scores(std::span<const double> x) {
  const std::size_t n = x.size();
  std::vector<double> z(n, 0.0);
  if (n < 2) return z;
  double mean = 0.0, scale = 0.0;
  for (double v : x) {
    mean += v;
    scale = std::max(scale, std::abs(v));
  }
  mean /= static_cast<double>(n);
  double var = 0.0;
  for (double v : x) var += (v - mean) * (v - mean);
  var /= static_cast<double>(n);
  const double sd = std::sqrt(var);
  if (sd <= 1e-12 * std::max(scale, 1e-300)) return z;
  for (std::size_t i = 0; i < n; ++i) z[i] = (x[i] - mean) / sd;
  return z;
}

inline CentralityScores mci(const WeightedGraph& g, const EngagementVector& eng, const PageRankOptions& opt = {}) {
  const std::size_t n = g.node_count();
  if (eng.reposts.size() != n || eng.likes.size() != n)
    throw ValidationError("mci: engagement must be given for every node");
  for (std::size_t i = 0; i < n; ++i)
    if (eng.reposts[i] < 0 || eng.likes[i] < 0) throw ValidationError("mci: negative engagement count");
  CentralityScores out{CentralityMeasure::MCI, std::vector<double>(n, 0.0)};
  if (n < 2) return out;
  std::vector<double> reposts(eng.reposts.begin(), eng.reposts.end());
  std::vector<double> likes(eng.likes.begin(), eng.likes.end());
  const std::vector<std::vector<double>> signals = {
      degree_centrality(g).scores, pagerank(g, opt).scores, betweenness(g).scores, reposts, likes};
  for (const auto& signal : signals) {
    const auto z = z_scores(signal);
    for (std::size_t i = 0; i < n; ++i) out.scores[i] += z[i];
  }
  return out;
}

/// Index of the largest score; ties go to the smallest label (string order).
inline std::size_t argmax_by_label(std::span<const double> scores, std::span<const std::string> labels) {
  if (scores.empty()) throw ValidationError("argmax of empty score vector");
  std::size_t best = 0;
  for (std::size_t i = 1; i < scores.size(); ++i)
    if (scores[i] > scores[best] || (scores[i] == scores[best] && labels[i] < labels[best])) best = i;
  return best;
}

/// Scores export: JSONL {post_id, measure, score}.
inline void save_scores(const CentralityScores& c, std::span<const std::string> ids, const std::filesystem::path& path) {
  std::vector<json> rows;
  for (std::size_t i = 0; i < c.scores.size(); ++i)
    rows.push_back({{"post_id", ids[i]}, {"measure", to_string(c.measure)}, {"score", c.scores[i]}});
  jsonl::write(path, rows);
}

}  // namespace claimagg
