#pragma once

// Flat partitions of posts: average-linkage agglomerative clustering,
// modularity and Silhouette scoring, size ranking.

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <numeric>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "claimagg/error.hpp"
#include "claimagg/jsonl.hpp"
#include "claimagg/matrix.hpp"
#include "claimagg/simgraph.hpp"

namespace claimagg {

enum class ClusterMethod { Agglomerative, Leiden, External };

inline std::string to_string(ClusterMethod m) {
  switch (m) {
    case ClusterMethod::Agglomerative: return "agglomerative";
    case ClusterMethod::Leiden: return "leiden";
    case ClusterMethod::External: return "external";
  }
  return "external";
}

inline ClusterMethod cluster_method_from_string(const std::string& s) {
  if (s == "agglomerative") return ClusterMethod::Agglomerative;
  if (s == "leiden") return ClusterMethod::Leiden;
  if (s == "external") return ClusterMethod::External;
  throw ConfigError("unknown clustering method '" + s + "' (expected agglomerative|leiden|external)");
}

/// Partition of nodes 0..n-1 into k clusters with dense ids.
/// Ids are canonical: cluster c's smallest member precedes cluster c+1's.
struct Clustering {
  std::vector<std::size_t> labels;
  std::size_t k = 0;
  ClusterMethod method = ClusterMethod::External;

  std::size_t node_count() const noexcept { return labels.size(); }

  /// Relabels arbitrary ids into canonical dense form.
  static Clustering from_labels(std::span<const std::size_t> raw, ClusterMethod method) {
    Clustering c;
    c.method = method;
    c.labels.resize(raw.size());
    std::vector<std::size_t> remap;
    const std::size_t none = std::numeric_limits<std::size_t>::max();
    std::size_t max_raw = 0;
    for (auto r : raw) max_raw = std::max(max_raw, r);
    remap.assign(raw.empty() ? 0 : max_raw + 1, none);
    for (std::size_t i = 0; i < raw.size(); ++i) {
      if (remap[raw[i]] == none) remap[raw[i]] = c.k++;
      c.labels[i] = remap[raw[i]];
    }
    return c;
  }

  std::vector<std::vector<std::size_t>> members() const {
    std::vector<std::vector<std::size_t>> out(k);
    for (std::size_t i = 0; i < labels.size(); ++i) out[labels[i]].push_back(i);
    return out;
  }

  std::vector<std::size_t> sizes() const {
    std::vector<std::size_t> out(k, 0);
    for (auto l : labels) ++out[l];
    return out;
  }

  friend bool operator==(const Clustering&, const Clustering&) = default;
};

struct ClusterConfig {
  double delta = 0.85;
  double resolution = 1.0;
  std::uint64_t seed = 0;
  std::size_t max_leiden_iterations = 50;

  void validate() const {
    if (!(delta >= 0.0 && delta <= 1.0)) throw ConfigError("delta must lie in [0, 1]");
    if (!(resolution > 0.0)) throw ConfigError("resolution must be positive");
    if (max_leiden_iterations == 0) throw ConfigError("max_leiden_iterations must be positive");
  }
};

// ---------------------------------------------------------------------------
// Agglomerative clustering

/// One dendrogram step: clusters represented by slots `a` and `b` joined at `height`.
struct Merge {
  std::size_t a;
  std::size_t b;
  double height;
  std::size_t size;
};

/// Average-linkage dendrogram via the nearest-neighbor-chain algorithm, O(n^2).
/// Merged clusters live in the smaller slot index. Ties resolve toward the
/// chain predecessor, then the smallest slot index.
inline std::vector<Merge> average_linkage(const DissimilarityMatrix& dissimilarity) {
  const std::size_t n = dissimilarity.size();
  DissimilarityMatrix d = dissimilarity;
  std::vector<bool> active(n, true);
  std::vector<std::size_t> size(n, 1);
  std::vector<std::size_t> chain;
  std::vector<Merge> merges;
  merges.reserve(n > 0 ? n - 1 : 0);
  std::size_t remaining = n;
  std::size_t first_active = 0;

  while (remaining > 1) {
    if (chain.empty()) {
      while (!active[first_active]) ++first_active;
      chain.push_back(first_active);
    }
    const std::size_t a = chain.back();
    const std::size_t none = std::numeric_limits<std::size_t>::max();
    std::size_t prev = chain.size() >= 2 ? chain[chain.size() - 2] : none;
    std::size_t best = prev;
    double best_d = prev != none ? d(a, prev) : std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < n; ++c) {
      if (!active[c] || c == a) continue;
      if (d(a, c) < best_d) {
        best_d = d(a, c);
        best = c;
      }
    }
    if (best != prev) {
      chain.push_back(best);
      continue;
    }
    chain.pop_back();
    chain.pop_back();
    const std::size_t lo = std::min(a, best), hi = std::max(a, best);
    const double wa = static_cast<double>(size[lo]), wb = static_cast<double>(size[hi]);
    for (std::size_t k = 0; k < n; ++k) {
      if (!active[k] || k == lo || k == hi) continue;
      const double v = (wa * d(lo, k) + wb * d(hi, k)) / (wa + wb);
      d(lo, k) = v;
      d(k, lo) = v;
    }
    active[hi] = false;
    size[lo] += size[hi];
    merges.push_back({lo, hi, best_d, size[lo]});
    --remaining;
  }
  return merges;
}

/// Flat partition from the dendrogram: apply merges with height <= cutoff.
inline Clustering cut_dendrogram(std::size_t n, std::span<const Merge> merges, double cutoff,
                                 ClusterMethod method = ClusterMethod::Agglomerative) {
  std::vector<std::size_t> parent(n);
  std::iota(parent.begin(), parent.end(), 0);
  auto find = [&](std::size_t x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  };
  // A slot that took part in a rejected merge stays closed even if rounding
  // later produces a smaller height for it.
  std::vector<bool> closed(n, false);
  for (const auto& m : merges) {
    if (closed[m.a] || closed[m.b] || m.height > cutoff) {
      closed[m.a] = closed[m.b] = true;
      continue;
    }
    const auto ra = find(m.a), rb = find(m.b);
    parent[std::max(ra, rb)] = std::min(ra, rb);
  }
  std::vector<std::size_t> raw(n);
  for (std::size_t i = 0; i < n; ++i) raw[i] = find(i);
  return Clustering::from_labels(raw, method);
}

/// Average-linkage clustering on D = 1 - S, merging while the closest pair of
/// clusters has dissimilarity <= 1 - delta.
inline Clustering agglomerative(const SimMatrix& s, const ClusterConfig& cfg) {
  cfg.validate();
  const auto merges = average_linkage(dissimilarity_from_similarity(s));
  return cut_dendrogram(s.size(), merges, 1.0 - cfg.delta);
}

// ---------------------------------------------------------------------------
// Scores

/// Weighted Newman modularity with resolution:
///   Q = sum_c [ w_c / m - resolution * (s_c / 2m)^2 ].
inline double modularity(const WeightedGraph& g, const Clustering& c, double resolution = 1.0) {
  if (c.labels.size() != g.node_count()) throw ValidationError("modularity: labels do not cover the graph");
  const double m = g.total_weight();
  if (!(m > 0.0)) throw DomainError("modularity undefined for a graph with zero total edge weight");
  std::vector<double> internal(c.k, 0.0), strength(c.k, 0.0);
  for (const auto& e : g.edges()) {
    strength[c.labels[e.u]] += e.weight;
    strength[c.labels[e.v]] += e.weight;
    if (c.labels[e.u] == c.labels[e.v]) internal[c.labels[e.u]] += e.weight;
  }
  double q = 0.0;
  for (std::size_t k = 0; k < c.k; ++k) {
    const double share = strength[k] / (2.0 * m);
    q += internal[k] / m - resolution * share * share;
  }
  return q;
}

/// Mean Silhouette coefficient over all points. Singleton clusters score 0.
/// Requires 2 <= k <= n - 1.
inline double silhouette(const DissimilarityMatrix& d, const Clustering& c) {
  const std::size_t n = d.size();
  if (c.labels.size() != n) throw ValidationError("silhouette: labels do not match matrix order");
  if (c.k < 2 || c.k + 1 > n)
    throw DomainError("silhouette undefined for k = " + std::to_string(c.k) + " with n = " + std::to_string(n));
  const auto sizes = c.sizes();
  std::vector<double> sums(c.k);
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t own = c.labels[i];
    if (sizes[own] == 1) continue;
    std::fill(sums.begin(), sums.end(), 0.0);
    for (std::size_t j = 0; j < n; ++j)
      if (j != i) sums[c.labels[j]] += d(i, j);
    const double a = sums[own] / static_cast<double>(sizes[own] - 1);
    double b = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < c.k; ++k)
      if (k != own) b = std::min(b, sums[k] / static_cast<double>(sizes[k]));
    const double denom = std::max(a, b);
    if (denom > 0.0) total += (b - a) / denom;
  }
  return total / static_cast<double>(n);
}

// ---------------------------------------------------------------------------
// Ranking

struct RankedClusters {
  std::vector<std::size_t> order;  // cluster ids, largest first
};

/// Orders clusters by descending size; ties go to the cluster holding the
/// smallest member id (string order of `ids`, or node index when ids is empty).
inline RankedClusters rank_clusters(const Clustering& c, std::span<const std::string> ids = {}) {
  if (!ids.empty() && ids.size() != c.labels.size()) throw ValidationError("rank_clusters: id count mismatch");
  const auto sizes = c.sizes();
  std::vector<std::size_t> min_member(c.k, std::numeric_limits<std::size_t>::max());
  for (std::size_t i = 0; i < c.labels.size(); ++i) {
    auto& m = min_member[c.labels[i]];
    if (m == std::numeric_limits<std::size_t>::max()) {
      m = i;
    } else if (!ids.empty() && ids[i] < ids[m]) {
      m = i;
    }
  }
  RankedClusters r;
  r.order.resize(c.k);
  std::iota(r.order.begin(), r.order.end(), 0);
  std::stable_sort(r.order.begin(), r.order.end(), [&](std::size_t x, std::size_t y) {
    if (sizes[x] != sizes[y]) return sizes[x] > sizes[y];
    if (ids.empty()) return min_member[x] < min_member[y];
    return ids[min_member[x]] < ids[min_member[y]];
  });
  return r;
}

// ---------------------------------------------------------------------------
// Export: JSONL {post_id, cluster_id}

inline void save_clustering(const Clustering& c, std::span<const std::string> ids,
                            const std::filesystem::path& path) {
  if (ids.size() != c.labels.size()) throw ValidationError("save_clustering: id count mismatch");
  std::vector<json> rows;
  rows.reserve(ids.size());
  for (std::size_t i = 0; i < ids.size(); ++i) rows.push_back({{"post_id", ids[i]}, {"cluster_id", c.labels[i]}});
  jsonl::write(path, rows);
}

/// Reads a clustering aligned to `ids`; every id needs exactly one row.
inline Clustering load_clustering(const std::filesystem::path& path, std::span<const std::string> ids,
                                  ClusterMethod method) {
  std::unordered_map<std::string, std::size_t> label_of;
  jsonl::for_each(path, [&](const json& r, std::size_t line) {
    if (!label_of.emplace(r.at("post_id").get<std::string>(), r.at("cluster_id").get<std::size_t>()).second)
      throw ParseError(path.string(), line, "post listed twice");
  });
  if (label_of.size() != ids.size())
    throw ValidationError(path.string() + ": clustering covers " + std::to_string(label_of.size()) +
                          " posts, corpus has " + std::to_string(ids.size()));
  std::vector<std::size_t> raw;
  raw.reserve(ids.size());
  for (const auto& id : ids) {
    auto it = label_of.find(id);
    if (it == label_of.end()) throw NotFoundError(path.string() + ": no cluster for post " + id);
    raw.push_back(it->second);
  }
  auto c = Clustering::from_labels(raw, method);
  for (std::size_t i = 0; i < raw.size(); ++i)
    if (c.labels[i] != raw[i])
      throw ValidationError(path.string() + ": cluster ids are not canonical (dense, ordered by first member)");
  return c;
}

}  // namespace claimagg
