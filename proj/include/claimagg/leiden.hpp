#pragma once

// Leiden community detection maximizing weighted modularity with a
// resolution parameter. One pass = fast local moving, refinement inside each
// community, aggregation on the refined partition (seeded with the unrefined
// one), repeated until no further aggregation is possible. Passes repeat from
// the previous result until modularity stops improving.

#include <algorithm>
#include <cmath>
#include <deque>
#include <numeric>
#include <vector>

#include "claimagg/clustering.hpp"
#include "claimagg/random.hpp"
#include "claimagg/simgraph.hpp"

namespace claimagg {

namespace leiden_detail {

// Multigraph level with self-loops; strength = sum of incident weights + 2 * self loop.
struct Level {
  std::vector<std::vector<Neighbor>> adj;
  std::vector<double> self_loop;
  std::vector<double> strength;

  std::size_t size() const noexcept { return adj.size(); }

  static Level from_graph(const WeightedGraph& g) {
    Level l;
    const auto n = g.node_count();
    l.adj.resize(n);
    l.self_loop.assign(n, 0.0);
    l.strength.assign(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      auto nb = g.neighbors(i);
      l.adj[i].assign(nb.begin(), nb.end());
      l.strength[i] = g.strength(i);
    }
    return l;
  }
};

// Gains are in units of edge weight; dividing by m gives the modularity change.
constexpr double kGainTolerance = 1e-12;
// Randomness of the refinement merge choice, applied to modularity gains.
constexpr double kRefineTheta = 0.01;

class Optimizer {
 public:
  Optimizer(double resolution, double two_m, Rng& rng) : gamma_(resolution), two_m_(two_m), rng_(rng) {}

  // Greedy queue-based local moving; returns true if any node moved.
  bool move_nodes(const Level& g, std::vector<std::size_t>& comm) {
    const std::size_t n = g.size();
    std::vector<double> comm_strength(n, 0.0);
    std::vector<std::size_t> comm_size(n, 0);
    for (std::size_t v = 0; v < n; ++v) {
      comm_strength[comm[v]] += g.strength[v];
      ++comm_size[comm[v]];
    }
    std::vector<std::size_t> empty;
    for (std::size_t c = n; c-- > 0;)
      if (comm_size[c] == 0) empty.push_back(c);

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    rng_.shuffle(std::span<std::size_t>(order));
    std::deque<std::size_t> queue(order.begin(), order.end());
    std::vector<bool> queued(n, true);

    std::vector<double> link(n, 0.0);
    std::vector<bool> touched(n, false);
    std::vector<std::size_t> touched_list;
    bool changed = false;

    while (!queue.empty()) {
      const std::size_t v = queue.front();
      queue.pop_front();
      queued[v] = false;
      const std::size_t old = comm[v];
      const double kv = g.strength[v];

      touched_list.clear();
      touched[old] = true;
      touched_list.push_back(old);
      for (const auto& nb : g.adj[v]) {
        const auto c = comm[nb.node];
        if (!touched[c]) {
          touched[c] = true;
          touched_list.push_back(c);
        }
        link[c] += nb.weight;
      }

      comm_strength[old] -= kv;
      --comm_size[old];

      std::size_t best = old;
      double best_gain = link[old] - gamma_ * kv * comm_strength[old] / two_m_;
      for (auto c : touched_list) {
        if (c == old) continue;
        const double gain = link[c] - gamma_ * kv * comm_strength[c] / two_m_;
        if (gain > best_gain + kGainTolerance) {
          best_gain = gain;
          best = c;
        }
      }
      if (comm_size[old] > 0 && 0.0 > best_gain + kGainTolerance) {
        best = empty.back();
        empty.pop_back();
      }
      for (auto c : touched_list) {
        link[c] = 0.0;
        touched[c] = false;
      }

      comm[v] = best;
      comm_strength[best] += kv;
      ++comm_size[best];
      if (best != old) {
        changed = true;
        if (comm_size[old] == 0) empty.push_back(old);
        for (const auto& nb : g.adj[v])
          if (!queued[nb.node] && comm[nb.node] != best) {
            queued[nb.node] = true;
            queue.push_back(nb.node);
          }
      }
    }
    return changed;
  }

  // Refines each community of `comm` starting from singletons: only
  // well-connected singleton nodes move, only into well-connected refined
  // subsets, chosen randomly in proportion to exp(gain / theta).
  std::vector<std::size_t> refine(const Level& g, const std::vector<std::size_t>& comm) {
    const std::size_t n = g.size();
    std::vector<std::size_t> refined(n);
    std::iota(refined.begin(), refined.end(), 0);
    std::vector<double> r_strength(g.strength);
    std::vector<std::size_t> r_size(n, 1);
    std::vector<double> comm_strength(n, 0.0);
    std::vector<std::vector<std::size_t>> members(n);
    for (std::size_t v = 0; v < n; ++v) {
      comm_strength[comm[v]] += g.strength[v];
      members[comm[v]].push_back(v);
    }
    // Weight from v to the rest of its community; later, per refined subset,
    // the weight from the subset to the rest of the community.
    std::vector<double> inside(n, 0.0);
    for (std::size_t v = 0; v < n; ++v)
      for (const auto& nb : g.adj[v])
        if (comm[nb.node] == comm[v]) inside[v] += nb.weight;
    std::vector<double> external(inside);

    std::vector<double> link(n, 0.0);
    std::vector<bool> touched(n, false);
    std::vector<std::size_t> touched_list;
    std::vector<std::size_t> candidates;
    std::vector<double> gains;

    for (std::size_t s = 0; s < n; ++s) {
      auto& list = members[s];
      if (list.size() < 2) continue;
      const double ks = comm_strength[s];
      rng_.shuffle(std::span<std::size_t>(list));
      for (auto v : list) {
        if (r_size[refined[v]] != 1) continue;
        const double kv = g.strength[v];
        if (inside[v] < gamma_ * kv * (ks - kv) / two_m_) continue;

        touched_list.clear();
        for (const auto& nb : g.adj[v]) {
          if (comm[nb.node] != s) continue;
          const auto c = refined[nb.node];
          if (!touched[c]) {
            touched[c] = true;
            touched_list.push_back(c);
          }
          link[c] += nb.weight;
        }
        const std::size_t own = refined[v];
        candidates.assign(1, own);
        gains.assign(1, 0.0);
        for (auto c : touched_list) {
          if (c == own) continue;
          const bool well_connected = external[c] >= gamma_ * r_strength[c] * (ks - r_strength[c]) / two_m_;
          if (!well_connected) continue;
          const double gain = link[c] - gamma_ * kv * r_strength[c] / two_m_;
          if (gain >= 0.0) {
            candidates.push_back(c);
            gains.push_back(gain);
          }
        }
        std::size_t chosen = own;
        if (candidates.size() > 1) {
          const double scale = 2.0 / two_m_ / kRefineTheta;  // gain -> modularity units / theta
          const double top = *std::max_element(gains.begin(), gains.end());
          std::vector<double> cumulative(gains.size());
          double total = 0.0;
          for (std::size_t i = 0; i < gains.size(); ++i) {
            total += std::exp((gains[i] - top) * scale);
            cumulative[i] = total;
          }
          const double r = rng_.unit() * total;
          std::size_t pick = 0;
          while (pick + 1 < cumulative.size() && cumulative[pick] <= r) ++pick;
          chosen = candidates[pick];
        }
        if (chosen != own) {
          external[chosen] = external[chosen] + inside[v] - 2.0 * link[chosen];
          refined[v] = chosen;
          r_strength[chosen] += kv;
          ++r_size[chosen];
          r_strength[own] = 0.0;
          r_size[own] = 0;
        }
        for (auto c : touched_list) {
          link[c] = 0.0;
          touched[c] = false;
        }
      }
    }
    return refined;
  }

 private:
  double gamma_;
  double two_m_;
  Rng& rng_;
};

// Dense relabel in order of first appearance; returns the number of labels.
inline std::size_t densify(std::vector<std::size_t>& labels) {
  std::vector<std::size_t> remap(labels.size(), static_cast<std::size_t>(-1));
  std::size_t next = 0;
  for (auto& l : labels) {
    if (remap[l] == static_cast<std::size_t>(-1)) remap[l] = next++;
    l = remap[l];
  }
  return next;
}

inline Level aggregate(const Level& g, const std::vector<std::size_t>& part, std::size_t count) {
  Level out;
  out.adj.resize(count);
  out.self_loop.assign(count, 0.0);
  out.strength.assign(count, 0.0);
  std::vector<double> link(count, 0.0);
  std::vector<bool> touched(count, false);
  std::vector<std::vector<std::size_t>> members(count);
  for (std::size_t v = 0; v < g.size(); ++v) members[part[v]].push_back(v);
  for (std::size_t c = 0; c < count; ++c) {
    std::vector<std::size_t> touched_list;
    for (auto v : members[c]) {
      out.strength[c] += g.strength[v];
      out.self_loop[c] += g.self_loop[v];
      for (const auto& nb : g.adj[v]) {
        const auto d = part[nb.node];
        if (d == c) {
          if (v < nb.node) out.self_loop[c] += nb.weight;
          continue;
        }
        if (!touched[d]) {
          touched[d] = true;
          touched_list.push_back(d);
        }
        link[d] += nb.weight;
      }
    }
    std::sort(touched_list.begin(), touched_list.end());
    for (auto d : touched_list) {
      out.adj[c].push_back({d, link[d]});
      link[d] = 0.0;
      touched[d] = false;
    }
  }
  return out;
}

// One multilevel pass starting from `labels` on the original graph.
inline std::vector<std::size_t> run_pass(const Level& base, std::vector<std::size_t> labels, double resolution,
                                         double two_m, Rng& rng) {
  Optimizer opt(resolution, two_m, rng);
  Level level = base;
  std::vector<std::size_t> node_to_level(base.size());
  std::iota(node_to_level.begin(), node_to_level.end(), 0);
  std::vector<std::size_t> comm = labels;
  densify(comm);

  while (true) {
    opt.move_nodes(level, comm);
    auto dense = comm;
    const std::size_t communities = densify(dense);
    if (communities == level.size()) {
      comm = dense;
      break;
    }
    auto refined = opt.refine(level, dense);
    const std::size_t refined_count = densify(refined);
    if (refined_count == level.size()) {
      comm = dense;
      break;
    }
    std::vector<std::size_t> next_comm(refined_count);
    for (std::size_t v = 0; v < level.size(); ++v) next_comm[refined[v]] = dense[v];
    level = aggregate(level, refined, refined_count);
    for (auto& x : node_to_level) x = refined[x];
    comm = std::move(next_comm);
  }
  std::vector<std::size_t> out(base.size());
  for (std::size_t v = 0; v < base.size(); ++v) out[v] = comm[node_to_level[v]];
  return out;
}

}  // namespace leiden_detail

/// Leiden partition of g maximizing modularity at cfg.resolution.
/// Deterministic for a fixed cfg.seed; isolated nodes stay singletons.
inline Clustering leiden(const WeightedGraph& g, const ClusterConfig& cfg) {
  cfg.validate();
  const std::size_t n = g.node_count();
  std::vector<std::size_t> labels(n);
  std::iota(labels.begin(), labels.end(), 0);
  const double m = g.total_weight();
  if (n == 0 || !(m > 0.0)) return Clustering::from_labels(labels, ClusterMethod::Leiden);

  const auto base = leiden_detail::Level::from_graph(g);
  Rng rng(cfg.seed);
  auto best = Clustering::from_labels(labels, ClusterMethod::Leiden);
  double best_q = modularity(g, best, cfg.resolution);
  for (std::size_t iter = 0; iter < cfg.max_leiden_iterations; ++iter) {
    labels = leiden_detail::run_pass(base, labels, cfg.resolution, 2.0 * m, rng);
    auto candidate = Clustering::from_labels(labels, ClusterMethod::Leiden);
    const double q = modularity(g, candidate, cfg.resolution);
    if (q <= best_q + 1e-12) {
      if (q > best_q) best = std::move(candidate);
      break;
    }
    best = std::move(candidate);
    best_q = q;
  }
  return best;
}

}  // namespace claimagg
