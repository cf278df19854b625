#pragma once

// Undirected weighted graphs built by epsilon-neighborhood thresholding.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <span>
#include <string>
#include <tuple>
#include <vector>

#include "claimagg/error.hpp"
#include "claimagg/jsonl.hpp"
#include "claimagg/matrix.hpp"

namespace claimagg {

struct Edge {
  std::size_t u;
  std::size_t v;
  double weight;

  friend bool operator==(const Edge&, const Edge&) = default;
};

struct Neighbor {
  std::size_t node;
  double weight;
};

/// Immutable undirected graph in CSR form. No self-loops; weights in (0, 1].
class WeightedGraph {
 public:
  WeightedGraph() = default;

  WeightedGraph(std::size_t n, std::vector<Edge> edges, std::vector<std::string> labels = {})
      : n_(n), labels_(std::move(labels)) {
    if (labels_.empty()) {
      labels_.reserve(n);
      for (std::size_t i = 0; i < n; ++i) labels_.push_back(std::to_string(i));
    }
    if (labels_.size() != n) throw ValidationError("graph: label count differs from node count");
    for (auto& e : edges) {
      if (e.u >= n || e.v >= n)
        throw ValidationError("graph: edge (" + std::to_string(e.u) + ", " + std::to_string(e.v) +
                              ") references a node outside [0, " + std::to_string(n) + ")");
      if (e.u == e.v) throw ValidationError("graph: self-loop on node " + std::to_string(e.u));
      if (!(e.weight > 0.0 && e.weight <= 1.0))
        throw ValidationError("graph: edge weight outside (0, 1]: " + std::to_string(e.weight));
      if (e.u > e.v) std::swap(e.u, e.v);
    }
    std::sort(edges.begin(), edges.end(),
              [](const Edge& a, const Edge& b) { return std::tie(a.u, a.v) < std::tie(b.u, b.v); });
    for (std::size_t i = 1; i < edges.size(); ++i)
      if (edges[i].u == edges[i - 1].u && edges[i].v == edges[i - 1].v)
        throw ValidationError("graph: duplicate edge (" + std::to_string(edges[i].u) + ", " +
                              std::to_string(edges[i].v) + ")");

    offsets_.assign(n + 1, 0);
    for (const auto& e : edges) {
      ++offsets_[e.u + 1];
      ++offsets_[e.v + 1];
    }
    std::partial_sum(offsets_.begin(), offsets_.end(), offsets_.begin());
    adjacency_.resize(2 * edges.size());
    std::vector<std::size_t> cursor(offsets_.begin(), offsets_.end() - 1);
    for (const auto& e : edges) {
      adjacency_[cursor[e.u]++] = {e.v, e.weight};
      adjacency_[cursor[e.v]++] = {e.u, e.weight};
    }
    for (std::size_t i = 0; i < n; ++i)
      std::sort(adjacency_.begin() + offsets_[i], adjacency_.begin() + offsets_[i + 1],
                [](const Neighbor& a, const Neighbor& b) { return a.node < b.node; });
    edges_ = std::move(edges);
  }

  std::size_t node_count() const noexcept { return n_; }
  std::size_t edge_count() const noexcept { return edges_.size(); }
  const std::vector<std::string>& labels() const noexcept { return labels_; }
  const std::string& label(std::size_t i) const { return labels_.at(i); }

  /// Edges with u < v, sorted lexicographically.
  const std::vector<Edge>& edges() const noexcept { return edges_; }

  std::span<const Neighbor> neighbors(std::size_t i) const noexcept {
    return {adjacency_.data() + offsets_[i], offsets_[i + 1] - offsets_[i]};
  }

  std::size_t degree(std::size_t i) const noexcept { return offsets_[i + 1] - offsets_[i]; }

  double strength(std::size_t i) const noexcept {
    double s = 0.0;
    for (const auto& nb : neighbors(i)) s += nb.weight;
    return s;
  }

  double total_weight() const noexcept {
    double m = 0.0;
    for (const auto& e : edges_) m += e.weight;
    return m;
  }

 private:
  std::size_t n_ = 0;
  std::vector<std::string> labels_;
  std::vector<Edge> edges_;
  std::vector<std::size_t> offsets_{0};
  std::vector<Neighbor> adjacency_;
};

struct GraphConfig {
  double epsilon = 0.85;

  void validate() const {
    if (!(epsilon >= 0.0 && epsilon <= 1.0)) throw ConfigError("epsilon must lie in [0, 1]");
  }
};

/// Edge (i, j) iff S(i, j) >= epsilon and S(i, j) > 0, weighted by S(i, j).
inline WeightedGraph epsilon_graph(const SimMatrix& s, const GraphConfig& cfg,
                                   std::vector<std::string> labels = {}) {
  cfg.validate();
  std::vector<Edge> edges;
  for (std::size_t i = 0; i < s.size(); ++i)
    for (std::size_t j = i + 1; j < s.size(); ++j) {
      const double w = std::min(s(i, j), 1.0);
      if (w >= cfg.epsilon && w > 0.0) edges.push_back({i, j, w});
    }
  return WeightedGraph(s.size(), std::move(edges), std::move(labels));
}

/// Subgraph on `nodes`; node k of the result is nodes[k].
inline WeightedGraph induced_subgraph(const WeightedGraph& g, std::span<const std::size_t> nodes) {
  std::vector<std::size_t> local(g.node_count(), static_cast<std::size_t>(-1));
  std::vector<std::string> labels;
  for (std::size_t k = 0; k < nodes.size(); ++k) {
    local.at(nodes[k]) = k;
    labels.push_back(g.label(nodes[k]));
  }
  std::vector<Edge> edges;
  for (std::size_t k = 0; k < nodes.size(); ++k)
    for (const auto& nb : g.neighbors(nodes[k]))
      if (local[nb.node] != static_cast<std::size_t>(-1) && k < local[nb.node])
        edges.push_back({k, local[nb.node], nb.weight});
  return WeightedGraph(nodes.size(), std::move(edges), std::move(labels));
}

/// Components with sorted members, ordered by smallest member index.
inline std::vector<std::vector<std::size_t>> connected_components(const WeightedGraph& g) {
  std::vector<std::vector<std::size_t>> out;
  std::vector<bool> seen(g.node_count(), false);
  for (std::size_t start = 0; start < g.node_count(); ++start) {
    if (seen[start]) continue;
    std::vector<std::size_t> comp{start};
    seen[start] = true;
    for (std::size_t head = 0; head < comp.size(); ++head)
      for (const auto& nb : g.neighbors(comp[head]))
        if (!seen[nb.node]) {
          seen[nb.node] = true;
          comp.push_back(nb.node);
        }
    std::sort(comp.begin(), comp.end());
    out.push_back(std::move(comp));
  }
  return out;
}

namespace detail {

inline std::string format_double(double x) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), x);
  return std::string(buf, res.ptr);
}

template <typename T>
T parse_number(std::string_view field, const std::string& source, std::size_t line) {
  T value{};
  auto res = std::from_chars(field.data(), field.data() + field.size(), value);
  if (res.ec != std::errc{} || res.ptr != field.data() + field.size())
    throw ParseError(source, line, "bad number '" + std::string(field) + "'");
  return value;
}

inline std::vector<std::string_view> split_tabs(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto tab = line.find('\t', start);
    out.push_back(line.substr(start, tab == std::string_view::npos ? std::string_view::npos : tab - start));
    if (tab == std::string_view::npos) break;
    start = tab + 1;
  }
  return out;
}

}  // namespace detail

/// TSV: "#nodes\t<n>" then one "src\tdst\tweight" line per edge (shortest round-trip doubles).
inline void export_edgelist(const WeightedGraph& g, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + path.string());
  out << "#nodes\t" << g.node_count() << '\n';
  for (const auto& e : g.edges()) out << e.u << '\t' << e.v << '\t' << detail::format_double(e.weight) << '\n';
  if (!out) throw Error("write failed for " + path.string());
}

inline WeightedGraph import_edgelist(const std::filesystem::path& path, std::vector<std::string> labels = {}) {
  const std::string src = path.string();
  std::ifstream in(path, std::ios::binary);
  if (!in) throw NotFoundError("cannot open " + src);
  std::string line;
  std::size_t line_no = 0;
  std::size_t n = 0;
  bool have_header = false;
  std::vector<Edge> edges;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto fields = detail::split_tabs(line);
    if (!have_header) {
      if (fields.size() != 2 || fields[0] != "#nodes") throw ParseError(src, line_no, "expected '#nodes\\t<n>' header");
      n = detail::parse_number<std::size_t>(fields[1], src, line_no);
      have_header = true;
      continue;
    }
    if (fields.size() != 3) throw ParseError(src, line_no, "expected 3 tab-separated fields");
    Edge e{detail::parse_number<std::size_t>(fields[0], src, line_no),
           detail::parse_number<std::size_t>(fields[1], src, line_no),
           detail::parse_number<double>(fields[2], src, line_no)};
    if (e.u >= n || e.v >= n) throw ParseError(src, line_no, "edge references node outside header count");
    if (!(e.weight > 0.0 && e.weight <= 1.0)) throw ParseError(src, line_no, "edge weight outside (0, 1]");
    if (e.u == e.v) throw ParseError(src, line_no, "self-loop");
    edges.push_back(e);
  }
  if (!have_header) throw ParseError(src, 0, "missing '#nodes' header");
  try {
    return WeightedGraph(n, std::move(edges), std::move(labels));
  } catch (const ValidationError& e) {
    throw ParseError(src, 0, e.what());
  }
}

/// Node label map as JSONL {index, id}.
inline void export_node_labels(const WeightedGraph& g, const std::filesystem::path& path) {
  std::vector<json> rows;
  for (std::size_t i = 0; i < g.node_count(); ++i) rows.push_back({{"index", i}, {"id", g.label(i)}});
  jsonl::write(path, rows);
}

inline std::vector<std::string> import_node_labels(const std::filesystem::path& path) {
  std::vector<std::string> labels;
  jsonl::for_each(path, [&](const json& r, std::size_t line) {
    if (r.at("index").get<std::size_t>() != labels.size())
      throw ParseError(path.string(), line, "node labels must be listed in index order");
    labels.push_back(r.at("id").get<std::string>());
  });
  return labels;
}

}  // namespace claimagg
