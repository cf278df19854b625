#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "claimagg/random.hpp"
#include "claimagg/simgraph.hpp"

namespace fs = std::filesystem;
using namespace claimagg;

namespace {

SimMatrix random_sim(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  SimMatrix s(n, 1.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) s(i, j) = s(j, i) = 2.0 * rng.unit() - 1.0;
  return s;
}

fs::path temp(const std::string& name) {
  const auto dir = fs::temp_directory_path() / "claimagg_simgraph_test";
  fs::create_directories(dir);
  return dir / name;
}

}  // namespace

TEST(EpsilonGraph, ZeroEpsilonOnPositiveSimsIsComplete) {
  SimMatrix s(3, 1.0);
  s(0, 1) = s(1, 0) = 0.2;
  s(0, 2) = s(2, 0) = 0.4;
  s(1, 2) = s(2, 1) = 0.6;
  const auto g = epsilon_graph(s, GraphConfig{0.0});
  EXPECT_EQ(g.edge_count(), 3u);
}

TEST(EpsilonGraph, UnitEpsilonOnSubUnitSimsIsEdgeless) {
  SimMatrix s(4, 0.999);
  for (std::size_t i = 0; i < 4; ++i) s(i, i) = 1.0;
  const auto g = epsilon_graph(s, GraphConfig{1.0});
  EXPECT_EQ(g.edge_count(), 0u);
  EXPECT_EQ(g.node_count(), 4u);
}

TEST(EpsilonGraph, ThresholdsInclusively) {
  SimMatrix s(3, 1.0);
  s(0, 1) = s(1, 0) = 0.9;
  s(0, 2) = s(2, 0) = 0.5;
  s(1, 2) = s(2, 1) = 0.5;
  const auto g = epsilon_graph(s, GraphConfig{0.85});
  ASSERT_EQ(g.edge_count(), 1u);
  EXPECT_EQ(g.edges()[0], (Edge{0, 1, 0.9}));
  EXPECT_EQ(epsilon_graph(s, GraphConfig{0.9}).edge_count(), 1u);
  EXPECT_EQ(epsilon_graph(s, GraphConfig{0.5}).edge_count(), 3u);
}

TEST(EpsilonGraph, NegativeSimilaritiesNeverConnect) {
  SimMatrix s(2, 1.0);
  s(0, 1) = s(1, 0) = -0.3;
  EXPECT_EQ(epsilon_graph(s, GraphConfig{0.0}).edge_count(), 0u);
  EXPECT_THROW(epsilon_graph(s, GraphConfig{-0.5}), ConfigError);
}

TEST(EpsilonGraph, AllOnesIsComplete) {
  SimMatrix s(5, 1.0);
  EXPECT_EQ(epsilon_graph(s, GraphConfig{1.0}).edge_count(), 10u);
}

TEST(EpsilonGraph, EdgeCountMonotoneAndWeightsAboveEpsilon) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto s = random_sim(15, seed);
    std::size_t prev = static_cast<std::size_t>(-1);
    for (double eps = 0.0; eps <= 1.0; eps += 0.1) {
      const auto g = epsilon_graph(s, GraphConfig{eps});
      EXPECT_LE(g.edge_count(), prev);
      prev = g.edge_count();
      for (const auto& e : g.edges()) {
        EXPECT_GE(e.weight, eps);
        EXPECT_EQ(e.weight, s(e.u, e.v));
      }
      for (std::size_t i = 0; i < g.node_count(); ++i)
        for (const auto& nb : g.neighbors(i)) {
          bool back = false;
          for (const auto& nb2 : g.neighbors(nb.node)) back |= nb2.node == i;
          EXPECT_TRUE(back);
          EXPECT_NE(nb.node, i);
        }
    }
  }
}

TEST(WeightedGraph, RejectsInvalidEdges) {
  EXPECT_THROW(WeightedGraph(2, {{0, 0, 0.5}}), ValidationError);
  EXPECT_THROW(WeightedGraph(2, {{0, 1, 0.0}}), ValidationError);
  EXPECT_THROW(WeightedGraph(2, {{0, 1, 1.5}}), ValidationError);
  EXPECT_THROW(WeightedGraph(2, {{0, 2, 0.5}}), ValidationError);
  EXPECT_THROW(WeightedGraph(2, {{0, 1, 0.5}, {1, 0, 0.5}}), ValidationError);
}

TEST(ConnectedComponents, Examples) {
  EXPECT_EQ(connected_components(WeightedGraph(4, {})).size(), 4u);
  EXPECT_EQ(connected_components(WeightedGraph(3, {{0, 1, 1}, {1, 2, 1}})).size(), 1u);
  const auto comps = connected_components(WeightedGraph(4, {{2, 3, 1}, {0, 1, 1}}));
  ASSERT_EQ(comps.size(), 2u);
  EXPECT_EQ(comps[0], (std::vector<std::size_t>{0, 1}));
  EXPECT_EQ(comps[1], (std::vector<std::size_t>{2, 3}));
}

TEST(ConnectedComponents, OrderedBySmallestMember) {
  const auto comps = connected_components(WeightedGraph(6, {{5, 0, 1}, {1, 3, 1}, {2, 4, 1}}));
  ASSERT_EQ(comps.size(), 3u);
  EXPECT_EQ(comps[0], (std::vector<std::size_t>{0, 5}));
  EXPECT_EQ(comps[1], (std::vector<std::size_t>{1, 3}));
  EXPECT_EQ(comps[2], (std::vector<std::size_t>{2, 4}));
}

TEST(InducedSubgraph, KeepsInternalEdgesOnly) {
  const WeightedGraph g(4, {{0, 1, 0.9}, {1, 2, 0.8}, {2, 3, 0.7}}, {"a", "b", "c", "d"});
  const std::vector<std::size_t> nodes = {1, 2, 3};
  const auto sub = induced_subgraph(g, nodes);
  EXPECT_EQ(sub.node_count(), 3u);
  EXPECT_EQ(sub.edge_count(), 2u);
  EXPECT_EQ(sub.label(0), "b");
  EXPECT_EQ(sub.edges()[0], (Edge{0, 1, 0.8}));
}

TEST(EdgeList, RoundTripPreservesWeightsExactly) {
  const auto s = random_sim(25, 77);
  const auto g = epsilon_graph(s, GraphConfig{0.2});
  const auto path = temp("rt.tsv");
  export_edgelist(g, path);
  const auto back = import_edgelist(path);
  EXPECT_EQ(back.node_count(), g.node_count());
  EXPECT_EQ(back.edges(), g.edges());
}

TEST(EdgeList, ValidationErrors) {
  const auto neg = temp("neg.tsv");
  std::ofstream(neg) << "#nodes\t3\n0\t1\t-0.5\n";
  try {
    import_edgelist(neg);
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 2u);
  }
  const auto range = temp("range.tsv");
  std::ofstream(range) << "#nodes\t3\n0\t5\t0.5\n";
  EXPECT_THROW(import_edgelist(range), ParseError);
  const auto header = temp("noheader.tsv");
  std::ofstream(header) << "0\t1\t0.5\n";
  EXPECT_THROW(import_edgelist(header), ParseError);
}

TEST(NodeLabels, RoundTrip) {
  const WeightedGraph g(3, {{0, 2, 0.5}}, {"x", "y", "z"});
  const auto path = temp("labels.jsonl");
  export_node_labels(g, path);
  EXPECT_EQ(import_node_labels(path), g.labels());
}
