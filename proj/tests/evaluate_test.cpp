#include <gtest/gtest.h>

#include "claimagg/evaluate.hpp"
#include "claimagg/random.hpp"
#include "oracles.hpp"

using namespace claimagg;

namespace {

using Tokens = std::vector<std::string>;

Tokens random_tokens(Rng& rng, std::size_t max_len, std::size_t vocab) {
  static const Tokens words = {"a", "b", "c", "d", "e", "f"};
  Tokens out(rng.below(max_len + 1));
  for (auto& t : out) t = words[rng.below(vocab)];
  return out;
}

ClusterSummary summary(std::size_t cid, SummaryMethod m, std::string text) {
  ClusterSummary s;
  s.cluster_id = cid;
  s.method = m;
  s.text = std::move(text);
  s.word_count = word_count(s.text);
  return s;
}

EmbeddingMatrix rows(const std::vector<std::vector<float>>& v) {
  EmbeddingMatrix e;
  e.dim = v.empty() ? 1 : v[0].size();
  for (std::size_t i = 0; i < v.size(); ++i) {
    e.post_ids.push_back("s" + std::to_string(i));
    e.values.insert(e.values.end(), v[i].begin(), v[i].end());
  }
  return e;
}

}  // namespace

TEST(Tokenize, Examples) {
  EXPECT_EQ(tokenize("The cat, sat!"), (Tokens{"the", "cat", "sat"}));
  EXPECT_EQ(tokenize(""), Tokens{});
  EXPECT_EQ(tokenize("COVID-19"), (Tokens{"covid", "19"}));
  EXPECT_EQ(tokenize("don't stop_now"), (Tokens{"don", "t", "stop", "now"}));
  EXPECT_EQ(tokenize("caf\xC3\xA9 ok"), (Tokens{"caf\xC3\xA9", "ok"}));
}

TEST(Rouge, IdenticalAndDisjoint) {
  EXPECT_DOUBLE_EQ(rouge_n("masks work well", "masks work well", 1).f1, 1.0);
  EXPECT_DOUBLE_EQ(rouge_n("masks work well", "masks work well", 2).f1, 1.0);
  EXPECT_DOUBLE_EQ(rouge_l("masks work well", "masks work well").f1, 1.0);
  EXPECT_DOUBLE_EQ(rouge_n("alpha beta", "gamma delta", 1).f1, 0.0);
  EXPECT_DOUBLE_EQ(rouge_l("alpha beta", "gamma delta").f1, 0.0);
}

TEST(Rouge, CatOnTheMat) {
  const std::string c = "the cat sat on the mat", r = "the cat lay on the mat";
  EXPECT_NEAR(rouge_n(c, r, 1).f1, 5.0 / 6.0, 1e-12);
  EXPECT_NEAR(rouge_n(c, r, 2).f1, 3.0 / 5.0, 1e-12);
  EXPECT_EQ(rouge_l(c, r).matches, 5u);
  EXPECT_NEAR(rouge_l(c, r).f1, 5.0 / 6.0, 1e-12);
}

TEST(Rouge, ReversedOrderLcs) {
  const auto s = rouge_l("a b c", "c b a");
  EXPECT_EQ(s.matches, 1u);
  EXPECT_NEAR(s.f1, 1.0 / 3.0, 1e-12);
}

TEST(Rouge, ClippedCounts) {
  // "the" appears three times in the candidate but once in the reference.
  const auto s = rouge_n("the the the", "the cat", 1);
  EXPECT_EQ(s.matches, 1u);
  EXPECT_NEAR(s.precision, 1.0 / 3.0, 1e-12);
  EXPECT_NEAR(s.recall, 0.5, 1e-12);
}

TEST(Rouge, ShortReferenceIsDegenerateNotError) {
  const auto s = rouge_n("a b c", "a", 2);
  EXPECT_TRUE(s.degenerate);
  EXPECT_EQ(s.f1, 0.0);
  EXPECT_TRUE(rouge_l("a b", "").degenerate);
  EXPECT_FALSE(rouge_n("", "a b", 1).degenerate);
  EXPECT_EQ(rouge_n("", "a b", 1).f1, 0.0);
}

TEST(Rouge, MatchesBruteForceOracle) {
  Rng rng(123);
  for (int trial = 0; trial < 500; ++trial) {
    const auto c = random_tokens(rng, 12, 1 + rng.below(6));
    const auto r = random_tokens(rng, 12, 1 + rng.below(6));
    for (int n : {1, 2}) {
      const auto s = rouge_n(c, r, n);
      EXPECT_EQ(s.matches, oracle::ngram_matches(c, r, n));
      EXPECT_GE(s.f1, 0.0);
      EXPECT_LE(s.f1, 1.0);
    }
    const auto l = rouge_l(c, r);
    EXPECT_EQ(l.matches, oracle::lcs_brute(c, r));
    EXPECT_EQ(lcs_length(c, r), lcs_length(r, c));
  }
}

TEST(Rouge, RecallPrecisionSwapUnderArgumentSwap) {
  Rng rng(5);
  for (int trial = 0; trial < 200; ++trial) {
    const auto c = random_tokens(rng, 10, 4), r = random_tokens(rng, 10, 4);
    if (c.size() < 2 || r.size() < 2) continue;
    const auto a = rouge_n(c, r, 1), b = rouge_n(r, c, 1);
    EXPECT_NEAR(a.precision, b.recall, 1e-12);
    EXPECT_NEAR(a.f1, b.f1, 1e-12);
  }
}

TEST(EvaluateRun, IdenticalSummariesScoreOne) {
  const std::vector<ClusterSummary> s = {summary(0, SummaryMethod::DG, "masks work"),
                                         summary(1, SummaryMethod::DG, "vaccines are safe")};
  const std::map<std::size_t, std::string> cref = {{0, "r0"}, {1, "r1"}};
  const std::map<std::string, std::string> refs = {{"r0", "masks work"}, {"r1", "vaccines are safe"}};
  const auto report = evaluate_run(s, cref, refs);
  ASSERT_EQ(report.methods.size(), 1u);
  EXPECT_DOUBLE_EQ(report.methods[0].rouge1, 1.0);
  EXPECT_DOUBLE_EQ(report.methods[0].rouge2, 1.0);
  EXPECT_DOUBLE_EQ(report.methods[0].rougeL, 1.0);
  EXPECT_EQ(report.evaluated, 2u);
}

TEST(EvaluateRun, SinglePairEqualsPairScores) {
  const std::vector<ClusterSummary> s = {summary(0, SummaryMethod::MCI, "the cat sat on the mat")};
  const auto report = evaluate_run(s, {{0, "r"}}, {{"r", "the cat lay on the mat"}});
  EXPECT_NEAR(report.methods[0].rouge1, 5.0 / 6.0, 1e-12);
  EXPECT_NEAR(report.methods[0].rouge2, 3.0 / 5.0, 1e-12);
  EXPECT_DOUBLE_EQ(report.methods[0].mean_word_count, 6.0);
}

TEST(EvaluateRun, MeansAcrossPairs) {
  // "a b c d e" vs "a b f g h" gives R1 f1 0.4; vs "a b c x y" gives 0.6.
  const std::vector<ClusterSummary> s = {summary(0, SummaryMethod::DG, "a b c d e"),
                                         summary(1, SummaryMethod::DG, "a b c d e")};
  const auto report = evaluate_run(s, {{0, "x"}, {1, "y"}}, {{"x", "a b f g h"}, {"y", "a b c x y"}});
  EXPECT_NEAR(report.rows[0].rouge1.f1, 0.4, 1e-12);
  EXPECT_NEAR(report.rows[1].rouge1.f1, 0.6, 1e-12);
  EXPECT_NEAR(report.methods[0].rouge1, 0.5, 1e-12);
}

TEST(EvaluateRun, NoOverlapIsError) {
  const std::vector<ClusterSummary> s = {summary(0, SummaryMethod::DG, "x")};
  EXPECT_THROW(evaluate_run(s, {{5, "r"}}, {{"r", "x"}}), ValidationError);
}

TEST(ResolveReferences, MajorityThenSmallestId) {
  std::vector<CleanPost> posts(5);
  const std::vector<std::optional<std::string>> refs = {"news-2", "news-1", "news-2", "news-9", "news-3"};
  for (std::size_t i = 0; i < 5; ++i) {
    posts[i].post.id = "p" + std::to_string(i);
    posts[i].post.source_ref = refs[i];
  }
  const std::vector<std::size_t> labels = {0, 0, 0, 1, 1};
  const auto out = resolve_cluster_references(Clustering::from_labels(labels, ClusterMethod::External), posts);
  EXPECT_EQ(out.at(0), "news-2");
  EXPECT_EQ(out.at(1), "news-3");
}

TEST(SummaryGraph, DissimilarSummariesAreSingletons) {
  const auto r = summary_graph_report(rows({{1, 0, 0}, {0, 1, 0}, {0, 0, 1}}), 0.75);
  EXPECT_EQ(r.community_count, 3u);
  EXPECT_EQ(r.multi_member_communities, 0u);
  EXPECT_DOUBLE_EQ(r.singleton_fraction(), 1.0);
}

TEST(SummaryGraph, DuplicatePairFormsOneCommunity) {
  const auto r = summary_graph_report(rows({{1, 0, 0, 0}, {0, 1, 0, 0}, {0, 1, 0, 0}, {0, 0, 1, 0}, {0, 0, 0, 1}}), 0.75);
  EXPECT_EQ(r.community_count, 4u);
  EXPECT_EQ(r.multi_member_communities, 1u);
  EXPECT_EQ(r.communities[0], (std::vector<std::string>{"s1", "s2"}));
  EXPECT_EQ(r.size_histogram.at(2), 1u);
  EXPECT_EQ(r.size_histogram.at(1), 3u);
}

TEST(SummaryGraph, ThreeEngineeredBlocks) {
  // 10 summaries in blocks of 4, 3, 3 around orthogonal axes with small offsets.
  std::vector<std::vector<float>> v;
  const std::vector<std::size_t> block = {0, 0, 0, 0, 1, 1, 1, 2, 2, 2};
  for (std::size_t i = 0; i < block.size(); ++i) {
    std::vector<float> row(6, 0.0f);
    row[block[i]] = 1.0f;
    row[3 + i % 3] = 0.15f;
    v.push_back(row);
  }
  const auto r = summary_graph_report(rows(v), 0.75);
  ASSERT_EQ(r.community_count, 3u);
  EXPECT_EQ(r.communities[0].size(), 4u);
  EXPECT_EQ(r.communities[1], (std::vector<std::string>{"s4", "s5", "s6"}));
  EXPECT_EQ(r.communities[2], (std::vector<std::string>{"s7", "s8", "s9"}));
}

TEST(SummaryGraph, SingleSummary) {
  EXPECT_EQ(summary_graph_report(rows({{1, 2}}), 0.75).community_count, 1u);
}

TEST(EvalReport, JsonCarriesSchemaVersion) {
  const std::vector<ClusterSummary> s = {summary(0, SummaryMethod::DG, "x y")};
  const auto j = to_json(evaluate_run(s, {{0, "r"}}, {{"r", "x y"}}));
  EXPECT_EQ(j["schema_version"], 1);
  EXPECT_EQ(j["methods"][0]["method"], "DG");
}

TEST(Rouge, InvariantUnderTokenizerNormalization) {
  Rng rng(77);
  static const std::vector<std::string> seps = {" ", "  ", ", ", "! ", " - ", "\t", "... "};
  auto render = [&](const Tokens& t) {
    std::string out = rng.below(2) ? "" : "\"";
    for (const auto& w : t) {
      std::string word = w;
      if (rng.below(2)) std::transform(word.begin(), word.end(), word.begin(), ::toupper);
      out += word + seps[rng.below(seps.size())];
    }
    return out;
  };
  for (int trial = 0; trial < 300; ++trial) {
    const auto c = random_tokens(rng, 12, 6), r = random_tokens(rng, 12, 6);
    const auto cs = render(c), rs = render(r);
    ASSERT_EQ(tokenize(cs), c);
    for (int n : {1, 2}) {
      EXPECT_EQ(rouge_n(cs, rs, n).f1, rouge_n(c, r, n).f1);
      EXPECT_EQ(rouge_n(cs, rs, n).degenerate, rouge_n(c, r, n).degenerate);
    }
    EXPECT_EQ(rouge_l(cs, rs).f1, rouge_l(c, r).f1);
  }
}

TEST(Rouge, F1IsSymmetric) {
  Rng rng(8);
  for (int trial = 0; trial < 300; ++trial) {
    const auto c = random_tokens(rng, 12, 5), r = random_tokens(rng, 12, 5);
    if (c.size() < 2 || r.size() < 2) continue;
    EXPECT_NEAR(rouge_n(c, r, 2).f1, rouge_n(r, c, 2).f1, 1e-12);
    EXPECT_NEAR(rouge_l(c, r).f1, rouge_l(r, c).f1, 1e-12);
  }
}

// Blocks of near-duplicate summaries; pairs of blocks share a weaker common
// direction, so raising epsilon first splits block pairs, then blocks.
TEST(SummaryGraph, CommunityCountNonDecreasingInEpsilon) {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    Rng rng(seed);
    const std::size_t dim = 48, pairs = 2 + rng.below(3);
    std::vector<std::vector<float>> v;
    for (std::size_t p = 0; p < pairs; ++p)
      for (std::size_t b = 0; b < 2; ++b) {
        const std::size_t size = 1 + rng.below(5);
        for (std::size_t i = 0; i < size; ++i) {
          std::vector<float> row(dim, 0.0f);
          row[p] = 0.8f;                       // shared by the block pair
          row[8 + 2 * p + b] = 0.6f;           // the block's own direction
          row[24 + (v.size() % 24)] = 0.05f * static_cast<float>(rng.unit());
          v.push_back(row);
        }
      }
    std::size_t last = 0;
    for (double eps = 0.30; eps <= 0.999; eps += 0.01) {
      const auto count = summary_graph_report(rows(v), eps, seed).community_count;
      EXPECT_GE(count, last) << "seed " << seed << " eps " << eps;
      last = count;
    }
    EXPECT_EQ(last, 2 * pairs);
  }
}
