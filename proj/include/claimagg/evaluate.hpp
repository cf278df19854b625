#pragma once

// ROUGE-1/2/L against reference claims, per-method report assembly, and the
// graph-of-summaries redundancy check.

#include <algorithm>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "claimagg/clustering.hpp"
#include "claimagg/corpus.hpp"
#include "claimagg/embedding.hpp"
#include "claimagg/leiden.hpp"
#include "claimagg/simgraph.hpp"
#include "claimagg/summarize.hpp"

namespace claimagg {

namespace detail {

// Letters and digits; non-ASCII code points count as word characters unless
// they are Latin-1 symbols, general punctuation, CJK punctuation or emoji.
inline bool is_word_code_point(char32_t cp) {
  if (cp < 0x80) return (cp >= 'a' && cp <= 'z') || (cp >= 'A' && cp <= 'Z') || (cp >= '0' && cp <= '9');
  if (cp <= 0xBF) return false;
  if (cp == 0xD7 || cp == 0xF7) return false;
  if (cp >= 0x2000 && cp <= 0x206F) return false;
  if (cp >= 0x3000 && cp <= 0x303F) return false;
  if (cp == 0xFFFD) return false;
  return !is_emoji(cp);
}

}  // namespace detail

/// Lowercased tokens split on any run of non-word characters.
inline std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  std::string current;
  for (std::size_t pos = 0; pos < text.size();) {
    const auto ch = detail::decode_utf8(text, pos);
    if (detail::is_word_code_point(ch.code_point)) {
      if (ch.length == 1 && text[pos] >= 'A' && text[pos] <= 'Z')
        current.push_back(static_cast<char>(text[pos] - 'A' + 'a'));
      else
        current.append(text.substr(pos, ch.length));
    } else if (!current.empty()) {
      tokens.push_back(std::move(current));
      current.clear();
    }
    pos += ch.length;
  }
  if (!current.empty()) tokens.push_back(std::move(current));
  return tokens;
}

enum class RougeVariant { R1, R2, RL };

inline std::string to_string(RougeVariant v) {
  switch (v) {
    case RougeVariant::R1: return "rouge1";
    case RougeVariant::R2: return "rouge2";
    case RougeVariant::RL: return "rougeL";
  }
  return "rougeL";
}

struct RougeScore {
  RougeVariant variant = RougeVariant::R1;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::size_t matches = 0;
  std::size_t candidate_total = 0;
  std::size_t reference_total = 0;
  bool degenerate = false;  // reference too short for the variant

  /// p = matches / candidate_total, r = matches / reference_total, f1 harmonic (0 when p + r = 0).
  static RougeScore from_counts(RougeVariant v, std::size_t matches, std::size_t cand, std::size_t ref) {
    RougeScore s;
    s.variant = v;
    s.matches = matches;
    s.candidate_total = cand;
    s.reference_total = ref;
    s.precision = cand ? static_cast<double>(matches) / static_cast<double>(cand) : 0.0;
    s.recall = ref ? static_cast<double>(matches) / static_cast<double>(ref) : 0.0;
    s.f1 = s.precision + s.recall > 0.0 ? 2.0 * s.precision * s.recall / (s.precision + s.recall) : 0.0;
    return s;
  }
};

/// Clipped n-gram overlap on pre-tokenized input, n in {1, 2}.
inline RougeScore rouge_n(std::span<const std::string> cand, std::span<const std::string> ref, int n) {
  if (n != 1 && n != 2) throw ValidationError("rouge_n supports n = 1 or 2");
  const auto variant = n == 1 ? RougeVariant::R1 : RougeVariant::R2;
  const auto un = static_cast<std::size_t>(n);
  auto grams = [un](std::span<const std::string> t) {
    std::map<std::string, std::size_t> counts;
    for (std::size_t i = 0; i + un <= t.size(); ++i) {
      std::string key = t[i];
      for (std::size_t k = 1; k < un; ++k) key.append(1, '\x1f').append(t[i + k]);
      ++counts[key];
    }
    return counts;
  };
  const std::size_t cand_total = cand.size() >= un ? cand.size() - un + 1 : 0;
  const std::size_t ref_total = ref.size() >= un ? ref.size() - un + 1 : 0;
  if (ref_total == 0) {
    auto s = RougeScore::from_counts(variant, 0, cand_total, 0);
    s.degenerate = true;
    return s;
  }
  const auto c = grams(cand), r = grams(ref);
  std::size_t matches = 0;
  for (const auto& [g, count] : c) {
    auto it = r.find(g);
    if (it != r.end()) matches += std::min(count, it->second);
  }
  return RougeScore::from_counts(variant, matches, cand_total, ref_total);
}

inline std::size_t lcs_length(std::span<const std::string> a, std::span<const std::string> b) {
  std::vector<std::size_t> prev(b.size() + 1, 0), cur(b.size() + 1, 0);
  for (std::size_t i = 1; i <= a.size(); ++i) {
    for (std::size_t j = 1; j <= b.size(); ++j)
      cur[j] = a[i - 1] == b[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], cur[j - 1]);
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

inline RougeScore rouge_l(std::span<const std::string> cand, std::span<const std::string> ref) {
  if (ref.empty()) {
    auto s = RougeScore::from_counts(RougeVariant::RL, 0, cand.size(), 0);
    s.degenerate = true;
    return s;
  }
  return RougeScore::from_counts(RougeVariant::RL, lcs_length(cand, ref), cand.size(), ref.size());
}

inline RougeScore rouge_n(std::string_view candidate, std::string_view reference, int n) {
  return rouge_n(tokenize(candidate), tokenize(reference), n);
}

inline RougeScore rouge_l(std::string_view candidate, std::string_view reference) {
  return rouge_l(tokenize(candidate), tokenize(reference));
}

// ---------------------------------------------------------------------------
// Run evaluation

/// Reference id per cluster: the most common source_ref among members, ties
/// to the smallest id. Clusters whose members carry no source_ref are omitted.
inline std::map<std::size_t, std::string> resolve_cluster_references(const Clustering& c,
                                                                     std::span<const CleanPost> posts) {
  if (posts.size() != c.labels.size()) throw ValidationError("resolve_cluster_references: size mismatch");
  std::vector<std::map<std::string, std::size_t>> votes(c.k);
  for (std::size_t i = 0; i < posts.size(); ++i)
    if (posts[i].post.source_ref) ++votes[c.labels[i]][*posts[i].post.source_ref];
  std::map<std::size_t, std::string> out;
  for (std::size_t k = 0; k < c.k; ++k) {
    const std::string* best = nullptr;
    std::size_t best_count = 0;
    for (const auto& [ref, count] : votes[k])  // map order: ascending id, so '>' keeps the smallest on ties
      if (count > best_count) {
        best = &ref;
        best_count = count;
      }
    if (best) out[k] = *best;
  }
  return out;
}

/// References file: JSONL {reference_id, text}.
inline std::map<std::string, std::string> load_references(const std::filesystem::path& path) {
  std::map<std::string, std::string> refs;
  jsonl::for_each(path, [&](const json& r, std::size_t line) {
    if (!refs.emplace(r.at("reference_id").get<std::string>(), r.at("text").get<std::string>()).second)
      throw ParseError(path.string(), line, "duplicate reference_id");
  });
  return refs;
}

struct EvalRow {
  std::size_t cluster_id;
  SummaryMethod method;
  std::string reference_id;
  RougeScore rouge1, rouge2, rougeL;
  std::size_t word_count;
  std::size_t reference_word_count;
};

struct MethodMeans {
  SummaryMethod method;
  std::size_t n = 0;
  double rouge1 = 0.0, rouge2 = 0.0, rougeL = 0.0;
  double mean_word_count = 0.0;
  double mean_reference_word_count = 0.0;
};

struct EvalReport {
  std::vector<MethodMeans> methods;
  std::vector<EvalRow> rows;
  std::size_t evaluated = 0;
};

inline EvalReport evaluate_run(std::span<const ClusterSummary> summaries,
                               const std::map<std::size_t, std::string>& cluster_reference,
                               const std::map<std::string, std::string>& references) {
  EvalReport report;
  std::map<SummaryMethod, MethodMeans> acc;
  for (const auto& s : summaries) {
    auto cr = cluster_reference.find(s.cluster_id);
    if (cr == cluster_reference.end()) continue;
    auto ref = references.find(cr->second);
    if (ref == references.end()) continue;
    const auto cand_tokens = tokenize(s.text);
    const auto ref_tokens = tokenize(ref->second);
    EvalRow row{s.cluster_id,
                s.method,
                cr->second,
                rouge_n(cand_tokens, ref_tokens, 1),
                rouge_n(cand_tokens, ref_tokens, 2),
                rouge_l(cand_tokens, ref_tokens),
                s.word_count,
                word_count(ref->second)};
    auto& m = acc[s.method];
    m.method = s.method;
    ++m.n;
    m.rouge1 += row.rouge1.f1;
    m.rouge2 += row.rouge2.f1;
    m.rougeL += row.rougeL.f1;
    m.mean_word_count += static_cast<double>(row.word_count);
    m.mean_reference_word_count += static_cast<double>(row.reference_word_count);
    report.rows.push_back(std::move(row));
  }
  if (report.rows.empty()) throw ValidationError("evaluate_run: no summary has a matching reference");
  for (auto& [method, m] : acc) {
    const double n = static_cast<double>(m.n);
    m.rouge1 /= n;
    m.rouge2 /= n;
    m.rougeL /= n;
    m.mean_word_count /= n;
    m.mean_reference_word_count /= n;
    report.methods.push_back(m);
  }
  report.evaluated = report.rows.size();
  return report;
}

inline json to_json(const RougeScore& s) {
  return {{"precision", s.precision}, {"recall", s.recall}, {"f1", s.f1}, {"degenerate", s.degenerate}};
}

inline json to_json(const EvalReport& r) {
  json methods = json::array();
  for (const auto& m : r.methods)
    methods.push_back({{"method", to_string(m.method)},
                       {"n", m.n},
                       {"rouge1_f1", m.rouge1},
                       {"rouge2_f1", m.rouge2},
                       {"rougeL_f1", m.rougeL},
                       {"mean_word_count", m.mean_word_count},
                       {"mean_reference_word_count", m.mean_reference_word_count}});
  json rows = json::array();
  for (const auto& row : r.rows)
    rows.push_back({{"cluster_id", row.cluster_id},
                    {"method", to_string(row.method)},
                    {"reference_id", row.reference_id},
                    {"rouge1", to_json(row.rouge1)},
                    {"rouge2", to_json(row.rouge2)},
                    {"rougeL", to_json(row.rougeL)},
                    {"word_count", row.word_count}});
  return {{"schema_version", 1}, {"evaluated", r.evaluated}, {"methods", methods}, {"rows", rows}};
}

// ---------------------------------------------------------------------------
// Graph of summaries

struct SummaryGraphReport {
  double epsilon = 0.75;
  std::size_t node_count = 0;
  std::size_t community_count = 0;
  std::vector<std::vector<std::string>> communities;  // largest first
  std::map<std::size_t, std::size_t> size_histogram;  // community size -> count
  std::size_t multi_member_communities = 0;

  double singleton_fraction() const {
    return community_count ? static_cast<double>(community_count - multi_member_communities) /
                                 static_cast<double>(community_count)
                           : 0.0;
  }
};

/// Leiden communities on the epsilon-graph of summary embeddings (row ids label the summaries).
inline SummaryGraphReport summary_graph_report(const EmbeddingMatrix& summary_embeddings, double epsilon,
                                               std::uint64_t seed = 0) {
  SummaryGraphReport r;
  r.epsilon = epsilon;
  r.node_count = summary_embeddings.rows();
  const auto s = similarity_matrix(summary_embeddings);
  const auto g = epsilon_graph(s, GraphConfig{epsilon}, summary_embeddings.post_ids);
  ClusterConfig cfg;
  cfg.delta = epsilon;
  cfg.seed = seed;
  const auto c = leiden(g, cfg);
  auto members = c.members();
  std::stable_sort(members.begin(), members.end(),
                   [](const auto& a, const auto& b) { return a.size() > b.size(); });
  r.community_count = members.size();
  for (const auto& m : members) {
    std::vector<std::string> ids;
    for (auto i : m) ids.push_back(summary_embeddings.post_ids[i]);
    r.communities.push_back(std::move(ids));
    ++r.size_histogram[m.size()];
    if (m.size() > 1) ++r.multi_member_communities;
  }
  return r;
}

inline json to_json(const SummaryGraphReport& r) {
  json hist = json::object();
  for (const auto& [size, count] : r.size_histogram) hist[std::to_string(size)] = count;
  return {{"schema_version", 1},
          {"epsilon", r.epsilon},
          {"node_count", r.node_count},
          {"community_count", r.community_count},
          {"multi_member_communities", r.multi_member_communities},
          {"singleton_fraction", r.singleton_fraction()},
          {"size_histogram", hist},
          {"communities", r.communities}};
}

}  // namespace claimagg
