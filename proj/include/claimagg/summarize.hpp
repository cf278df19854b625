#pragma once

// One claim per cluster. Extractive methods pick the most central post
// (degree or MCI); abstractive methods dedup the cluster into near-duplicate
// sub-clusters, keep one random post from each, and ask a summarizer service.

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <future>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "claimagg/centrality.hpp"
#include "claimagg/clustering.hpp"
#include "claimagg/corpus.hpp"
#include "claimagg/http.hpp"
#include "claimagg/random.hpp"
#include "claimagg/simgraph.hpp"

namespace claimagg {

enum class SummaryMethod { DG, MCI, AbstractiveA, AbstractiveB };

inline std::string to_string(SummaryMethod m) {
  switch (m) {
    case SummaryMethod::DG: return "DG";
    case SummaryMethod::MCI: return "MCI";
    case SummaryMethod::AbstractiveA: return "AbstractiveA";
    case SummaryMethod::AbstractiveB: return "AbstractiveB";
  }
  return "DG";
}

inline SummaryMethod summary_method_from_string(const std::string& s) {
  if (s == "DG") return SummaryMethod::DG;
  if (s == "MCI") return SummaryMethod::MCI;
  if (s == "AbstractiveA") return SummaryMethod::AbstractiveA;
  if (s == "AbstractiveB") return SummaryMethod::AbstractiveB;
  throw ConfigError("unknown summary method '" + s + "' (expected DG|MCI|AbstractiveA|AbstractiveB)");
}

inline bool is_extractive(SummaryMethod m) { return m == SummaryMethod::DG || m == SummaryMethod::MCI; }

struct ClusterSummary {
  std::size_t cluster_id = 0;
  std::size_t rank = 0;
  SummaryMethod method = SummaryMethod::DG;
  std::string text;
  std::optional<std::string> source_post_id;
  std::size_t word_count = 0;
  std::size_t member_count = 0;

  friend bool operator==(const ClusterSummary&, const ClusterSummary&) = default;
};

struct DedupConfig {
  double delta_dup = 0.95;
  std::uint64_t seed = 0;

  void validate(double cluster_delta) const {
    if (!(delta_dup > 0.0 && delta_dup <= 1.0)) throw ConfigError("delta_dup must lie in (0, 1]");
    if (!(delta_dup > cluster_delta)) throw ConfigError("delta_dup must exceed the clustering delta");
  }
};

/// Near-duplicate collapse: average-linkage sub-clusters at delta_dup, one
/// uniformly random member per sub-cluster, result ordered by post id.
inline std::vector<CleanPost> dedup_cluster(std::span<const CleanPost> members, const SimMatrix& s_sub,
                                            const DedupConfig& cfg) {
  if (s_sub.size() != members.size()) throw ValidationError("dedup_cluster: similarity order differs from member count");
  if (!(cfg.delta_dup >= 0.0 && cfg.delta_dup <= 1.0)) throw ConfigError("delta_dup must lie in [0, 1]");
  ClusterConfig sub;
  sub.delta = cfg.delta_dup;
  const auto groups = agglomerative(s_sub, sub).members();
  Rng rng(cfg.seed);
  std::vector<CleanPost> out;
  out.reserve(groups.size());
  for (const auto& g : groups) out.push_back(members[g[rng.below(g.size())]]);
  std::sort(out.begin(), out.end(), [](const CleanPost& a, const CleanPost& b) { return a.id() < b.id(); });
  return out;
}

/// Most central member by degree (DG) or MCI; ties go to the smallest post id.
inline ClusterSummary extractive_summary(std::size_t cluster_id, std::span<const CleanPost> members,
                                         const WeightedGraph& g_sub, SummaryMethod method) {
  if (members.empty()) throw ValidationError("extractive_summary: empty cluster " + std::to_string(cluster_id));
  if (!is_extractive(method)) throw ValidationError("extractive_summary: " + to_string(method) + " is not extractive");
  if (g_sub.node_count() != members.size()) throw ValidationError("extractive_summary: subgraph/member mismatch");
  std::vector<std::string> ids;
  EngagementVector eng;
  for (const auto& m : members) {
    ids.push_back(m.id());
    eng.reposts.push_back(m.post.repost_count);
    eng.likes.push_back(m.post.like_count);
  }
  const auto scores = method == SummaryMethod::DG ? degree_centrality(g_sub) : mci(g_sub, eng);
  const auto& source = members[argmax_by_label(scores.scores, ids)];
  ClusterSummary s;
  s.cluster_id = cluster_id;
  s.method = method;
  s.text = source.clean_text;
  s.source_post_id = source.id();
  s.word_count = word_count(s.text);
  s.member_count = members.size();
  return s;
}

class Summarizer {
 public:
  virtual ~Summarizer() = default;
  virtual std::string summarize(const std::vector<std::string>& texts, int max_tokens) = 0;
};

/// POST /summarize {"texts", "max_tokens"} -> {"summary"}.
class HttpSummarizer : public Summarizer {
 public:
  explicit HttpSummarizer(std::string endpoint) : endpoint_(std::move(endpoint)) { Endpoint::parse(endpoint_); }

  std::string summarize(const std::vector<std::string>& texts, int max_tokens) override {
    const json reply = post_json(endpoint_, "/summarize", json{{"texts", texts}, {"max_tokens", max_tokens}});
    if (!reply.contains("summary") || !reply["summary"].is_string())
      throw ProtocolError("/summarize reply has no string \"summary\"");
    return reply["summary"].get<std::string>();
  }

 private:
  std::string endpoint_;
};

/// In-process stand-in with the stub service's behavior: echoes the first input line.
class FirstLineSummarizer : public Summarizer {
 public:
  std::string summarize(const std::vector<std::string>& texts, int) override {
    if (texts.empty()) return {};
    const auto& first = texts.front();
    return first.substr(0, first.find('\n'));
  }
};

/// Representatives that fit in max_chars when joined by newlines: highest
/// engagement first (ties by post id), stopping at the first that does not
/// fit. The kept posts are returned in their input order.
inline std::vector<CleanPost> select_within_budget(std::span<const CleanPost> reps, std::size_t max_chars) {
  std::vector<std::size_t> order(reps.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (reps[a].post.engagement() != reps[b].post.engagement())
      return reps[a].post.engagement() > reps[b].post.engagement();
    return reps[a].id() < reps[b].id();
  });
  std::vector<bool> keep(reps.size(), false);
  std::size_t used = 0, kept = 0;
  for (auto i : order) {
    const std::size_t cost = reps[i].clean_text.size() + (kept > 0 ? 1 : 0);
    if (used + cost > max_chars) break;
    used += cost;
    ++kept;
    keep[i] = true;
  }
  if (kept == 0 && !reps.empty())
    throw ValidationError("abstractive input: highest-engagement representative exceeds max_chars (" +
                          std::to_string(max_chars) + ")");
  std::vector<CleanPost> out;
  for (std::size_t i = 0; i < reps.size(); ++i)
    if (keep[i]) out.push_back(reps[i]);
  return out;
}

inline ClusterSummary abstractive_summary(std::size_t cluster_id, std::span<const CleanPost> representatives,
                                          Summarizer& client, std::size_t max_chars, int max_tokens = 128,
                                          SummaryMethod method = SummaryMethod::AbstractiveA,
                                          std::size_t member_count = 0) {
  if (representatives.empty()) throw ValidationError("abstractive_summary: no representatives");
  std::vector<std::string> texts;
  for (const auto& r : select_within_budget(representatives, max_chars)) texts.push_back(r.clean_text);
  std::string text = client.summarize(texts, max_tokens);
  const auto first = text.find_first_not_of(" \t\r\n");
  if (first == std::string::npos) throw ProtocolError("summarizer returned an empty summary");
  text = text.substr(first, text.find_last_not_of(" \t\r\n") - first + 1);
  ClusterSummary s;
  s.cluster_id = cluster_id;
  s.method = method;
  s.text = std::move(text);
  s.word_count = word_count(s.text);
  s.member_count = member_count ? member_count : representatives.size();
  return s;
}

struct SummaryFailure {
  std::size_t cluster_id;
  std::size_t rank;
  SummaryMethod method;
  std::string message;
  bool endpoint_failure = false;
};

struct SummarizeResult {
  std::vector<ClusterSummary> summaries;
  std::vector<SummaryFailure> failures;
};

struct SummarizeInputs {
  std::span<const CleanPost> posts;
  const SimMatrix* similarity = nullptr;
  const Clustering* clustering = nullptr;
  const RankedClusters* ranking = nullptr;
  double epsilon = 0.85;
  DedupConfig dedup;  // dedup.seed is the stage seed; each cluster derives its own
  std::vector<SummaryMethod> methods;
  std::map<SummaryMethod, std::shared_ptr<Summarizer>> summarizers;
  std::size_t max_chars = 4000;
  int max_tokens = 128;
  std::size_t max_in_flight = 4;
};

/// One summary per (cluster, method) in ranked order. Per-entry failures are
/// collected instead of aborting the batch.
inline SummarizeResult summarize_all(const SummarizeInputs& in) {
  if (!in.similarity || !in.clustering || !in.ranking) throw ValidationError("summarize_all: missing inputs");
  for (auto m : in.methods)
    if (!is_extractive(m) && !in.summarizers.contains(m))
      throw ConfigError("no summarizer configured for " + to_string(m));

  struct Slot {
    std::size_t cluster_id, rank;
    SummaryMethod method;
    std::optional<ClusterSummary> summary;
    std::optional<SummaryFailure> failure;
    std::vector<CleanPost> reps;
  };
  std::vector<Slot> slots;
  const auto members_of = in.clustering->members();

  for (std::size_t rank = 0; rank < in.ranking->order.size(); ++rank) {
    const std::size_t cid = in.ranking->order[rank];
    const auto& idx = members_of.at(cid);
    std::vector<CleanPost> members;
    for (auto i : idx) members.push_back(in.posts[i]);
    const auto s_sub = in.similarity->submatrix(idx);
    std::optional<std::vector<CleanPost>> reps;
    std::optional<WeightedGraph> g_sub;
    for (auto method : in.methods) {
      Slot slot{cid, rank, method, {}, {}, {}};
      try {
        if (is_extractive(method)) {
          if (!g_sub) g_sub = epsilon_graph(s_sub, GraphConfig{in.epsilon});
          slot.summary = extractive_summary(cid, members, *g_sub, method);
          slot.summary->rank = rank;
        } else {
          if (!reps) reps = dedup_cluster(members, s_sub, DedupConfig{in.dedup.delta_dup, derive_seed(in.dedup.seed, cid)});
          slot.reps = *reps;
        }
      } catch (const Error& e) {
        slot.failure = SummaryFailure{cid, rank, method, e.what(), false};
      }
      slots.push_back(std::move(slot));
    }
  }

  // Abstractive requests, at most max_in_flight concurrently.
  std::vector<std::size_t> pending;
  for (std::size_t i = 0; i < slots.size(); ++i)
    if (!is_extractive(slots[i].method) && !slots[i].failure) pending.push_back(i);
  const std::size_t window = std::max<std::size_t>(1, in.max_in_flight);
  for (std::size_t start = 0; start < pending.size(); start += window) {
    std::vector<std::future<void>> inflight;
    for (std::size_t p = start; p < std::min(pending.size(), start + window); ++p) {
      Slot& slot = slots[pending[p]];
      Summarizer& client = *in.summarizers.at(slot.method);
      const std::size_t member_count = members_of.at(slot.cluster_id).size();
      inflight.push_back(std::async(std::launch::async, [&slot, &client, &in, member_count] {
        try {
          slot.summary = abstractive_summary(slot.cluster_id, slot.reps, client, in.max_chars, in.max_tokens,
                                             slot.method, member_count);
          slot.summary->rank = slot.rank;
        } catch (const EndpointError& e) {
          slot.failure = SummaryFailure{slot.cluster_id, slot.rank, slot.method, e.what(), true};
        } catch (const Error& e) {
          slot.failure = SummaryFailure{slot.cluster_id, slot.rank, slot.method, e.what(), false};
        }
      }));
    }
    for (auto& f : inflight) f.get();
  }

  SummarizeResult out;
  for (auto& slot : slots) {
    if (slot.summary) out.summaries.push_back(std::move(*slot.summary));
    if (slot.failure) out.failures.push_back(std::move(*slot.failure));
  }
  return out;
}

inline double mean_word_count(std::span<const ClusterSummary> summaries) {
  if (summaries.empty()) return 0.0;
  double total = 0.0;
  for (const auto& s : summaries) total += static_cast<double>(s.word_count);
  return total / static_cast<double>(summaries.size());
}

inline json to_json(const ClusterSummary& s) {
  json j = {{"cluster_id", s.cluster_id},
            {"rank", s.rank},
            {"method", to_string(s.method)},
            {"text", s.text},
            {"source_post_id", s.source_post_id ? json(*s.source_post_id) : json(nullptr)},
            {"word_count", s.word_count},
            {"member_count", s.member_count}};
  return j;
}

inline ClusterSummary summary_from_json(const json& j) {
  ClusterSummary s;
  s.cluster_id = j.at("cluster_id").get<std::size_t>();
  s.rank = j.value("rank", std::size_t{0});
  s.method = summary_method_from_string(j.at("method").get<std::string>());
  s.text = j.at("text").get<std::string>();
  if (j.contains("source_post_id") && !j["source_post_id"].is_null())
    s.source_post_id = j["source_post_id"].get<std::string>();
  s.word_count = word_count(s.text);
  s.member_count = j.value("member_count", std::size_t{0});
  return s;
}

inline void save_summaries(std::span<const ClusterSummary> summaries, const std::filesystem::path& path) {
  std::vector<json> rows;
  for (const auto& s : summaries) rows.push_back(to_json(s));
  jsonl::write(path, rows);
}

inline std::vector<ClusterSummary> load_summaries(const std::filesystem::path& path) {
  std::vector<ClusterSummary> out;
  jsonl::for_each(path, [&](const json& r, std::size_t line) {
    try {
      out.push_back(summary_from_json(r));
    } catch (const ConfigError& e) {
      throw ParseError(path.string(), line, e.what());
    }
  });
  return out;
}

}  // namespace claimagg
