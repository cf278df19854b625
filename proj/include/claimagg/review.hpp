#pragma once

// Human review loop: a seeded, blinded rating session over one run
// directory, an append-only ratings log and the REST service the review UI
// talks to.

#include <chrono>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <mutex>
#include <numeric>
#include <optional>
#include <shared_mutex>
#include <string>
#include <thread>
#include <tuple>
#include <vector>

#include <httplib.h>

#include "claimagg/clustering.hpp"
#include "claimagg/corpus.hpp"
#include "claimagg/evaluate.hpp"
#include "claimagg/jsonl.hpp"
#include "claimagg/pipeline.hpp"
#include "claimagg/random.hpp"
#include "claimagg/summarize.hpp"

namespace claimagg {

inline constexpr int kReviewSchemaVersion = 1;
inline constexpr const char* kReferenceMethod = "Reference";

// ---------------------------------------------------------------------------
// Run data

struct ReviewCard {
  std::string method;  // a SummaryMethod name or "Reference"
  std::string text;
  std::optional<std::string> source_post_id;
};

struct ReviewCluster {
  std::size_t cluster_id = 0;
  std::size_t rank = 0;
  std::vector<std::size_t> members;  // indices into ReviewData::posts, id order
  std::vector<ReviewCard> cards;     // method order
};

struct ReviewData {
  std::vector<CleanPost> posts;
  std::vector<ReviewCluster> clusters;  // ranked
  std::map<std::size_t, std::size_t> position;  // cluster id -> index into clusters

  const ReviewCluster* find(std::size_t cluster_id) const {
    auto it = position.find(cluster_id);
    return it == position.end() ? nullptr : &clusters[it->second];
  }

  std::vector<std::size_t> ranked_ids() const {
    std::vector<std::size_t> out;
    for (const auto& c : clusters) out.push_back(c.cluster_id);
    return out;
  }
};

/// Builds review data from in-memory run outputs. `references` maps cluster id
/// to reference text and adds a "Reference" card where present.
inline ReviewData make_review_data(std::vector<CleanPost> posts, const Clustering& c,
                                   std::span<const ClusterSummary> summaries,
                                   const std::map<std::size_t, std::string>& references = {}) {
  if (posts.size() != c.labels.size()) throw ValidationError("review: clustering does not match the corpus");
  std::vector<std::string> ids;
  for (const auto& p : posts) ids.push_back(p.id());
  const auto ranking = rank_clusters(c, ids);
  ReviewData d;
  d.posts = std::move(posts);
  const auto members = c.members();
  for (std::size_t r = 0; r < ranking.order.size(); ++r) {
    ReviewCluster rc;
    rc.cluster_id = ranking.order[r];
    rc.rank = r;
    rc.members = members[rc.cluster_id];
    std::sort(rc.members.begin(), rc.members.end(),
              [&](std::size_t a, std::size_t b) { return d.posts[a].id() < d.posts[b].id(); });
    d.position[rc.cluster_id] = d.clusters.size();
    d.clusters.push_back(std::move(rc));
  }
  for (const auto& s : summaries) {
    auto it = d.position.find(s.cluster_id);
    if (it == d.position.end())
      throw ValidationError("review: summary for unknown cluster " + std::to_string(s.cluster_id));
    d.clusters[it->second].cards.push_back({to_string(s.method), s.text, s.source_post_id});
  }
  for (const auto& [cid, text] : references) {
    auto it = d.position.find(cid);
    if (it != d.position.end()) d.clusters[it->second].cards.push_back({kReferenceMethod, text, std::nullopt});
  }
  for (auto& rc : d.clusters)
    std::stable_sort(rc.cards.begin(), rc.cards.end(),
                     [](const ReviewCard& a, const ReviewCard& b) { return a.method < b.method; });
  return d;
}

/// Loads corpus.jsonl, clusters.jsonl and summaries.jsonl from a run directory.
/// References come from `references_path`, or from the run's manifest config.
inline ReviewData load_review_data(const fs::path& run_dir, std::string references_path = {}) {
  auto posts = load_clean_corpus(run_dir / artifact::kCorpus);
  std::vector<std::string> ids;
  for (const auto& p : posts) ids.push_back(p.id());
  const json meta = jsonl::read_json(run_dir / artifact::kClustersMeta);
  const auto c =
      load_clustering(run_dir / artifact::kClusters, ids, cluster_method_from_string(meta.at("method")));
  const auto summaries = fs::exists(run_dir / artifact::kSummaries) ? load_summaries(run_dir / artifact::kSummaries)
                                                                    : std::vector<ClusterSummary>{};
  if (references_path.empty() && fs::exists(run_dir / artifact::kManifest))
    references_path = RunManifest::load(run_dir / artifact::kManifest).config.references;
  std::map<std::size_t, std::string> cluster_refs;
  if (!references_path.empty()) {
    const auto refs = load_references(references_path);
    for (const auto& [cid, ref_id] : resolve_cluster_references(c, posts))
      if (auto it = refs.find(ref_id); it != refs.end()) cluster_refs[cid] = it->second;
  }
  return make_review_data(std::move(posts), c, summaries, cluster_refs);
}

// ---------------------------------------------------------------------------
// Sessions

/// k clusters drawn uniformly without replacement, returned in the input
/// (ranked) order.
inline std::vector<std::size_t> sample_clusters(std::span<const std::size_t> ranked_ids, std::size_t k,
                                                std::uint64_t seed) {
  if (k > ranked_ids.size())
    throw ValidationError("session size " + std::to_string(k) + " exceeds the " +
                          std::to_string(ranked_ids.size()) + " available clusters");
  std::vector<std::size_t> idx(ranked_ids.size());
  std::iota(idx.begin(), idx.end(), 0);
  Rng rng(seed);
  for (std::size_t i = 0; i < k; ++i) std::swap(idx[i], idx[i + rng.below(idx.size() - i)]);
  idx.resize(k);
  std::sort(idx.begin(), idx.end());
  std::vector<std::size_t> out;
  for (auto i : idx) out.push_back(ranked_ids[i]);
  return out;
}

inline std::string blind_label(std::size_t i) {
  std::string s;
  do {
    s.insert(s.begin(), static_cast<char>('A' + i % 26));
    i /= 26;
  } while (i-- > 0);
  return s;
}

struct ReviewSession {
  std::uint64_t seed = 0;
  std::vector<std::size_t> cluster_ids;                             // ranked
  std::map<std::size_t, std::map<std::string, std::string>> labels;  // cluster -> method -> label

  bool contains(std::size_t cid) const { return labels.count(cid) > 0; }

  std::optional<std::string> method_for(std::size_t cid, const std::string& label) const {
    auto it = labels.find(cid);
    if (it == labels.end()) return std::nullopt;
    for (const auto& [method, l] : it->second)
      if (l == label) return method;
    return std::nullopt;
  }
};

/// Draws k clusters and assigns each card a label A, B, ... in an order
/// shuffled per cluster from the session seed.
inline ReviewSession sample_session(const ReviewData& d, std::size_t k, std::uint64_t seed) {
  ReviewSession s;
  s.seed = seed;
  const auto ranked = d.ranked_ids();
  s.cluster_ids = sample_clusters(ranked, k, seed);
  for (auto cid : s.cluster_ids) {
    const auto& cards = d.find(cid)->cards;
    std::vector<std::size_t> order(cards.size());
    std::iota(order.begin(), order.end(), 0);
    Rng rng(derive_seed(seed, cid));
    rng.shuffle(std::span<std::size_t>(order));
    auto& map = s.labels[cid];
    for (std::size_t pos = 0; pos < order.size(); ++pos) map[cards[order[pos]].method] = blind_label(pos);
  }
  return s;
}

// ---------------------------------------------------------------------------
// Ratings

struct Rating {
  std::string rater_id;
  std::size_t cluster_id = 0;
  std::string method;
  std::string label;  // blinded label the rater saw; empty when rated by method
  int score = 0;
  bool flag = false;  // marked for fact-checking
  std::int64_t timestamp = 0;  // UTC seconds

  void validate() const {
    if (rater_id.empty()) throw ValidationError("rater_id is empty");
    if (method.empty()) throw ValidationError("method is empty");
    if (score < 1 || score > 5) throw ValidationError("score must be an integer in 1..5, got " + std::to_string(score));
  }
};

inline json to_json(const Rating& r) {
  json j = {{"rater_id", r.rater_id}, {"cluster_id", r.cluster_id}, {"method", r.method},
            {"score", r.score},       {"flag", r.flag},             {"timestamp", r.timestamp}};
  if (!r.label.empty()) j["label"] = r.label;
  return j;
}

inline Rating rating_from_json(const json& j) {
  Rating r;
  r.rater_id = j.at("rater_id").get<std::string>();
  r.cluster_id = j.at("cluster_id").get<std::size_t>();
  r.method = j.at("method").get<std::string>();
  r.label = j.value("label", "");
  r.score = j.at("score").get<int>();
  r.flag = j.value("flag", false);
  r.timestamp = j.value("timestamp", std::int64_t{0});
  r.validate();
  return r;
}

struct MethodRating {
  std::string method;
  std::size_t count = 0;
  double mean = 0.0;
};

/// Latest rating per (rater, cluster, method), in log order of that latest entry.
inline std::vector<Rating> effective_ratings(std::span<const Rating> log) {
  std::map<std::tuple<std::string, std::size_t, std::string>, std::size_t> last;
  for (std::size_t i = 0; i < log.size(); ++i) last[{log[i].rater_id, log[i].cluster_id, log[i].method}] = i;
  std::vector<std::size_t> keep;
  for (const auto& [key, i] : last) keep.push_back(i);
  std::sort(keep.begin(), keep.end());
  std::vector<Rating> out;
  for (auto i : keep) out.push_back(log[i]);
  return out;
}

/// Arithmetic mean score per method over the effective ratings, by method name.
inline std::vector<MethodRating> aggregate_ratings(std::span<const Rating> log) {
  std::map<std::string, std::pair<std::size_t, long long>> acc;
  for (const auto& r : effective_ratings(log)) {
    auto& [n, sum] = acc[r.method];
    ++n;
    sum += r.score;
  }
  std::vector<MethodRating> out;
  for (const auto& [method, a] : acc)
    out.push_back({method, a.first, static_cast<double>(a.second) / static_cast<double>(a.first)});
  return out;
}

/// Append-only JSONL ratings log. Writes go through one appender under an
/// exclusive lock, so readers only ever see whole lines.
class RatingStore {
 public:
  explicit RatingStore(fs::path path) : path_(std::move(path)) {
    if (fs::exists(path_)) jsonl::for_each(path_, [&](const json& j, std::size_t) { log_.push_back(rating_from_json(j)); });
    out_.open(path_, std::ios::binary | std::ios::app);
    if (!out_) throw Error("cannot open ratings log " + path_.string());
  }

  void append(const Rating& r) {
    r.validate();
    std::unique_lock lock(mutex_);
    out_ << jsonl::dump(to_json(r)) << '\n';
    out_.flush();
    if (!out_) throw Error("ratings log write failed: " + path_.string());
    log_.push_back(r);
  }

  std::vector<Rating> log() const {
    std::shared_lock lock(mutex_);
    return log_;
  }

  std::vector<MethodRating> aggregate() const {
    std::shared_lock lock(mutex_);
    return aggregate_ratings(log_);
  }

  const fs::path& path() const noexcept { return path_; }

 private:
  fs::path path_;
  mutable std::shared_mutex mutex_;
  std::ofstream out_;
  std::vector<Rating> log_;
};

// ---------------------------------------------------------------------------
// Service

struct ReviewOptions {
  std::optional<std::size_t> session_size;  // all clusters when unset
  std::uint64_t session_seed = 0;
  std::size_t max_page_size = 200;
  std::function<std::int64_t()> clock = [] {
    return std::chrono::duration_cast<std::chrono::seconds>(std::chrono::system_clock::now().time_since_epoch())
        .count();
  };
};

struct ApiResponse {
  int status = 200;
  std::string body;
  std::string content_type = "application/json";
};

/// The REST handlers without the transport, so they can be called directly.
class ReviewService {
 public:
  ReviewService(ReviewData data, fs::path ratings_path, ReviewOptions opt = {})
      : data_(std::move(data)), store_(std::move(ratings_path)), opt_(std::move(opt)) {
    session_ = sample_session(data_, opt_.session_size.value_or(data_.clusters.size()), opt_.session_seed);
  }

  bool active() const {
    std::shared_lock lock(state_mutex_);
    return !completed_;
  }
  const ReviewSession& session() const noexcept { return session_; }
  const RatingStore& store() const noexcept { return store_; }

  /// GET /api/clusters?page=&page_size= (page is 1-based)
  ApiResponse list_clusters(const std::map<std::string, std::string>& query) const {
    std::size_t page = 1, page_size = 20;
    if (auto e = paging(query, "page", "page_size", page, page_size)) return *e;
    const auto& ids = session_.cluster_ids;
    json items = json::array();
    for (std::size_t i = (page - 1) * page_size; i < ids.size() && i < page * page_size; ++i) {
      const auto& c = *data_.find(ids[i]);
      items.push_back({{"cluster_id", c.cluster_id},
                       {"rank", c.rank},
                       {"size", c.members.size()},
                       {"preview", data_.posts[c.members.front()].clean_text}});
    }
    return ok({{"schema_version", kReviewSchemaVersion},
               {"page", page},
               {"page_size", page_size},
               {"total", ids.size()},
               {"items", items}});
  }

  /// GET /api/clusters/{id}?member_page=&member_page_size=
  ApiResponse get_cluster(const std::string& id_text, const std::map<std::string, std::string>& query) const {
    const auto cid = parse_id(id_text);
    if (!cid || !session_.contains(*cid)) return error(404, "unknown cluster " + id_text);
    std::size_t page = 1, page_size = 50;
    if (auto e = paging(query, "member_page", "member_page_size", page, page_size)) return *e;
    const auto& c = *data_.find(*cid);
    json members = json::array();
    for (std::size_t i = (page - 1) * page_size; i < c.members.size() && i < page * page_size; ++i) {
      const auto& p = data_.posts[c.members[i]];
      members.push_back({{"post_id", p.id()},
                         {"text", p.post.text},
                         {"like_count", p.post.like_count},
                         {"repost_count", p.post.repost_count}});
    }
    const bool reveal = !active();
    const auto& labels = session_.labels.at(*cid);
    std::vector<std::pair<std::string, const ReviewCard*>> by_label;
    for (const auto& card : c.cards) by_label.emplace_back(labels.at(card.method), &card);
    std::sort(by_label.begin(), by_label.end());
    json cards = json::array();
    for (const auto& [label, card] : by_label) {
      json j = {{"label", label}, {"text", card->text}};
      if (reveal) {
        j["method"] = card->method;
        j["source_post_id"] = card->source_post_id ? json(*card->source_post_id) : json(nullptr);
      }
      cards.push_back(std::move(j));
    }
    return ok({{"schema_version", kReviewSchemaVersion},
               {"cluster_id", c.cluster_id},
               {"rank", c.rank},
               {"size", c.members.size()},
               {"member_page", page},
               {"member_page_size", page_size},
               {"members", members},
               {"summaries", cards}});
  }

  /// POST /api/ratings {rater_id, cluster_id, label | method, score, flag?}
  ApiResponse post_rating(const std::string& body) {
    const json j = json::parse(body, nullptr, false);
    if (j.is_discarded() || !j.is_object()) return error(400, "body must be a JSON object");
    Rating r;
    if (!j.contains("rater_id") || !j["rater_id"].is_string()) return error(400, "rater_id must be a string", "rater_id");
    r.rater_id = j["rater_id"].get<std::string>();
    if (r.rater_id.empty()) return error(400, "rater_id is empty", "rater_id");
    if (!j.contains("cluster_id") || !j["cluster_id"].is_number_unsigned())
      return error(400, "cluster_id must be a non-negative integer", "cluster_id");
    r.cluster_id = j["cluster_id"].get<std::size_t>();
    if (!j.contains("score") || !j["score"].is_number_integer()) return error(400, "score must be an integer", "score");
    const auto score = j["score"].get<long long>();
    if (score < 1 || score > 5) return error(400, "score must be an integer in 1..5", "score");
    r.score = static_cast<int>(score);
    if (j.contains("flag") && !j["flag"].is_boolean()) return error(400, "flag must be a boolean", "flag");
    r.flag = j.value("flag", false);
    if (!session_.contains(r.cluster_id)) return error(404, "unknown cluster " + std::to_string(r.cluster_id));

    if (j.contains("label") && j["label"].is_string()) {
      r.label = j["label"].get<std::string>();
      auto m = session_.method_for(r.cluster_id, r.label);
      if (!m) return error(400, "cluster has no summary labelled '" + r.label + "'", "label");
      r.method = *m;
    } else if (j.contains("method") && j["method"].is_string()) {
      r.method = j["method"].get<std::string>();
      const auto& labels = session_.labels.at(r.cluster_id);
      auto it = labels.find(r.method);
      if (it == labels.end()) return error(400, "cluster has no summary for method '" + r.method + "'", "method");
      r.label = it->second;
    } else {
      return error(400, "label or method is required", "label");
    }
    r.timestamp = opt_.clock();
    store_.append(r);
    return {201, jsonl::dump(public_rating(r, active())), "application/json"};
  }

  /// GET /api/export/ratings: the log as JSONL. While the session is active
  /// method names are withheld and only the blinded labels remain.
  ApiResponse export_ratings() const {
    const bool hide = active();
    std::string out;
    for (const auto& r : store_.log()) out += jsonl::dump(public_rating(r, hide)) + "\n";
    return {200, out, "application/x-ndjson"};
  }

  ApiResponse get_session() const {
    return ok({{"schema_version", kReviewSchemaVersion},
               {"active", active()},
               {"cluster_count", session_.cluster_ids.size()},
               {"cluster_ids", session_.cluster_ids}});
  }

  /// POST /api/session/complete: ends blinding and returns the label map.
  ApiResponse complete_session() {
    {
      std::unique_lock lock(state_mutex_);
      completed_ = true;
    }
    json reveal = json::object();
    for (const auto& [cid, labels] : session_.labels)
      for (const auto& [method, label] : labels) reveal[std::to_string(cid)][label] = method;
    return ok({{"schema_version", kReviewSchemaVersion}, {"active", false}, {"labels", reveal}});
  }

  /// GET /api/aggregate: per-method means, available once the session is complete.
  ApiResponse aggregate() const {
    if (active()) return error(409, "aggregate is available after the session is completed");
    json methods = json::array();
    for (const auto& m : store_.aggregate()) methods.push_back({{"method", m.method}, {"count", m.count}, {"mean", m.mean}});
    return ok({{"schema_version", kReviewSchemaVersion}, {"methods", methods}});
  }

 private:
  static ApiResponse ok(const json& j) { return {200, jsonl::dump(j), "application/json"}; }

  static ApiResponse error(int status, const std::string& msg, const std::string& field = {}) {
    json j = {{"schema_version", kReviewSchemaVersion}, {"error", msg}};
    if (!field.empty()) j["field"] = field;
    return {status, jsonl::dump(j), "application/json"};
  }

  static std::optional<std::size_t> parse_id(const std::string& s) {
    std::size_t v = 0;
    auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (s.empty() || res.ec != std::errc{} || res.ptr != s.data() + s.size()) return std::nullopt;
    return v;
  }

  std::optional<ApiResponse> paging(const std::map<std::string, std::string>& q, const char* page_key,
                                    const char* size_key, std::size_t& page, std::size_t& size) const {
    if (auto it = q.find(page_key); it != q.end()) {
      auto v = parse_id(it->second);
      if (!v || *v == 0) return error(400, std::string(page_key) + " must be a positive integer", page_key);
      page = *v;
    }
    if (auto it = q.find(size_key); it != q.end()) {
      auto v = parse_id(it->second);
      if (!v || *v == 0 || *v > opt_.max_page_size)
        return error(400, std::string(size_key) + " must lie in 1.." + std::to_string(opt_.max_page_size), size_key);
      size = *v;
    }
    return std::nullopt;
  }

  static json public_rating(const Rating& r, bool hide_method) {
    json j = to_json(r);
    if (hide_method) j.erase("method");
    return j;
  }

  ReviewData data_;
  RatingStore store_;
  ReviewOptions opt_;
  ReviewSession session_;
  mutable std::shared_mutex state_mutex_;
  bool completed_ = false;
};

inline void install_review_routes(httplib::Server& server, ReviewService& svc) {
  auto send = [](httplib::Response& res, const ApiResponse& r) {
    res.status = r.status;
    res.set_content(r.body, r.content_type);
  };
  auto query = [](const httplib::Request& req) {
    std::map<std::string, std::string> q;
    for (const auto& [k, v] : req.params) q.emplace(k, v);
    return q;
  };
  server.Get("/api/clusters", [&svc, send, query](const httplib::Request& req, httplib::Response& res) {
    send(res, svc.list_clusters(query(req)));
  });
  server.Get(R"(/api/clusters/([^/]+))", [&svc, send, query](const httplib::Request& req, httplib::Response& res) {
    send(res, svc.get_cluster(req.matches[1], query(req)));
  });
  server.Post("/api/ratings",
              [&svc, send](const httplib::Request& req, httplib::Response& res) { send(res, svc.post_rating(req.body)); });
  server.Get("/api/export/ratings",
             [&svc, send](const httplib::Request&, httplib::Response& res) { send(res, svc.export_ratings()); });
  server.Get("/api/session",
             [&svc, send](const httplib::Request&, httplib::Response& res) { send(res, svc.get_session()); });
  server.Post("/api/session/complete",
              [&svc, send](const httplib::Request&, httplib::Response& res) { send(res, svc.complete_session()); });
  server.Get("/api/aggregate",
             [&svc, send](const httplib::Request&, httplib::Response& res) { send(res, svc.aggregate()); });
}

/// httplib server around a ReviewService on a background thread.
class ReviewServer {
 public:
  explicit ReviewServer(ReviewService& svc) { install_review_routes(server_, svc); }
  ~ReviewServer() { stop(); }
  ReviewServer(const ReviewServer&) = delete;
  ReviewServer& operator=(const ReviewServer&) = delete;

  /// Port 0 picks a free port. Returns the bound port.
  int start(const std::string& host = "127.0.0.1", int port = 0) {
    port_ = port == 0 ? server_.bind_to_any_port(host) : (server_.bind_to_port(host, port) ? port : -1);
    if (port_ < 0) throw ConfigError("review service: cannot bind " + host + ":" + std::to_string(port));
    host_ = host;
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
    return port_;
  }

  /// Serves on the calling thread until stop() is called from elsewhere.
  void run(const std::string& host, int port) {
    if (!server_.bind_to_port(host, port)) throw ConfigError("review service: cannot bind " + host + ":" + std::to_string(port));
    host_ = host;
    port_ = port;
    server_.listen_after_bind();
  }

  void stop() {
    server_.stop();
    if (thread_.joinable()) thread_.join();
  }

  std::string url() const { return "http://" + host_ + ":" + std::to_string(port_); }

 private:
  httplib::Server server_;
  std::thread thread_;
  std::string host_;
  int port_ = -1;
};

}  // namespace claimagg
