#pragma once

// Deterministic stand-in for the model sidecar. Same wire contract as the
// real service: hashed bag-of-words embeddings, a first-line echo
// summarizer and a token-overlap scorer.

#include <cmath>
#include <memory>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <httplib.h>

#include "claimagg/evaluate.hpp"
#include "claimagg/jsonl.hpp"
#include "claimagg/random.hpp"

namespace claimagg {

struct StubSidecarOptions {
  std::size_t dim = 64;
  std::string model = "stub-hash-v1";
  std::size_t max_input_chars = 1 << 20;
};

namespace stub {

/// Sum of per-token Gaussian vectors seeded by the token hash, L2-normalized.
/// Texts with no word tokens hash as a whole.
inline std::vector<float> embed(std::string_view text, std::size_t dim) {
  auto tokens = tokenize(text);
  if (tokens.empty()) tokens.emplace_back(text);
  std::vector<double> acc(dim, 0.0);
  for (const auto& t : tokens) {
    Rng rng(fnv1a64(t));
    for (auto& x : acc) x += rng.normal();
  }
  double norm = 0.0;
  for (double x : acc) norm += x * x;
  norm = std::sqrt(norm);
  std::vector<float> out(dim);
  for (std::size_t i = 0; i < dim; ++i) out[i] = static_cast<float>(norm > 0 ? acc[i] / norm : 0.0);
  return out;
}

/// First line of the first text, cut to max_tokens whitespace tokens.
inline std::string summarize(const std::vector<std::string>& texts, int max_tokens) {
  const auto& first = texts.front();
  std::istringstream line(first.substr(0, first.find('\n')));
  std::string word, out;
  for (int n = 0; n < max_tokens && line >> word; ++n) out += (out.empty() ? "" : " ") + word;
  return out;
}

/// Unigram F1 between the two texts; identical texts score 1.
inline double score(const std::string& a, const std::string& b) {
  if (a == b) return 1.0;
  return rouge_n(tokenize(a), tokenize(b), 1).f1;
}

inline void reply_error(httplib::Response& res, int status, const std::string& msg, json extra = json::object()) {
  extra["error"] = msg;
  res.status = status;
  res.set_content(jsonl::dump(extra), "application/json");
}

inline bool parse_body(const httplib::Request& req, httplib::Response& res, json& body) {
  body = json::parse(req.body, nullptr, false);
  if (body.is_discarded() || !body.is_object()) {
    reply_error(res, 400, "body must be a JSON object");
    return false;
  }
  return true;
}

inline bool string_list(const json& v) {
  if (!v.is_array()) return false;
  for (const auto& x : v)
    if (!x.is_string()) return false;
  return true;
}

}  // namespace stub

inline void install_stub_routes(httplib::Server& server, const StubSidecarOptions& opt) {
  server.Post("/embed", [opt](const httplib::Request& req, httplib::Response& res) {
    json body;
    if (!stub::parse_body(req, res, body)) return;
    if (!body.contains("texts") || !stub::string_list(body["texts"]))
      return stub::reply_error(res, 400, "\"texts\" must be a list of strings");
    const auto texts = body["texts"].get<std::vector<std::string>>();
    if (texts.empty()) return stub::reply_error(res, 400, "\"texts\" is empty");
    json vectors = json::array();
    for (const auto& t : texts) {
      if (t.empty()) return stub::reply_error(res, 400, "empty text in \"texts\"");
      vectors.push_back(stub::embed(t, opt.dim));
    }
    res.set_content(jsonl::dump({{"dim", opt.dim}, {"model", opt.model}, {"vectors", vectors}}), "application/json");
  });

  server.Post("/summarize", [opt](const httplib::Request& req, httplib::Response& res) {
    json body;
    if (!stub::parse_body(req, res, body)) return;
    if (!body.contains("texts") || !stub::string_list(body["texts"]))
      return stub::reply_error(res, 400, "\"texts\" must be a list of strings");
    const auto texts = body["texts"].get<std::vector<std::string>>();
    if (texts.empty()) return stub::reply_error(res, 400, "\"texts\" is empty");
    const int max_tokens = body.value("max_tokens", 128);
    if (max_tokens < 1) return stub::reply_error(res, 400, "\"max_tokens\" must be positive");
    std::size_t chars = 0;
    for (const auto& t : texts) chars += t.size();
    if (chars > opt.max_input_chars)
      return stub::reply_error(res, 413, "input too long", {{"limit", opt.max_input_chars}});
    auto summary = stub::summarize(texts, max_tokens);
    if (summary.empty()) return stub::reply_error(res, 400, "first text has no content");
    res.set_content(jsonl::dump({{"summary", summary}}), "application/json");
  });

  server.Post("/score", [](const httplib::Request& req, httplib::Response& res) {
    json body;
    if (!stub::parse_body(req, res, body)) return;
    if (!body.contains("pairs") || !body["pairs"].is_array())
      return stub::reply_error(res, 400, "\"pairs\" must be a list");
    json scores = json::array();
    for (const auto& p : body["pairs"]) {
      if (!p.is_array() || p.size() != 2 || !p[0].is_string() || !p[1].is_string())
        return stub::reply_error(res, 400, "each pair must hold exactly two strings");
      scores.push_back(stub::score(p[0].get<std::string>(), p[1].get<std::string>()));
    }
    res.set_content(jsonl::dump({{"scores", scores}}), "application/json");
  });
}

/// Runs the stub on a background thread; port 0 picks a free port.
class StubSidecar {
 public:
  explicit StubSidecar(StubSidecarOptions opt = {}) { install_stub_routes(server_, opt); }
  ~StubSidecar() { stop(); }
  StubSidecar(const StubSidecar&) = delete;
  StubSidecar& operator=(const StubSidecar&) = delete;

  int start(const std::string& host = "127.0.0.1", int port = 0) {
    port_ = port == 0 ? server_.bind_to_any_port(host) : (server_.bind_to_port(host, port) ? port : -1);
    if (port_ < 0) throw Error("stub sidecar: cannot bind " + host + ":" + std::to_string(port));
    host_ = host;
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
    return port_;
  }

  void stop() {
    if (thread_.joinable()) {
      server_.stop();
      thread_.join();
    }
  }

  std::string url() const { return "http://" + host_ + ":" + std::to_string(port_); }

 private:
  httplib::Server server_;
  std::thread thread_;
  std::string host_;
  int port_ = -1;
};

}  // namespace claimagg
