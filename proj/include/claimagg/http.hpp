#pragma once

// Minimal JSON-over-HTTP client used for the model sidecar endpoints.

#include <chrono>
#include <string>

#include <httplib.h>

#include "claimagg/error.hpp"
#include "claimagg/jsonl.hpp"

namespace claimagg {

/// "http://host:port[/prefix]" split into the origin and a path prefix.
struct Endpoint {
  std::string origin;
  std::string prefix;

  static Endpoint parse(const std::string& url) {
    const auto scheme = url.find("://");
    if (scheme == std::string::npos || url.substr(0, scheme) != "http")
      throw ConfigError("endpoint must be an http:// URL: " + url);
    const auto path = url.find('/', scheme + 3);
    Endpoint e;
    e.origin = url.substr(0, path);
    if (path != std::string::npos) e.prefix = url.substr(path);
    while (!e.prefix.empty() && e.prefix.back() == '/') e.prefix.pop_back();
    if (e.origin.size() <= scheme + 3) throw ConfigError("endpoint has no host: " + url);
    return e;
  }

  std::string url(const std::string& path) const { return origin + prefix + path; }
};

/// POSTs a JSON body and returns the parsed JSON reply.
/// Transport failures, 429 and 5xx raise a retriable EndpointError; other
/// non-2xx statuses raise a non-retriable one; unparsable bodies a ProtocolError.
inline json post_json(const std::string& endpoint_url, const std::string& path, const json& body,
                      std::chrono::seconds timeout = std::chrono::seconds(120)) {
  const auto ep = Endpoint::parse(endpoint_url);
  httplib::Client client(ep.origin);
  client.set_connection_timeout(timeout);
  client.set_read_timeout(timeout);
  client.set_write_timeout(timeout);
  auto res = client.Post(ep.prefix + path, jsonl::dump(body), "application/json");
  if (!res)
    throw EndpointError(ep.url(path) + ": " + httplib::to_string(res.error()), /*retriable=*/true);
  if (res->status < 200 || res->status >= 300) {
    std::string detail = res->body;
    const json err = json::parse(res->body, nullptr, false);
    if (!err.is_discarded() && err.is_object() && err.contains("error") && err["error"].is_string())
      detail = err["error"].get<std::string>();
    const bool retriable = res->status == 429 || res->status >= 500;
    throw EndpointError(ep.url(path) + ": HTTP " + std::to_string(res->status) + ": " + detail,
                        retriable, res->status);
  }
  json reply = json::parse(res->body, nullptr, false);
  if (reply.is_discarded() || !reply.is_object())
    throw ProtocolError(ep.url(path) + ": reply is not a JSON object");
  return reply;
}

}  // namespace claimagg
