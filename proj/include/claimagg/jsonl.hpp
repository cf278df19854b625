#pragma once

#include <filesystem>
#include <fstream>
#include <functional>
#include <string>
#include <vector>

#include <json.hpp>

#include "claimagg/error.hpp"

namespace claimagg {

using json = nlohmann::json;

namespace jsonl {

/// Calls fn(record, line_number) for every non-blank line. Throws ParseError on bad JSON.
inline void for_each(const std::filesystem::path& path,
                     const std::function<void(const json&, std::size_t)>& fn) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw NotFoundError("cannot open " + path.string());
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    json record = json::parse(line, nullptr, false);
    if (record.is_discarded() || !record.is_object())
      throw ParseError(path.string(), line_no, "not a JSON object");
    try {
      fn(record, line_no);
    } catch (const json::exception& e) {
      throw ParseError(path.string(), line_no, e.what());
    }
  }
}

inline std::string dump(const json& j) {
  return j.dump(-1, ' ', false, json::error_handler_t::replace);
}

inline void write(const std::filesystem::path& path, const std::vector<json>& records) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + path.string());
  for (const auto& r : records) out << dump(r) << '\n';
  if (!out) throw Error("write failed for " + path.string());
}

inline void write_json(const std::filesystem::path& path, const json& j) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + path.string());
  out << j.dump(2, ' ', false, json::error_handler_t::replace) << '\n';
  if (!out) throw Error("write failed for " + path.string());
}

inline json read_json(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw NotFoundError("cannot open " + path.string());
  json j = json::parse(in, nullptr, false);
  if (j.is_discarded()) throw ParseError(path.string(), 0, "invalid JSON");
  return j;
}

}  // namespace jsonl
}  // namespace claimagg
