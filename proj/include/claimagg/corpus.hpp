#pragma once

// Raw post loading, text cleaning and corpus filtering.

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

#include "claimagg/error.hpp"
#include "claimagg/jsonl.hpp"

namespace claimagg {

struct Post {
  std::string id;
  std::string text;
  std::string lang = "en";
  std::int64_t like_count = 0;
  std::int64_t repost_count = 0;
  std::optional<std::string> source_ref;

  std::int64_t engagement() const noexcept { return like_count + repost_count; }
};

struct CleanPost {
  Post post;
  std::string clean_text;
  std::size_t word_count = 0;

  const std::string& id() const noexcept { return post.id; }
};

struct RelevanceConfig {
  double theta = 0.1;
  std::size_t min_words = 4;

  void validate() const {
    if (!(theta >= 0.0 && theta <= 1.0)) throw ConfigError("theta must lie in [0, 1]");
    if (min_words == 0) throw ConfigError("min_words must be positive");
  }
};

namespace detail {

struct Utf8Char {
  char32_t code_point;
  std::size_t length;
};

// Invalid sequences decode as a single byte so the caller can copy them through.
inline Utf8Char decode_utf8(std::string_view s, std::size_t pos) {
  const auto b0 = static_cast<unsigned char>(s[pos]);
  auto cont = [&](std::size_t k) -> int {
    if (pos + k >= s.size()) return -1;
    const auto b = static_cast<unsigned char>(s[pos + k]);
    return (b & 0xC0) == 0x80 ? (b & 0x3F) : -1;
  };
  if (b0 < 0x80) return {b0, 1};
  if ((b0 & 0xE0) == 0xC0) {
    const int c1 = cont(1);
    if (c1 >= 0) return {static_cast<char32_t>(((b0 & 0x1F) << 6) | c1), 2};
  } else if ((b0 & 0xF0) == 0xE0) {
    const int c1 = cont(1), c2 = cont(2);
    if (c1 >= 0 && c2 >= 0) return {static_cast<char32_t>(((b0 & 0x0F) << 12) | (c1 << 6) | c2), 3};
  } else if ((b0 & 0xF8) == 0xF0) {
    const int c1 = cont(1), c2 = cont(2), c3 = cont(3);
    if (c1 >= 0 && c2 >= 0 && c3 >= 0)
      return {static_cast<char32_t>(((b0 & 0x07) << 18) | (c1 << 12) | (c2 << 6) | c3), 4};
  }
  return {0xFFFD, 1};
}

struct CodePointRange {
  char32_t lo, hi;
};

// Extended_Pictographic (Unicode 15) plus the emoji presentation components:
// ZWJ, variation selectors, keycap, regional indicators, skin tones and tags.
inline constexpr CodePointRange kEmojiRanges[] = {
    {0x00A9, 0x00A9},   {0x00AE, 0x00AE},   {0x200D, 0x200D},   {0x203C, 0x203C},
    {0x2049, 0x2049},   {0x20E3, 0x20E3},   {0x2122, 0x2122},   {0x2139, 0x2139},
    {0x2194, 0x2199},   {0x21A9, 0x21AA},   {0x231A, 0x231B},   {0x2328, 0x2328},
    {0x2388, 0x2388},   {0x23CF, 0x23CF},   {0x23E9, 0x23F3},   {0x23F8, 0x23FA},
    {0x24C2, 0x24C2},   {0x25AA, 0x25AB},   {0x25B6, 0x25B6},   {0x25C0, 0x25C0},
    {0x25FB, 0x25FE},   {0x2600, 0x2605},   {0x2607, 0x2612},   {0x2614, 0x2685},
    {0x2690, 0x2705},   {0x2708, 0x2712},   {0x2714, 0x2714},   {0x2716, 0x2716},
    {0x271D, 0x271D},   {0x2721, 0x2721},   {0x2728, 0x2728},   {0x2733, 0x2734},
    {0x2744, 0x2744},   {0x2747, 0x2747},   {0x274C, 0x274C},   {0x274E, 0x274E},
    {0x2753, 0x2755},   {0x2757, 0x2757},   {0x2763, 0x2767},   {0x2795, 0x2797},
    {0x27A1, 0x27A1},   {0x27B0, 0x27B0},   {0x27BF, 0x27BF},   {0x2934, 0x2935},
    {0x2B05, 0x2B07},   {0x2B1B, 0x2B1C},   {0x2B50, 0x2B50},   {0x2B55, 0x2B55},
    {0x3030, 0x3030},   {0x303D, 0x303D},   {0x3297, 0x3297},   {0x3299, 0x3299},
    {0xFE0E, 0xFE0F},   {0x1F000, 0x1F0FF}, {0x1F10D, 0x1F10F}, {0x1F12F, 0x1F12F},
    {0x1F16C, 0x1F171}, {0x1F17E, 0x1F17F}, {0x1F18E, 0x1F18E}, {0x1F191, 0x1F19A},
    {0x1F1AD, 0x1F1FF}, {0x1F201, 0x1F20F}, {0x1F21A, 0x1F21A}, {0x1F22F, 0x1F22F},
    {0x1F232, 0x1F23A}, {0x1F23C, 0x1F23F}, {0x1F249, 0x1F3FF}, {0x1F400, 0x1F53D},
    {0x1F546, 0x1F64F}, {0x1F680, 0x1F6FF}, {0x1F774, 0x1F77F}, {0x1F7D5, 0x1F7FF},
    {0x1F80C, 0x1F80F}, {0x1F848, 0x1F84F}, {0x1F85A, 0x1F85F}, {0x1F888, 0x1F88F},
    {0x1F8AE, 0x1F8FF}, {0x1F90C, 0x1F93A}, {0x1F93C, 0x1F945}, {0x1F947, 0x1FAFF},
    {0x1FC00, 0x1FFFD}, {0xE0020, 0xE007F},
};

inline bool is_emoji(char32_t cp) {
  const auto* end = std::end(kEmojiRanges);
  const auto* it = std::upper_bound(std::begin(kEmojiRanges), end, cp,
                                    [](char32_t v, const CodePointRange& r) { return v < r.lo; });
  if (it == std::begin(kEmojiRanges)) return false;
  --it;
  return cp >= it->lo && cp <= it->hi;
}

inline bool is_space(char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

inline bool starts_with_icase(std::string_view s, std::string_view prefix) {
  if (s.size() < prefix.size()) return false;
  for (std::size_t i = 0; i < prefix.size(); ++i) {
    char c = s[i];
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
    if (c != prefix[i]) return false;
  }
  return true;
}

// Mentions, hashtags and links, allowing leading opening punctuation: "(@bob", "\"#tag".
inline bool is_noise_token(std::string_view token) {
  const auto first = token.find_first_not_of("([{\"'");
  if (first == std::string_view::npos) return false;
  token.remove_prefix(first);
  if (token.front() == '@' || token.front() == '#') return true;
  return starts_with_icase(token, "http://") || starts_with_icase(token, "https://") ||
         starts_with_icase(token, "www.");
}

inline std::vector<std::string_view> split_whitespace(std::string_view s) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && is_space(s[i])) ++i;
    std::size_t j = i;
    while (j < s.size() && !is_space(s[j])) ++j;
    if (j > i) out.push_back(s.substr(i, j - i));
    i = j;
  }
  return out;
}

}  // namespace detail

inline std::size_t word_count(std::string_view text) { return detail::split_whitespace(text).size(); }

/// Strips emoji, @-mentions, #-hashtags and http(s)/www links; collapses whitespace.
inline std::string clean_text(std::string_view raw) {
  std::string no_emoji;
  no_emoji.reserve(raw.size());
  for (std::size_t pos = 0; pos < raw.size();) {
    const auto ch = detail::decode_utf8(raw, pos);
    if (detail::is_emoji(ch.code_point))
      no_emoji.push_back(' ');
    else
      no_emoji.append(raw.substr(pos, ch.length));
    pos += ch.length;
  }
  std::string out;
  out.reserve(no_emoji.size());
  for (auto token : detail::split_whitespace(no_emoji)) {
    if (detail::is_noise_token(token)) continue;
    if (!out.empty()) out.push_back(' ');
    out.append(token);
  }
  return out;
}

inline Post post_from_json(const json& j) {
  Post p;
  if (!j.contains("id") || !j.at("id").is_string()) throw ValidationError("missing string field \"id\"");
  if (!j.contains("text") || !j.at("text").is_string())
    throw ValidationError("missing string field \"text\"");
  p.id = j.at("id").get<std::string>();
  p.text = j.at("text").get<std::string>();
  if (j.contains("lang")) p.lang = j.at("lang").get<std::string>();
  if (j.contains("like_count")) p.like_count = j.at("like_count").get<std::int64_t>();
  if (j.contains("repost_count")) p.repost_count = j.at("repost_count").get<std::int64_t>();
  if (j.contains("source_ref") && !j.at("source_ref").is_null())
    p.source_ref = j.at("source_ref").get<std::string>();
  if (p.like_count < 0 || p.repost_count < 0) throw ValidationError("engagement counts must be >= 0");
  return p;
}

inline json to_json(const Post& p) {
  json j = {{"id", p.id},
            {"text", p.text},
            {"lang", p.lang},
            {"like_count", p.like_count},
            {"repost_count", p.repost_count}};
  if (p.source_ref) j["source_ref"] = *p.source_ref;
  return j;
}

inline json to_json(const CleanPost& p) {
  json j = to_json(p.post);
  j["clean_text"] = p.clean_text;
  j["word_count"] = p.word_count;
  return j;
}

/// Loads a posts JSONL file. Repeated ids keep the first record; each repeat is
/// reported through `warnings` when given.
inline std::vector<Post> load_corpus(const std::filesystem::path& path,
                                     std::vector<std::string>* warnings = nullptr) {
  std::vector<Post> posts;
  std::unordered_set<std::string> seen;
  jsonl::for_each(path, [&](const json& record, std::size_t line) {
    Post p;
    try {
      p = post_from_json(record);
    } catch (const ValidationError& e) {
      throw ParseError(path.string(), line, e.what());
    }
    if (!seen.insert(p.id).second) {
      if (warnings) warnings->push_back("line " + std::to_string(line) + ": duplicate id " + p.id);
      return;
    }
    posts.push_back(std::move(p));
  });
  return posts;
}

inline void save_clean_corpus(const std::filesystem::path& path, std::span<const CleanPost> posts) {
  std::vector<json> records;
  records.reserve(posts.size());
  for (const auto& p : posts) records.push_back(to_json(p));
  jsonl::write(path, records);
}

inline std::vector<CleanPost> load_clean_corpus(const std::filesystem::path& path) {
  std::vector<CleanPost> posts;
  std::unordered_set<std::string> seen;
  jsonl::for_each(path, [&](const json& record, std::size_t line) {
    CleanPost cp;
    try {
      cp.post = post_from_json(record);
    } catch (const ValidationError& e) {
      throw ParseError(path.string(), line, e.what());
    }
    if (!record.contains("clean_text"))
      throw ParseError(path.string(), line, "missing \"clean_text\" (not a cleaned corpus)");
    cp.clean_text = record.at("clean_text").get<std::string>();
    cp.word_count = word_count(cp.clean_text);
    if (!seen.insert(cp.id()).second) throw ParseError(path.string(), line, "duplicate id " + cp.id());
    posts.push_back(std::move(cp));
  });
  return posts;
}

/// Cleans every post and drops those with fewer than cfg.min_words words.
inline std::vector<CleanPost> preprocess(std::span<const Post> posts, const RelevanceConfig& cfg) {
  cfg.validate();
  std::vector<CleanPost> out;
  for (const auto& p : posts) {
    CleanPost cp{p, clean_text(p.text), 0};
    cp.word_count = word_count(cp.clean_text);
    if (cp.word_count >= cfg.min_words) out.push_back(std::move(cp));
  }
  return out;
}

/// Keeps posts whose relevance score is >= cfg.theta.
inline std::vector<CleanPost> filter_relevant(std::span<const CleanPost> posts,
                                              const std::map<std::string, double>& scores,
                                              const RelevanceConfig& cfg) {
  cfg.validate();
  std::string missing;
  for (const auto& p : posts)
    if (!scores.contains(p.id())) missing += (missing.empty() ? "" : ", ") + p.id();
  if (!missing.empty()) throw ValidationError("missing relevance score for post(s): " + missing);

  std::vector<CleanPost> out;
  for (const auto& p : posts) {
    const double s = scores.at(p.id());
    if (!(s >= 0.0 && s <= 1.0))
      throw ValidationError("relevance score for " + p.id() + " outside [0, 1]");
    if (s >= cfg.theta) out.push_back(p);
  }
  return out;
}

/// Relevance scores file: JSONL {post_id, score}.
inline std::map<std::string, double> load_relevance_scores(const std::filesystem::path& path) {
  std::map<std::string, double> scores;
  jsonl::for_each(path, [&](const json& r, std::size_t) {
    scores[r.at("post_id").get<std::string>()] = r.at("score").get<double>();
  });
  return scores;
}

}  // namespace claimagg
