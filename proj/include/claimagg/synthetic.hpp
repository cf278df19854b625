#pragma once

// Planted-group corpus for end-to-end checks: every group shares one claim
// and one embedding center, so the expected clustering is known.

#include <cmath>
#include <filesystem>
#include <string>
#include <vector>

#include "claimagg/corpus.hpp"
#include "claimagg/embedding.hpp"
#include "claimagg/jsonl.hpp"
#include "claimagg/random.hpp"

namespace claimagg {

struct SyntheticSpec {
  std::size_t groups = 20;
  std::size_t per_group = 30;
  std::size_t dim = 256;
  double noise = 0.25;  // norm of the per-post perturbation relative to the unit center
  std::uint64_t seed = 7;
};

struct SyntheticCorpus {
  std::vector<Post> posts;
  EmbeddingMatrix embeddings;
  std::vector<std::size_t> planted;  // group per post, aligned with posts
  std::vector<std::pair<std::string, std::string>> references;  // (reference_id, claim text)
};

namespace synthetic_detail {

inline const std::vector<std::string>& vocabulary() {
  static const std::vector<std::string> words = {
      "vaccine", "mask",    "virus",    "lockdown", "hospital", "doctor",  "school",  "border",   "election",
      "ballot",  "senator", "mayor",    "tax",      "bank",     "market",  "oil",     "climate",  "flood",
      "fire",    "storm",   "bridge",   "train",    "airport",  "police",  "court",   "judge",    "law",
      "mineral", "water",   "bread",    "price",    "salary",   "pension", "factory", "farm",     "cattle",
      "rain",    "drought", "forest",   "river",    "stadium",  "coach",   "player",  "festival", "church",
      "museum",  "library", "minister", "governor", "army",     "soldier", "ship",    "port",     "road",
      "phone",   "network", "signal",   "tower",    "energy",   "power",   "grid",    "solar",    "coal",
      "gold",    "silver",  "coin",     "crypto",   "study",    "report",  "data",    "survey",   "poll"};
  return words;
}

inline const std::vector<std::string>& verbs() {
  static const std::vector<std::string> v = {"causes",   "hides",    "destroys", "funds",   "blocks",  "cures",
                                             "replaces", "controls", "poisons",  "doubles", "cancels", "protects"};
  return v;
}

inline const std::vector<std::string>& decorations() {
  static const std::vector<std::string> d = {"@newsdesk",        "@citizen42",          "#breaking", "#truth",
                                             "https://t.co/abc", "www.example.org/x", "\xF0\x9F\x98\xB7",
                                             "\xF0\x9F\x94\xA5", "\xE2\x9D\x97"};
  return d;
}

inline std::string pick(const std::vector<std::string>& from, Rng& rng) { return from[rng.below(from.size())]; }

}  // namespace synthetic_detail

inline SyntheticCorpus generate_synthetic(const SyntheticSpec& spec) {
  using namespace synthetic_detail;
  if (spec.groups == 0 || spec.per_group == 0 || spec.dim == 0) throw ConfigError("synthetic: empty spec");
  Rng rng(spec.seed);
  SyntheticCorpus out;
  out.embeddings.dim = spec.dim;
  out.embeddings.model_name = "synthetic";

  std::vector<std::vector<std::string>> claims(spec.groups);
  std::vector<std::vector<double>> centers(spec.groups, std::vector<double>(spec.dim));
  for (std::size_t g = 0; g < spec.groups; ++g) {
    auto& c = claims[g];
    c = {"the", pick(vocabulary(), rng), pick(vocabulary(), rng), pick(verbs(), rng), "every",
         pick(vocabulary(), rng), "in", pick(vocabulary(), rng)};
    std::string text;
    for (const auto& w : c) text += (text.empty() ? "" : " ") + w;
    char ref[32];
    std::snprintf(ref, sizeof ref, "news-%02zu", g);
    out.references.emplace_back(ref, text);

    double norm = 0.0;
    for (auto& x : centers[g]) {
      x = rng.normal();
      norm += x * x;
    }
    for (auto& x : centers[g]) x /= std::sqrt(norm);
  }

  const double sd = spec.noise / std::sqrt(static_cast<double>(spec.dim));
  for (std::size_t g = 0; g < spec.groups; ++g) {
    for (std::size_t m = 0; m < spec.per_group; ++m) {
      Post p;
      char id[32];
      std::snprintf(id, sizeof id, "post-%03zu-%02zu", g, m);
      p.id = id;
      // Word-level variation: drop one content word, sometimes add a lead-in and decorations.
      auto words = claims[g];
      words.erase(words.begin() + static_cast<std::ptrdiff_t>(1 + rng.below(words.size() - 1)));
      if (rng.below(3) == 0) words.insert(words.begin(), rng.below(2) ? "apparently" : "wow");
      for (std::uint64_t d = rng.below(3); d > 0; --d)
        words.insert(words.begin() + static_cast<std::ptrdiff_t>(rng.below(words.size() + 1)), pick(decorations(), rng));
      for (const auto& w : words) p.text += (p.text.empty() ? "" : " ") + w;
      p.like_count = static_cast<std::int64_t>(rng.below(500));
      p.repost_count = static_cast<std::int64_t>(rng.below(100));
      p.source_ref = out.references[g].first;
      out.posts.push_back(std::move(p));
      out.planted.push_back(g);

      out.embeddings.post_ids.push_back(out.posts.back().id);
      for (std::size_t k = 0; k < spec.dim; ++k)
        out.embeddings.values.push_back(static_cast<float>(centers[g][k] + sd * rng.normal()));
    }
  }

  // Interleave groups so file order carries no label information.
  std::vector<std::size_t> order(out.posts.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  rng.shuffle(std::span<std::size_t>(order));
  SyntheticCorpus shuffled;
  shuffled.references = out.references;
  shuffled.embeddings.dim = spec.dim;
  shuffled.embeddings.model_name = out.embeddings.model_name;
  for (auto i : order) {
    shuffled.posts.push_back(out.posts[i]);
    shuffled.planted.push_back(out.planted[i]);
    shuffled.embeddings.post_ids.push_back(out.embeddings.post_ids[i]);
    const auto row = out.embeddings.row(i);
    shuffled.embeddings.values.insert(shuffled.embeddings.values.end(), row.begin(), row.end());
  }
  return shuffled;
}

/// Writes corpus.jsonl, embeddings.bin, references.jsonl and planted.jsonl.
inline void write_synthetic(const SyntheticCorpus& s, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  std::vector<json> posts, refs, planted;
  for (const auto& p : s.posts) posts.push_back(to_json(p));
  for (const auto& [id, text] : s.references) refs.push_back({{"reference_id", id}, {"text", text}});
  for (std::size_t i = 0; i < s.posts.size(); ++i) planted.push_back({{"post_id", s.posts[i].id}, {"group", s.planted[i]}});
  jsonl::write(dir / "corpus.jsonl", posts);
  jsonl::write(dir / "references.jsonl", refs);
  jsonl::write(dir / "planted.jsonl", planted);
  save_embeddings(s.embeddings, dir / "embeddings.bin");
}

}  // namespace claimagg
