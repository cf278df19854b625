// Generates a small planted corpus, runs the full pipeline on it and prints
// the largest clusters with their extractive summaries.
//
//   ./quickstart [out-dir]

#include <iostream>

#include "claimagg/claimagg.hpp"

using namespace claimagg;

int main(int argc, char** argv) {
  const fs::path dir = argc > 1 ? argv[1] : "quickstart-run";
  const fs::path input = dir / "input";

  SyntheticSpec spec;
  spec.groups = 6;
  spec.per_group = 10;
  write_synthetic(generate_synthetic(spec), input);

  RunConfig cfg;
  cfg.corpus = (input / "corpus.jsonl").string();
  cfg.embeddings = (input / "embeddings.bin").string();
  cfg.references = (input / "references.jsonl").string();
  cfg.seed = 1;
  const auto manifest = run_pipeline(cfg, dir);
  std::cout << manifest.stats.dump(2) << "\n\n";

  for (const auto& s : load_summaries(dir / artifact::kSummaries)) {
    if (s.rank >= 3) continue;
    std::cout << "#" << s.rank << " (" << s.member_count << " posts) " << to_string(s.method) << ": " << s.text
              << "\n";
  }
  return 0;
}
