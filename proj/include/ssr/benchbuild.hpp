#pragma once

#include "ssr/cache.hpp"

#include "json.hpp"

namespace ssr {

// the fixed task-classification prompt with the question filled in at the end
std::string classify_prompt(const std::string& question);

struct Classification {
    std::string category;  // "spatial" | "general", lowercased
    std::string subtask;   // lowercased subtask label, or "none"
};

// Balanced-brace json object with string category/subtask values. Category
// outside {spatial, general} fails; a failed parse counts as disagreement at
// the call site, never as a retry.
bool parse_classification(const std::string& text, Classification& out);

struct BenchRecord {
    Sample sample;
    std::string category, subtask;
};

struct BenchBuildResult {
    std::vector<BenchRecord> benchmark;
    std::vector<Sample> returned;
    nlohmann::json report;
};

// Classifies every record with both clients; consensus on (category, subtask)
// admits the record with that label, disagreement, "none" verdicts and
// unparseable replies send it back. Input order is preserved in both piles.
BenchBuildResult build_benchmark(const std::vector<Sample>& records, ExternalClient& a,
                                 ExternalClient& b, ResponseCache* cache, int parallelism = 4);

// dir/<name>.jsonl in the dataset record schema plus category/subtask keys;
// raster paths stay relative to dir, so writing next to the source split
// keeps them resolvable
void write_benchmark(const std::string& dir, const std::string& name,
                     const std::vector<BenchRecord>& records);
std::vector<BenchRecord> read_benchmark(const std::string& dir, const std::string& name,
                                        bool load_pixels = true);

// ids present in both lists, for the no-overlap guarantee between a benchmark
// and the training splits it was carved from
std::vector<std::string> overlapping_ids(const std::vector<BenchRecord>& bench,
                                         const std::vector<Sample>& split);

}  // namespace ssr
