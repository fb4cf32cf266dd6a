#pragma once

#include <array>
#include <map>
#include <string>

#include "ssr/config.hpp"
#include "ssr/sample.hpp"

namespace ssr {

struct BuildSpec {
    int n = 100;
    std::array<double, 3> ratios = {0.8, 0.1, 0.1};  // train / val / test
    uint64_t seed = 7;
    RunConfig cfg;  // canvas, object counts, depth noise, preamble mix
};

struct BuildResult {
    std::array<int, 3> counts = {0, 0, 0};
    std::map<std::string, int> task_counts;
};

// Emits train/val/test JSONL plus rasters and a manifest under out_dir.
// (seed, spec) fully determines every emitted byte; split sample streams are
// seeded independently so resizing one split does not disturb another.
BuildResult build_dataset(const BuildSpec& spec, const std::string& out_dir);

// builds the i-th record of a split without touching the filesystem
Sample build_sample(const RunConfig& cfg, uint64_t seed, const std::string& split, int index);

extern const char* kSplitNames[3];

}  // namespace ssr
