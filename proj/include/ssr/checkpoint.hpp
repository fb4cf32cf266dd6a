#pragma once

#include <string>

#include "json.hpp"
#include "ssr/layers.hpp"
#include "ssr/optim.hpp"

namespace ssr {

// Single-file binary checkpoint: a magic line, a length-prefixed JSON header
// describing named parameter blocks, optimizer moments and metadata, then one
// raw blob of doubles. The header records a digest of the blob, loading
// verifies it, and writes go through a temp file plus rename so a crash never
// leaves a torn checkpoint. Parameters are matched strictly by name.
void save_checkpoint(const std::string& path, const ParamStore& ps, const AdamW* opt,
                     const nlohmann::json& config_echo, const nlohmann::json& meta);

// Loads values into an existing store built with the same architecture.
// Returns the header; throws when names, shapes or the digest disagree.
nlohmann::json load_checkpoint(const std::string& path, ParamStore& ps, AdamW* opt);

// Header-only read for inspection.
nlohmann::json read_checkpoint_header(const std::string& path);

}  // namespace ssr
