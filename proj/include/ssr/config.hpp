#pragma once

#include <cstdint>
#include <string>

#include "json.hpp"

namespace ssr {

struct OptimConfig {
    double lr = 2e-5;
    double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
    double weight_decay = 0.01;
    double warmup_ratio = 0.02;
    double clip_norm = 1.0;
};

// Everything a run needs: dimensions, sequence length caps, optimizer
// parameters and the rng seed. Loaded from a hierarchical JSON file, with
// dotted-key command line overrides; unknown keys are rejected.
struct RunConfig {
    uint64_t seed = 7;

    int d_enc = 32, d_midi = 64, d_vlm = 64;
    int latent_tokens = 10;
    int max_question = 256, max_rationale = 1024, max_answer = 256;

    int enc_patch = 8, enc_blocks = 2;
    std::string enc_mixer = "attention";  // attention | mlp

    int midi_blocks = 4;
    std::string midi_mixer = "scan";  // scan | attention
    std::string latent_placement = "append";  // append | interleaved

    int vlm_patch = 8, vlm_blocks = 4, mlp_mult = 4;
    std::string vlm_mixer = "attention";

    int aligner_blocks = 4;
    std::string aligner_mixer = "scan";

    OptimConfig optim;
    int batch_size = 32;
    int pretrain_epochs = 2, aligner_epochs = 2, stage1_epochs = 2, stage2_epochs = 1;
    // per-stage peak learning rates; negative means "use optimizer.lr"
    double pretrain_lr = -1.0, aligner_lr = -1.0, stage1_lr = -1.0, stage2_lr = -1.0;
    bool freeze_vlm_stage2 = false;
    bool train_encoders = true;

    int canvas = 64;
    int min_objects = 2, max_objects = 5;
    double background_depth = 10.0;
    double depth_noise_sigma = 0.0;
    // fraction of generated questions prefixed with the sample's rationale
    // text (full, or facts without the conclusion); used when building
    // pretraining corpora so the base model learns to read in-prompt facts
    double preamble_full_prob = 0.0, preamble_facts_prob = 0.0;

    int parallelism = 4;

    nlohmann::json to_json() const;
    static RunConfig from_json(const nlohmann::json& j);  // strict, validates

    void validate() const;

    double lr_for(const std::string& stage) const;  // pretrain|aligner|stage1|stage2
};

// default -> deep-merge file (if non-empty path) -> dotted overrides -> parse
RunConfig load_config(const std::string& path, const std::vector<std::string>& overrides);

// "a.b.c=value" applied onto a json tree; value parsed as JSON when possible
void apply_dotted_override(nlohmann::json& j, const std::string& spec);

}  // namespace ssr
