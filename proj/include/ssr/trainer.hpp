#pragma once

#include <string>
#include <vector>

#include "ssr/checkpoint.hpp"
#include "ssr/config.hpp"
#include "ssr/losses.hpp"
#include "ssr/reasoner.hpp"
#include "ssr/sample.hpp"
#include "ssr/tokenizer.hpp"

namespace ssr {

// Every module built off one config and seed. Parameter names carry the
// prefixes encv, encd, midi, vlm and aligner so training stages can freeze
// whole groups by name.
struct SsrModel {
    RunConfig cfg;
    Tokenizer tok;
    ParamStore ps;
    PatchEncoder enc_v, enc_d;
    LatentReasoner midi;
    VisionLm vlm;
    CausalLm aligner;

    SsrModel(const RunConfig& cfg, Tokenizer tok);
    SsrModel(const SsrModel&) = delete;

    Mat vlm_patches(const Sample& s) const;
    int encode_visual(Ctx& c, const Sample& s) const;
    int encode_depth(Ctx& c, const Sample& s) const;  // depth scaled by the background
    int latents_slot(Ctx& c, const Sample& s) const;
    Mat latents_value(const Sample& s) const;

    std::vector<int> q_ids(const Sample& s) const;
    std::vector<int> rat_ids(const Sample& s) const;
    std::vector<int> ans_ids(const Sample& s) const;

    // the aligner reads and writes the language model's embedding space; its
    // table is copied from the vision lm and frozen before aligner training
    void copy_vlm_embed_to_aligner();

    std::vector<Param*> group(const std::string& prefix) const;
    std::string group_digest(const std::string& prefix) const;
    void set_trainable(const std::vector<std::string>& prefixes);
};

enum class Stage { pretrain_vlm, pretrain_aligner, stage1, stage2 };
const char* stage_name(Stage s);
int stage_epochs(const RunConfig& cfg, Stage s);

// Builds the per-sample loss graph for a stage; shared by training, validation
// and the oracle tests.
SeqLoss build_sample_loss(const SsrModel& m, Ctx& c, Stage stage, const Sample& s);

struct TrainResult {
    int epochs_run = 0;
    int global_steps = 0;
    double train_loss = 0.0;  // mean over the final epoch
    double val_loss = 0.0;
};

// Epoch loop with deterministic shuffling, per-sample tapes, batch-mean
// gradients reduced in a fixed order across workers, global norm clipping and
// AdamW under the warmup+cosine schedule. Appends to train_log.csv in the run
// directory, checkpoints each epoch and resumes bitwise from epoch bounds.
class Trainer {
  public:
    Trainer(SsrModel& model, std::string run_dir);
    TrainResult run(Stage stage, const std::vector<Sample>& train,
                    const std::vector<Sample>& val);
    std::string checkpoint_path(Stage stage, int epoch) const;

  private:
    SsrModel& m_;
    std::string dir_;
    void log_row(const std::string& stage, int epoch, int step, const std::string& split,
                 double loss, double lr);
};

double mean_loss(const SsrModel& m, Stage stage, const std::vector<Sample>& split,
                 int parallelism);

void apply_stage_freezing(SsrModel& m, Stage stage);

}  // namespace ssr
