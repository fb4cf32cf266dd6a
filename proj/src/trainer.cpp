#include "ssr/trainer.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>

#include "ssr/parallel.hpp"

namespace ssr {

namespace fs = std::filesystem;
using nlohmann::json;

SsrModel::SsrModel(const RunConfig& cfg_in, Tokenizer tok_in) : cfg(cfg_in), tok(std::move(tok_in)) {
    cfg.validate();
    Rng rng(mix_seed(cfg.seed, "model"));
    enc_v = PatchEncoder(ps, "encv", cfg.canvas, cfg.enc_patch, 3, cfg.d_enc, cfg.enc_blocks,
                         mixer_from_name(cfg.enc_mixer), cfg.mlp_mult, rng);
    enc_d = PatchEncoder(ps, "encd", cfg.canvas, cfg.enc_patch, 1, cfg.d_enc, cfg.enc_blocks,
                         mixer_from_name(cfg.enc_mixer), cfg.mlp_mult, rng);
    midi = LatentReasoner(ps, "midi", cfg.d_enc, cfg.d_midi, cfg.d_vlm, cfg.latent_tokens,
                          cfg.midi_blocks, mixer_from_name(cfg.midi_mixer), cfg.mlp_mult,
                          cfg.latent_placement == "interleaved", rng);
    vlm = VisionLm(ps, "vlm", cfg.canvas, cfg.vlm_patch, tok.size(), cfg.d_vlm, cfg.vlm_blocks,
                   mixer_from_name(cfg.vlm_mixer), cfg.mlp_mult, rng);
    aligner = CausalLm(ps, "aligner", tok.size(), cfg.d_vlm, cfg.aligner_blocks,
                       mixer_from_name(cfg.aligner_mixer), cfg.mlp_mult, rng);
}

Mat SsrModel::vlm_patches(const Sample& s) const {
    if (s.image.empty()) fail_validation(strf("sample %s has no pixels loaded", s.id.c_str()));
    return vlm.patchify_image(s.image, s.h, s.w);
}

int SsrModel::encode_visual(Ctx& c, const Sample& s) const {
    if (s.image.empty()) fail_validation(strf("sample %s has no pixels loaded", s.id.c_str()));
    return enc_v.apply(c, s.image, s.h, s.w);
}

int SsrModel::encode_depth(Ctx& c, const Sample& s) const {
    if (s.depth.empty()) fail_validation(strf("sample %s has no depth loaded", s.id.c_str()));
    std::vector<float> scaled(s.depth.size());
    float inv = 1.0f / float(cfg.background_depth);
    for (size_t i = 0; i < s.depth.size(); ++i) scaled[i] = s.depth[i] * inv;
    return enc_d.apply(c, scaled, s.h, s.w);
}

int SsrModel::latents_slot(Ctx& c, const Sample& s) const {
    return midi.latents(c, encode_visual(c, s), encode_depth(c, s));
}

Mat SsrModel::latents_value(const Sample& s) const {
    Ctx c(false);
    return c.t.val(latents_slot(c, s));
}

std::vector<int> SsrModel::q_ids(const Sample& s) const {
    return tok.encode(s.question, cfg.max_question);
}

std::vector<int> SsrModel::rat_ids(const Sample& s) const {
    if (!s.rationale) fail_validation(strf("sample %s has no rationale", s.id.c_str()));
    return tok.encode(*s.rationale, cfg.max_rationale);
}

std::vector<int> SsrModel::ans_ids(const Sample& s) const {
    return tok.encode(s.answer, cfg.max_answer);
}

void SsrModel::copy_vlm_embed_to_aligner() {
    aligner.embed->w = vlm.lm.embed->w;
    aligner.embed->trainable = false;
}

std::vector<Param*> SsrModel::group(const std::string& prefix) const {
    std::vector<Param*> out;
    for (Param* p : ps.all())
        if (p->name.rfind(prefix, 0) == 0) out.push_back(p);
    if (out.empty()) fail_validation(strf("no parameters under %s", prefix.c_str()));
    return out;
}

std::string SsrModel::group_digest(const std::string& prefix) const {
    return params_digest(group(prefix));
}

void SsrModel::set_trainable(const std::vector<std::string>& prefixes) {
    for (Param* p : ps.all()) {
        bool on = false;
        for (const std::string& pre : prefixes)
            if (p->name.rfind(pre, 0) == 0) on = true;
        p->trainable = on;
    }
}

const char* stage_name(Stage s) {
    switch (s) {
        case Stage::pretrain_vlm: return "pretrain_vlm";
        case Stage::pretrain_aligner: return "pretrain_aligner";
        case Stage::stage1: return "stage1";
        case Stage::stage2: return "stage2";
    }
    return "?";
}

int stage_epochs(const RunConfig& cfg, Stage s) {
    switch (s) {
        case Stage::pretrain_vlm: return cfg.pretrain_epochs;
        case Stage::pretrain_aligner: return cfg.aligner_epochs;
        case Stage::stage1: return cfg.stage1_epochs;
        case Stage::stage2: return cfg.stage2_epochs;
    }
    return 0;
}

namespace {

const char* stage_lr_key(Stage s) {
    switch (s) {
        case Stage::pretrain_vlm: return "pretrain";
        case Stage::pretrain_aligner: return "aligner";
        case Stage::stage1: return "stage1";
        case Stage::stage2: return "stage2";
    }
    return "?";
}

}  // namespace

void apply_stage_freezing(SsrModel& m, Stage stage) {
    switch (stage) {
        case Stage::pretrain_vlm:
            m.set_trainable({"vlm."});
            break;
        case Stage::pretrain_aligner:
            m.copy_vlm_embed_to_aligner();
            m.set_trainable({"aligner."});
            m.aligner.embed->trainable = false;
            break;
        case Stage::stage1: {
            std::vector<std::string> on = {"midi."};
            if (m.cfg.train_encoders) {
                on.push_back("encv.");
                on.push_back("encd.");
            }
            m.set_trainable(on);
            break;
        }
        case Stage::stage2: {
            std::vector<std::string> on = {"midi."};
            if (m.cfg.train_encoders) {
                on.push_back("encv.");
                on.push_back("encd.");
            }
            if (!m.cfg.freeze_vlm_stage2) on.push_back("vlm.");
            m.set_trainable(on);
            break;
        }
    }
}

SeqLoss build_sample_loss(const SsrModel& m, Ctx& c, Stage stage, const Sample& s) {
    int eos = Tokenizer::kEos;
    switch (stage) {
        case Stage::pretrain_vlm:
            return vlm_pretrain_loss(c, m.vlm, m.vlm_patches(s), m.q_ids(s), m.ans_ids(s), eos);
        case Stage::pretrain_aligner:
            return aligner_pretrain_loss(c, m.aligner, m.cfg.latent_tokens,
                                         Tokenizer::kLatentMarker, m.q_ids(s), m.rat_ids(s), eos);
        case Stage::stage1:
            return stage1_loss(c, m.aligner, m.latents_slot(c, s), m.q_ids(s), m.rat_ids(s), eos);
        case Stage::stage2:
            return stage2_loss(c, m.vlm, m.vlm_patches(s), m.latents_slot(c, s), m.q_ids(s),
                               m.ans_ids(s), eos);
    }
    fail_validation("unknown stage");
}

double mean_loss(const SsrModel& m, Stage stage, const std::vector<Sample>& split,
                 int parallelism) {
    if (split.empty()) fail_validation("cannot evaluate an empty split");
    std::vector<double> losses(split.size());
    parallel_indexed(int(split.size()), parallelism, [&](int i, int) {
        Ctx c(false);
        SeqLoss sl = build_sample_loss(m, c, stage, split[i]);
        losses[i] = c.t.val(sl.slot).a[0];
    });
    double total = 0.0;
    for (double x : losses) total += x;
    return total / double(losses.size());
}

Trainer::Trainer(SsrModel& model, std::string run_dir) : m_(model), dir_(std::move(run_dir)) {
    fs::create_directories(dir_);
}

std::string Trainer::checkpoint_path(Stage stage, int epoch) const {
    return dir_ + strf("/ckpt_%s_e%d.bin", stage_name(stage), epoch);
}

void Trainer::log_row(const std::string& stage, int epoch, int step, const std::string& split,
                      double loss, double lr) {
    std::string path = dir_ + "/train_log.csv";
    bool fresh = !fs::exists(path);
    std::ofstream out(path, std::ios::app);
    if (fresh) out << "stage,epoch,step,split,loss,lr\n";
    out << stage << "," << epoch << "," << step << "," << split << "," << strf("%.10g", loss)
        << "," << strf("%.10g", lr) << "\n";
}

TrainResult Trainer::run(Stage stage, const std::vector<Sample>& train,
                         const std::vector<Sample>& val) {
    if (train.empty()) fail_validation("training split is empty");
    const RunConfig& cfg = m_.cfg;
    apply_stage_freezing(m_, stage);
    AdamW opt(m_.ps.trainable(), cfg.optim);

    int epochs = stage_epochs(cfg, stage);
    if (epochs < 1) fail_validation(strf("%s has no epochs configured", stage_name(stage)));
    int n = int(train.size());
    int batch = std::max(1, cfg.batch_size);
    int steps_per_epoch = (n + batch - 1) / batch;
    LrSchedule sched{cfg.lr_for(stage_lr_key(stage)), epochs * steps_per_epoch,
                     cfg.optim.warmup_ratio};
    sched.validate();

    int start_epoch = 0, global_step = 0;
    for (int e = epochs - 1; e >= 0; --e) {
        std::string ckpt = checkpoint_path(stage, e);
        if (!fs::exists(ckpt)) continue;
        json header = load_checkpoint(ckpt, m_.ps, &opt);
        const json& meta = header.at("meta");
        if (meta.at("stage").get<std::string>() != stage_name(stage))
            fail_validation("checkpoint belongs to another stage");
        start_epoch = meta.at("epoch").get<int>() + 1;
        global_step = meta.at("global_step").get<int>();
        break;
    }

    TrainResult res;
    res.global_steps = global_step;
    for (int epoch = start_epoch; epoch < epochs; ++epoch) {
        std::vector<int> order(n);
        for (int i = 0; i < n; ++i) order[i] = i;
        Rng shuffle_rng(mix_seed(cfg.seed, strf("%s-shuffle-%d", stage_name(stage), epoch)));
        shuffle_rng.shuffle(order);

        double epoch_loss = 0.0;
        int counted = 0;
        for (int b0 = 0; b0 < n; b0 += batch) {
            int bn = std::min(batch, n - b0);
            m_.ps.zero_grads();
            int workers = std::max(1, std::min(cfg.parallelism, bn));
            std::vector<GradBuffer> bufs(workers);
            std::vector<double> sample_loss(bn);
            parallel_indexed(bn, workers, [&](int i, int w) {
                const Sample& s = train[order[b0 + i]];
                Ctx c(true);
                SeqLoss sl = build_sample_loss(m_, c, stage, s);
                sample_loss[i] = c.t.val(sl.slot).a[0];
                c.t.backward(sl.slot);
                c.harvest_into(bufs[w]);
            });
            double batch_loss = 0.0;
            for (double x : sample_loss) batch_loss += x;
            batch_loss /= bn;
            if (!std::isfinite(batch_loss))
                fail_runtime(strf("%s loss went non-finite at step %d; last checkpoint kept",
                                  stage_name(stage), global_step));
            for (GradBuffer& buf : bufs) {
                buf.scale(1.0 / double(bn));
                buf.add_into_params(m_.ps.all());
            }
            double lr = sched.at(global_step);
            clip_global_norm(opt.params(), cfg.optim.clip_norm);
            opt.step(lr);
            log_row(stage_name(stage), epoch, global_step, "train", batch_loss, lr);
            epoch_loss += batch_loss * bn;
            counted += bn;
            ++global_step;
        }
        res.train_loss = epoch_loss / counted;
        res.val_loss = val.empty() ? 0.0 : mean_loss(m_, stage, val, cfg.parallelism);
        if (!val.empty())
            log_row(stage_name(stage), epoch, global_step, "val", res.val_loss, sched.at(global_step));
        res.epochs_run = epoch - start_epoch + 1;
        res.global_steps = global_step;

        json meta = {{"stage", stage_name(stage)},
                     {"epoch", epoch},
                     {"global_step", global_step},
                     {"epochs_total", epochs},
                     {"train_loss", res.train_loss},
                     {"val_loss", res.val_loss}};
        save_checkpoint(checkpoint_path(stage, epoch), m_.ps, &opt, cfg.to_json(), meta);
        printf("[%s] epoch %d/%d train %.4f val %.4f (%d steps)\n", stage_name(stage), epoch + 1,
               epochs, res.train_loss, res.val_loss, global_step);
        fflush(stdout);
    }
    return res;
}

}  // namespace ssr
