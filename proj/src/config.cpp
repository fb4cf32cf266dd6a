#include "ssr/config.hpp"

#include <fstream>
#include <set>

#include "ssr/common.hpp"

using nlohmann::json;

namespace ssr {

json RunConfig::to_json() const {
    json j;
    j["seed"] = seed;
    j["dims"] = {{"d_enc", d_enc}, {"d_midi", d_midi}, {"d_vlm", d_vlm}};
    j["latent_tokens"] = latent_tokens;
    j["lengths"] = {{"question", max_question}, {"rationale", max_rationale}, {"answer", max_answer}};
    j["encoder"] = {{"patch", enc_patch}, {"blocks", enc_blocks}, {"mixer", enc_mixer}};
    j["reasoner"] = {{"blocks", midi_blocks}, {"mixer", midi_mixer}, {"latent_placement", latent_placement}};
    j["vlm"] = {{"patch", vlm_patch}, {"blocks", vlm_blocks}, {"mixer", vlm_mixer}, {"mlp_mult", mlp_mult}};
    j["aligner"] = {{"blocks", aligner_blocks}, {"mixer", aligner_mixer}};
    j["optimizer"] = {{"lr", optim.lr},           {"beta1", optim.beta1},
                      {"beta2", optim.beta2},     {"eps", optim.eps},
                      {"weight_decay", optim.weight_decay},
                      {"warmup_ratio", optim.warmup_ratio},
                      {"clip_norm", optim.clip_norm}};
    j["train"] = {{"batch_size", batch_size},
                  {"pretrain_epochs", pretrain_epochs},
                  {"aligner_epochs", aligner_epochs},
                  {"stage1_epochs", stage1_epochs},
                  {"stage2_epochs", stage2_epochs},
                  {"pretrain_lr", pretrain_lr},
                  {"aligner_lr", aligner_lr},
                  {"stage1_lr", stage1_lr},
                  {"stage2_lr", stage2_lr},
                  {"freeze_vlm_stage2", freeze_vlm_stage2},
                  {"train_encoders", train_encoders}};
    j["data"] = {{"canvas", canvas},
                 {"min_objects", min_objects},
                 {"max_objects", max_objects},
                 {"background_depth", background_depth},
                 {"depth_noise_sigma", depth_noise_sigma},
                 {"preamble_full_prob", preamble_full_prob},
                 {"preamble_facts_prob", preamble_facts_prob}};
    j["pipeline"] = {{"parallelism", parallelism}};
    return j;
}

namespace {

// rejects keys that the reference layout does not contain, recursing into
// sections so the error names the full dotted path
void check_unknown(const json& ref, const json& given, const std::string& prefix) {
    if (!given.is_object()) return;
    for (auto it = given.begin(); it != given.end(); ++it) {
        std::string path = prefix.empty() ? it.key() : prefix + "." + it.key();
        if (!ref.is_object() || !ref.contains(it.key()))
            fail_validation("unknown config key: " + path);
        if (it.value().is_object()) check_unknown(ref.at(it.key()), it.value(), path);
    }
}

void deep_merge(json& base, const json& over) {
    if (!over.is_object()) {
        base = over;
        return;
    }
    for (auto it = over.begin(); it != over.end(); ++it) {
        if (base.is_object() && base.contains(it.key()) && base[it.key()].is_object() &&
            it.value().is_object())
            deep_merge(base[it.key()], it.value());
        else
            base[it.key()] = it.value();
    }
}

template <class T>
T get_at(const json& j, const char* sec, const char* key) {
    try {
        return j.at(sec).at(key).get<T>();
    } catch (const std::exception& e) {
        fail_validation(strf("config key %s.%s: %s", sec, key, e.what()));
    }
}

}  // namespace

RunConfig RunConfig::from_json(const json& j) {
    check_unknown(RunConfig().to_json(), j, "");
    RunConfig c;
    json base = c.to_json();
    deep_merge(base, j);
    const json& b = base;
    try {
        c.seed = b.at("seed").get<uint64_t>();
        c.latent_tokens = b.at("latent_tokens").get<int>();
    } catch (const std::exception& e) {
        fail_validation(std::string("config: ") + e.what());
    }
    c.d_enc = get_at<int>(b, "dims", "d_enc");
    c.d_midi = get_at<int>(b, "dims", "d_midi");
    c.d_vlm = get_at<int>(b, "dims", "d_vlm");
    c.max_question = get_at<int>(b, "lengths", "question");
    c.max_rationale = get_at<int>(b, "lengths", "rationale");
    c.max_answer = get_at<int>(b, "lengths", "answer");
    c.enc_patch = get_at<int>(b, "encoder", "patch");
    c.enc_blocks = get_at<int>(b, "encoder", "blocks");
    c.enc_mixer = get_at<std::string>(b, "encoder", "mixer");
    c.midi_blocks = get_at<int>(b, "reasoner", "blocks");
    c.midi_mixer = get_at<std::string>(b, "reasoner", "mixer");
    c.latent_placement = get_at<std::string>(b, "reasoner", "latent_placement");
    c.vlm_patch = get_at<int>(b, "vlm", "patch");
    c.vlm_blocks = get_at<int>(b, "vlm", "blocks");
    c.vlm_mixer = get_at<std::string>(b, "vlm", "mixer");
    c.mlp_mult = get_at<int>(b, "vlm", "mlp_mult");
    c.aligner_blocks = get_at<int>(b, "aligner", "blocks");
    c.aligner_mixer = get_at<std::string>(b, "aligner", "mixer");
    c.optim.lr = get_at<double>(b, "optimizer", "lr");
    c.optim.beta1 = get_at<double>(b, "optimizer", "beta1");
    c.optim.beta2 = get_at<double>(b, "optimizer", "beta2");
    c.optim.eps = get_at<double>(b, "optimizer", "eps");
    c.optim.weight_decay = get_at<double>(b, "optimizer", "weight_decay");
    c.optim.warmup_ratio = get_at<double>(b, "optimizer", "warmup_ratio");
    c.optim.clip_norm = get_at<double>(b, "optimizer", "clip_norm");
    c.batch_size = get_at<int>(b, "train", "batch_size");
    c.pretrain_epochs = get_at<int>(b, "train", "pretrain_epochs");
    c.aligner_epochs = get_at<int>(b, "train", "aligner_epochs");
    c.stage1_epochs = get_at<int>(b, "train", "stage1_epochs");
    c.stage2_epochs = get_at<int>(b, "train", "stage2_epochs");
    c.pretrain_lr = get_at<double>(b, "train", "pretrain_lr");
    c.aligner_lr = get_at<double>(b, "train", "aligner_lr");
    c.stage1_lr = get_at<double>(b, "train", "stage1_lr");
    c.stage2_lr = get_at<double>(b, "train", "stage2_lr");
    c.freeze_vlm_stage2 = get_at<bool>(b, "train", "freeze_vlm_stage2");
    c.train_encoders = get_at<bool>(b, "train", "train_encoders");
    c.canvas = get_at<int>(b, "data", "canvas");
    c.min_objects = get_at<int>(b, "data", "min_objects");
    c.max_objects = get_at<int>(b, "data", "max_objects");
    c.background_depth = get_at<double>(b, "data", "background_depth");
    c.depth_noise_sigma = get_at<double>(b, "data", "depth_noise_sigma");
    c.preamble_full_prob = get_at<double>(b, "data", "preamble_full_prob");
    c.preamble_facts_prob = get_at<double>(b, "data", "preamble_facts_prob");
    c.parallelism = get_at<int>(b, "pipeline", "parallelism");
    c.validate();
    return c;
}

void RunConfig::validate() const {
    auto pos = [](int v, const char* what) {
        if (v < 1) fail_validation(strf("config: %s must be >= 1", what));
    };
    pos(d_enc, "dims.d_enc");
    pos(d_midi, "dims.d_midi");
    pos(d_vlm, "dims.d_vlm");
    pos(latent_tokens, "latent_tokens");
    pos(max_question, "lengths.question");
    pos(max_rationale, "lengths.rationale");
    pos(max_answer, "lengths.answer");
    pos(enc_patch, "encoder.patch");
    pos(vlm_patch, "vlm.patch");
    pos(mlp_mult, "vlm.mlp_mult");
    pos(batch_size, "train.batch_size");
    pos(parallelism, "pipeline.parallelism");
    if (enc_blocks < 0 || midi_blocks < 0 || vlm_blocks < 0 || aligner_blocks < 0)
        fail_validation("config: block counts must be >= 0");
    if (pretrain_epochs < 0 || aligner_epochs < 0 || stage1_epochs < 0 || stage2_epochs < 0)
        fail_validation("config: epochs must be >= 0");
    if (optim.lr <= 0.0) fail_validation("config: optimizer.lr must be > 0");
    if (optim.warmup_ratio < 0.0 || optim.warmup_ratio >= 1.0)
        fail_validation("config: optimizer.warmup_ratio must be in [0, 1)");
    if (optim.clip_norm <= 0.0) fail_validation("config: optimizer.clip_norm must be > 0");
    auto mixer_ok = [](const std::string& m, bool allow_mlp) {
        return m == "attention" || m == "scan" || (allow_mlp && m == "mlp");
    };
    if (!mixer_ok(enc_mixer, true)) fail_validation("config: encoder.mixer must be attention|scan|mlp");
    if (!mixer_ok(midi_mixer, false)) fail_validation("config: reasoner.mixer must be attention|scan");
    if (!mixer_ok(vlm_mixer, false)) fail_validation("config: vlm.mixer must be attention|scan");
    if (!mixer_ok(aligner_mixer, false)) fail_validation("config: aligner.mixer must be attention|scan");
    if (latent_placement != "append" && latent_placement != "interleaved")
        fail_validation("config: reasoner.latent_placement must be append|interleaved");
    if (canvas < 64) fail_validation("config: data.canvas must be >= 64");
    if (canvas % enc_patch != 0 || canvas % vlm_patch != 0)
        fail_validation("config: patch size must divide data.canvas");
    if (min_objects < 1 || max_objects < min_objects || max_objects > 8)
        fail_validation("config: data.min_objects/max_objects must satisfy 1 <= min <= max <= 8");
    if (background_depth <= 0.0) fail_validation("config: data.background_depth must be > 0");
    if (depth_noise_sigma < 0.0) fail_validation("config: data.depth_noise_sigma must be >= 0");
    if (preamble_full_prob < 0.0 || preamble_facts_prob < 0.0 ||
        preamble_full_prob + preamble_facts_prob > 1.0)
        fail_validation("config: preamble probabilities must be >= 0 and sum to <= 1");
}

double RunConfig::lr_for(const std::string& stage) const {
    double v = -1.0;
    if (stage == "pretrain") v = pretrain_lr;
    else if (stage == "aligner") v = aligner_lr;
    else if (stage == "stage1") v = stage1_lr;
    else if (stage == "stage2") v = stage2_lr;
    else fail_runtime("lr_for: unknown stage " + stage);
    return v > 0.0 ? v : optim.lr;
}

void apply_dotted_override(json& j, const std::string& spec) {
    auto eq = spec.find('=');
    if (eq == std::string::npos || eq == 0)
        fail_validation("override must look like key.path=value: " + spec);
    std::string path = spec.substr(0, eq), val = spec.substr(eq + 1);
    json parsed;
    try {
        parsed = json::parse(val);
    } catch (...) {
        parsed = val;  // bare strings allowed without quotes
    }
    json* cur = &j;
    size_t pos = 0;
    while (true) {
        size_t dot = path.find('.', pos);
        std::string key = path.substr(pos, dot == std::string::npos ? std::string::npos : dot - pos);
        if (key.empty()) fail_validation("bad override path: " + path);
        if (dot == std::string::npos) {
            (*cur)[key] = parsed;
            break;
        }
        cur = &(*cur)[key];
        pos = dot + 1;
    }
}

RunConfig load_config(const std::string& path, const std::vector<std::string>& overrides) {
    json j = json::object();
    if (!path.empty()) {
        std::ifstream is(path);
        if (!is) fail_validation("cannot open config file: " + path);
        try {
            is >> j;
        } catch (const std::exception& e) {
            fail_validation("config file " + path + ": " + e.what());
        }
    }
    for (const auto& ov : overrides) apply_dotted_override(j, ov);
    return RunConfig::from_json(j);
}

}  // namespace ssr
