#include "ssr/lm.hpp"

namespace ssr {

CausalLm::CausalLm(ParamStore& ps, const std::string& name, int vocab, int dim, int n_blocks,
                   MixerKind mixer, int mlp_mult, Rng& rng)
    : dim_(dim), vocab_(vocab) {
    if (vocab < 5) fail_validation("vocabulary too small");
    embed = &ps.create(name + ".embed", vocab, dim);
    init_uniform(embed->w, rng, dim);
    for (int i = 0; i < n_blocks; ++i)
        blocks.emplace_back(ps, strf("%s.block%d", name.c_str(), i), dim, mlp_mult, mixer, rng);
    final_ln = LayerNormP(ps, name + ".final_ln", dim);
}

int CausalLm::embed_ids(Ctx& c, const std::vector<int>& ids) const {
    for (int id : ids)
        if (id < 0 || id >= vocab_) fail_validation(strf("token id %d outside vocabulary", id));
    return c.t.embed_rows(c.use(*embed), ids);
}

int CausalLm::hidden(Ctx& c, int x, bool causal) const {
    for (const Block& b : blocks) x = b.apply(c, x, causal);
    return final_ln.apply(c, x);
}

int CausalLm::head(Ctx& c, int h) const { return c.t.matmul_nt(h, c.use(*embed)); }

VisionLm::VisionLm(ParamStore& ps, const std::string& name, int canvas, int patch, int vocab,
                   int dim, int n_blocks, MixerKind mixer, int mlp_mult, Rng& rng)
    : vision(ps, name + ".vision", canvas, patch, 3, dim, 0, MixerKind::attention, mlp_mult, rng),
      lm(ps, name + ".lm", vocab, dim, n_blocks, mixer, mlp_mult, rng) {}

Mat VisionLm::patchify_image(const std::vector<float>& pixels, int h, int w) const {
    return vision.patchify(pixels, h, w);
}

int VisionLm::forward_logits(Ctx& c, const Mat& patches, int extra,
                             const std::vector<int>& text) const {
    int img = vision.apply_mat(c, patches);
    std::vector<int> parts = {img};
    if (extra >= 0) {
        if (c.t.val(extra).cols != lm.dim()) fail_validation("injected rows have wrong width");
        parts.push_back(extra);
    }
    if (!text.empty()) parts.push_back(lm.embed_ids(c, text));
    return lm.logits(c, c.t.concat_rows(parts));
}

std::vector<int> VisionLm::generate(const Mat& patches, const Mat* inject,
                                    const std::vector<int>& prompt, int eos_id,
                                    int max_new) const {
    auto next = [&](const std::vector<int>& so_far) {
        Ctx c(false);
        std::vector<int> text = prompt;
        text.insert(text.end(), so_far.begin(), so_far.end());
        int extra = inject ? c.t.leaf(*inject, false) : -1;
        int lg = forward_logits(c, patches, extra, text);
        const Mat& L = c.t.val(lg);
        const double* row = L.row(L.rows - 1);
        return std::vector<double>(row, row + L.cols);
    };
    return greedy_decode(next, eos_id, max_new);
}

std::vector<int> greedy_decode(
    const std::function<std::vector<double>(const std::vector<int>&)>& next_logits, int eos_id,
    int max_new) {
    std::vector<int> out;
    for (int step = 0; step < max_new; ++step) {
        std::vector<double> lg = next_logits(out);
        if (lg.empty()) fail_validation("logits source returned nothing");
        int best = 0;
        for (size_t i = 1; i < lg.size(); ++i)
            if (lg[i] > lg[best]) best = int(i);
        if (best == eos_id) break;
        out.push_back(best);
    }
    return out;
}

}  // namespace ssr
