#include "ssr/encoders.hpp"

namespace ssr {

PatchEncoder::PatchEncoder(ParamStore& ps, const std::string& name, int canvas, int patch,
                           int channels, int dim, int n_blocks, MixerKind mixer, int mlp_mult,
                           Rng& rng)
    : canvas_(canvas), patch_(patch), channels_(channels), dim_(dim) {
    if (canvas <= 0 || patch <= 0 || canvas % patch != 0)
        fail_validation(strf("patch %d does not tile canvas %d", patch, canvas));
    int side = canvas / patch;
    n_patches_ = side * side;
    embed = Linear(ps, name + ".embed", patch * patch * channels, dim, rng);
    pos = &ps.create(name + ".pos", n_patches_, dim);
    init_uniform(pos->w, rng, dim);
    for (int i = 0; i < n_blocks; ++i)
        blocks.emplace_back(ps, strf("%s.block%d", name.c_str(), i), dim, mlp_mult, mixer, rng);
    out_ln = LayerNormP(ps, name + ".out_ln", dim);
}

Mat PatchEncoder::patchify(const std::vector<float>& pixels, int h, int w) const {
    if (h != canvas_ || w != canvas_)
        fail_validation(strf("encoder built for %dx%d, got %dx%d", canvas_, canvas_, h, w));
    if (pixels.size() != size_t(h) * size_t(w) * size_t(channels_))
        fail_validation(strf("pixel buffer has %zu values, want %zu", pixels.size(),
                             size_t(h) * w * channels_));
    int side = canvas_ / patch_;
    Mat out(n_patches_, patch_ * patch_ * channels_);
    for (int pr = 0; pr < side; ++pr)
        for (int pc = 0; pc < side; ++pc) {
            double* row = out.row(pr * side + pc);
            int i = 0;
            for (int dy = 0; dy < patch_; ++dy)
                for (int dx = 0; dx < patch_; ++dx)
                    for (int ch = 0; ch < channels_; ++ch)
                        row[i++] = pixels[(size_t(pr * patch_ + dy) * w + (pc * patch_ + dx)) *
                                              channels_ +
                                          ch];
        }
    return out;
}

int PatchEncoder::apply_mat(Ctx& c, const Mat& patches) const {
    if (patches.rows != n_patches_ || patches.cols != patch_ * patch_ * channels_)
        fail_validation("patch matrix shape mismatch");
    int x = embed.apply(c, c.t.leaf(patches, false));
    x = c.t.add(x, c.use(*pos));
    for (const Block& b : blocks) x = b.apply(c, x, false);
    return out_ln.apply(c, x);
}

int PatchEncoder::apply(Ctx& c, const std::vector<float>& pixels, int h, int w) const {
    return apply_mat(c, patchify(pixels, h, w));
}

Projector::Projector(ParamStore& ps, const std::string& name, int in, int out, Rng& rng)
    : fc1(ps, name + ".fc1", in, out, rng), fc2(ps, name + ".fc2", out, out, rng) {}

int Projector::apply(Ctx& c, int x) const { return fc2.apply(c, c.t.gelu(fc1.apply(c, x))); }

}  // namespace ssr
