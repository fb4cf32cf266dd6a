#include "ssr/reasoner.hpp"

namespace ssr {

LatentReasoner::LatentReasoner(ParamStore& ps, const std::string& name, int d_enc, int d_midi,
                               int d_vlm, int k_latent, int n_blocks, MixerKind mixer,
                               int mlp_mult, bool interleave, Rng& rng)
    : in_v(ps, name + ".in_v", d_enc, d_midi, rng),
      in_d(ps, name + ".in_d", d_enc, d_midi, rng),
      phi_r(ps, name + ".phi_r", d_midi, d_vlm, rng),
      k_(k_latent),
      interleave_(interleave) {
    if (k_latent < 1) fail_validation("need at least one latent token");
    seed = &ps.create(name + ".seed", k_latent, d_midi);
    init_uniform(seed->w, rng, d_midi);
    for (int i = 0; i < n_blocks; ++i)
        blocks.emplace_back(ps, strf("%s.block%d", name.c_str(), i), d_midi, mlp_mult, mixer, rng);
    out_ln = LayerNormP(ps, name + ".out_ln", d_midi);
}

std::vector<int> LatentReasoner::latent_positions(int n_features) const {
    std::vector<int> pos;
    if (!interleave_) {
        for (int i = 0; i < k_; ++i) pos.push_back(n_features + i);
        return pos;
    }
    // latent i sits just before feature (i+1)*n_features/(k+1), so the slots
    // are spread evenly and each one carries an offset for those placed before
    int li = 0, at = 0;
    for (int f = 0; f <= n_features; ++f) {
        while (li < k_ && (li + 1) * n_features / (k_ + 1) == f) {
            pos.push_back(at++);
            ++li;
        }
        if (f < n_features) ++at;
    }
    return pos;
}

int LatentReasoner::latents_pre(Ctx& c, int zv, int zd) const {
    int fv = in_v.apply(c, zv);
    int fd = in_d.apply(c, zd);
    int n_features = c.t.val(fv).rows + c.t.val(fd).rows;
    std::vector<int> pos = latent_positions(n_features);
    int x;
    if (!interleave_) {
        x = c.t.concat_rows({fv, fd, c.use(*seed)});
    } else {
        // permute [features; seeds] into the interleaved order
        std::vector<int> order(n_features + k_, -1);
        for (int i = 0; i < k_; ++i) order[pos[i]] = n_features + i;
        int f = 0;
        for (int& o : order)
            if (o < 0) o = f++;
        x = c.t.take_rows(c.t.concat_rows({fv, fd, c.use(*seed)}), order);
    }
    for (const Block& b : blocks) x = b.apply(c, x, false);
    return c.t.take_rows(out_ln.apply(c, x), pos);
}

int LatentReasoner::latents(Ctx& c, int zv, int zd) const {
    return phi_r.apply(c, latents_pre(c, zv, zd));
}

}  // namespace ssr
