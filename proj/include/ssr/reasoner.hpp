#pragma once

#include "ssr/encoders.hpp"

namespace ssr {

// Fuses color and depth patch features into K latent rationale tokens. The
// two feature streams are projected to the reasoner width, K learned seed
// rows are appended (or spread through the sequence when interleaved), the
// blocks mix everything, and the rows at the seed positions are read out and
// projected into the language model's embedding width.
class LatentReasoner {
  public:
    LatentReasoner() = default;
    LatentReasoner(ParamStore& ps, const std::string& name, int d_enc, int d_midi, int d_vlm,
                   int k_latent, int n_blocks, MixerKind mixer, int mlp_mult, bool interleave,
                   Rng& rng);

    // zv, zd are (N x d_enc) tape slots from the encoders
    int latents_pre(Ctx& c, int zv, int zd) const;  // (K x d_midi) before projection
    int latents(Ctx& c, int zv, int zd) const;      // (K x d_vlm)

    int k() const { return k_; }
    std::vector<int> latent_positions(int n_features) const;

    Linear in_v, in_d;
    Param* seed = nullptr;
    std::vector<Block> blocks;
    LayerNormP out_ln;
    Projector phi_r;

  private:
    int k_ = 0;
    bool interleave_ = false;
};

}  // namespace ssr
