#pragma once

#include "ssr/layers.hpp"

namespace ssr {

// Non-overlapping square patches flattened to rows, linearly embedded, tagged
// with learned per-patch position vectors, then mixed by bidirectional
// blocks. channels is 3 for color input and 1 for depth input.
class PatchEncoder {
  public:
    PatchEncoder() = default;
    PatchEncoder(ParamStore& ps, const std::string& name, int canvas, int patch, int channels,
                 int dim, int blocks, MixerKind mixer, int mlp_mult, Rng& rng);

    Mat patchify(const std::vector<float>& pixels, int h, int w) const;
    int apply(Ctx& c, const std::vector<float>& pixels, int h, int w) const;
    int apply_mat(Ctx& c, const Mat& patches) const;

    int n_patches() const { return n_patches_; }
    int dim() const { return dim_; }

    Linear embed;
    Param* pos = nullptr;
    std::vector<Block> blocks;
    LayerNormP out_ln;

  private:
    int canvas_ = 0, patch_ = 0, channels_ = 0, dim_ = 0, n_patches_ = 0;
};

// Two-layer projection head used to move features between embedding spaces.
class Projector {
  public:
    Projector() = default;
    Projector(ParamStore& ps, const std::string& name, int in, int out, Rng& rng);
    int apply(Ctx& c, int x) const;
    Linear fc1, fc2;
};

}  // namespace ssr
