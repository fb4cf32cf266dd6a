#pragma once

#include <functional>
#include <optional>

#include "ssr/encoders.hpp"

namespace ssr {

// Decoder-only language model with a tied input/output embedding. Question
// templates are order insensitive, so the text pathway carries no position
// vectors; ordering information enters only through causal mixing and, on the
// vision side, the patch position table.
class CausalLm {
  public:
    CausalLm() = default;
    CausalLm(ParamStore& ps, const std::string& name, int vocab, int dim, int n_blocks,
             MixerKind mixer, int mlp_mult, Rng& rng);

    int embed_ids(Ctx& c, const std::vector<int>& ids) const;
    int hidden(Ctx& c, int x, bool causal = true) const;
    int head(Ctx& c, int h) const;  // hidden rows to vocab logits, tied weights
    int logits(Ctx& c, int x) const { return head(c, hidden(c, x)); }

    int dim() const { return dim_; }
    int vocab() const { return vocab_; }

    Param* embed = nullptr;
    std::vector<Block> blocks;
    LayerNormP final_ln;

  private:
    int dim_ = 0, vocab_ = 0;
};

// The language model fronted by a patch embedder. Sequences are assembled as
// [image patches; optional injected rows; text embeddings] and run causally
// end to end.
class VisionLm {
  public:
    VisionLm() = default;
    VisionLm(ParamStore& ps, const std::string& name, int canvas, int patch, int vocab, int dim,
             int n_blocks, MixerKind mixer, int mlp_mult, Rng& rng);

    // extra < 0 means no injected rows
    int forward_logits(Ctx& c, const Mat& patches, int extra, const std::vector<int>& text) const;
    Mat patchify_image(const std::vector<float>& pixels, int h, int w) const;
    int n_image_tokens() const { return vision.n_patches(); }

    std::vector<int> generate(const Mat& patches, const Mat* inject,
                              const std::vector<int>& prompt, int eos_id, int max_new) const;

    PatchEncoder vision;  // zero blocks: embedding, positions and a norm
    CausalLm lm;
};

// Greedy decoding against a caller-supplied logits source; ties resolve to
// the lowest token id. Returns generated ids without the terminator.
std::vector<int> greedy_decode(
    const std::function<std::vector<double>(const std::vector<int>&)>& next_logits, int eos_id,
    int max_new);

}  // namespace ssr
