#pragma once

#include "ssr/lm.hpp"

namespace ssr {

// Mean next-token loss over text[seg_begin, seg_end). The sequence on the
// tape is [prefix rows; text rows]; the row holding text[i] is prefix_len + i
// and its logits come from the row before it. The mean runs over the listed
// positions only, so the terminator must already be part of text if it is to
// count.
int segment_ce(Tape& t, int logits, int prefix_len, const std::vector<int>& text, int seg_begin,
               int seg_end);

std::vector<int> with_eos(std::vector<int> ids, int eos_id);

struct SeqLoss {
    int slot = -1;
    int tokens = 0;  // positions averaged over, terminator included
};

// [image patches; question; answer eos], supervised on the answer
SeqLoss vlm_pretrain_loss(Ctx& c, const VisionLm& vlm, const Mat& patches,
                          const std::vector<int>& question, const std::vector<int>& answer,
                          int eos_id);

// [marker row x k; question; rationale eos], supervised on the rationale;
// teaches the aligner to decode rationales behind k reserved slots
SeqLoss aligner_pretrain_loss(Ctx& c, const CausalLm& aligner, int k, int marker_id,
                              const std::vector<int>& question, const std::vector<int>& rationale,
                              int eos_id);

// [latent rows; question; rationale eos] through the aligner; latents is a
// tape slot so gradients continue into whatever produced it
SeqLoss stage1_loss(Ctx& c, const CausalLm& aligner, int latents,
                    const std::vector<int>& question, const std::vector<int>& rationale,
                    int eos_id);

// [image patches; latent rows; question; answer eos] through the vision lm
SeqLoss stage2_loss(Ctx& c, const VisionLm& vlm, const Mat& patches, int latents,
                    const std::vector<int>& question, const std::vector<int>& answer, int eos_id);

}  // namespace ssr
