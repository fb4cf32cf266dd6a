#include "ssr/losses.hpp"

namespace ssr {

int segment_ce(Tape& t, int logits, int prefix_len, const std::vector<int>& text, int seg_begin,
               int seg_end) {
    if (seg_begin < 0 || seg_end > int(text.size()) || seg_begin >= seg_end)
        fail_validation(strf("bad loss segment [%d,%d) over %zu tokens", seg_begin, seg_end,
                             text.size()));
    if (prefix_len + seg_begin < 1)
        fail_validation("first supervised token has no preceding row");
    const Mat& L = t.val(logits);
    if (L.rows != prefix_len + int(text.size()))
        fail_validation(strf("logits cover %d rows, sequence has %d", L.rows,
                             prefix_len + int(text.size())));
    std::vector<Tape::CePos> items;
    for (int i = seg_begin; i < seg_end; ++i)
        items.push_back({prefix_len + i - 1, text[i], 1.0});
    return t.cross_entropy(logits, items);
}

std::vector<int> with_eos(std::vector<int> ids, int eos_id) {
    ids.push_back(eos_id);
    return ids;
}

namespace {

std::vector<int> joined(const std::vector<int>& a, const std::vector<int>& b, int eos_id) {
    std::vector<int> out = a;
    out.insert(out.end(), b.begin(), b.end());
    out.push_back(eos_id);
    return out;
}

}  // namespace

SeqLoss vlm_pretrain_loss(Ctx& c, const VisionLm& vlm, const Mat& patches,
                          const std::vector<int>& question, const std::vector<int>& answer,
                          int eos_id) {
    if (question.empty() || answer.empty()) fail_validation("empty question or answer");
    std::vector<int> text = joined(question, answer, eos_id);
    int lg = vlm.forward_logits(c, patches, -1, text);
    int seg = int(question.size());
    return {segment_ce(c.t, lg, vlm.n_image_tokens(), text, seg, int(text.size())),
            int(text.size()) - seg};
}

SeqLoss aligner_pretrain_loss(Ctx& c, const CausalLm& aligner, int k, int marker_id,
                              const std::vector<int>& question, const std::vector<int>& rationale,
                              int eos_id) {
    if (k < 1) fail_validation("need at least one marker row");
    if (question.empty() || rationale.empty()) fail_validation("empty question or rationale");
    std::vector<int> text(k, marker_id);
    text.insert(text.end(), question.begin(), question.end());
    text.insert(text.end(), rationale.begin(), rationale.end());
    text.push_back(eos_id);
    int lg = aligner.logits(c, aligner.embed_ids(c, text));
    int seg = k + int(question.size());
    return {segment_ce(c.t, lg, 0, text, seg, int(text.size())), int(text.size()) - seg};
}

SeqLoss stage1_loss(Ctx& c, const CausalLm& aligner, int latents,
                    const std::vector<int>& question, const std::vector<int>& rationale,
                    int eos_id) {
    if (question.empty() || rationale.empty()) fail_validation("empty question or rationale");
    if (c.t.val(latents).cols != aligner.dim())
        fail_validation("latent width does not match the aligner");
    int k = c.t.val(latents).rows;
    std::vector<int> text = joined(question, rationale, eos_id);
    int seq = c.t.concat_rows({latents, aligner.embed_ids(c, text)});
    int lg = aligner.logits(c, seq);
    int seg = int(question.size());
    return {segment_ce(c.t, lg, k, text, seg, int(text.size())), int(text.size()) - seg};
}

SeqLoss stage2_loss(Ctx& c, const VisionLm& vlm, const Mat& patches, int latents,
                    const std::vector<int>& question, const std::vector<int>& answer,
                    int eos_id) {
    if (question.empty() || answer.empty()) fail_validation("empty question or answer");
    std::vector<int> text = joined(question, answer, eos_id);
    int lg = vlm.forward_logits(c, patches, latents, text);
    int prefix = vlm.n_image_tokens() + c.t.val(latents).rows;
    int seg = int(question.size());
    return {segment_ce(c.t, lg, prefix, text, seg, int(text.size())), int(text.size()) - seg};
}

}  // namespace ssr
