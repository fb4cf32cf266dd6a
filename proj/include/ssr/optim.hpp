#pragma once

#include "ssr/config.hpp"
#include "ssr/layers.hpp"

namespace ssr {

// Linear warmup to the peak, then cosine decay to exactly zero at
// total_steps. The peak is reached at the warmup boundary and the curve never
// rises afterwards.
struct LrSchedule {
    double peak = 0.0;
    int total_steps = 0;
    double warmup_ratio = 0.0;

    int warmup_steps() const;
    double at(int step) const;
    void validate() const;
};

// Global gradient norm over the listed parameters; scales grads in place when
// the norm exceeds max_norm. Returns the pre-clip norm.
double clip_global_norm(const std::vector<Param*>& params, double max_norm);

// Decoupled weight decay Adam with bias correction. Operates on Param::g as
// filled by Ctx::harvest; moments live here, aligned with the param list.
class AdamW {
  public:
    AdamW() = default;
    AdamW(std::vector<Param*> params, const OptimConfig& oc);

    void step(double lr);
    const std::vector<Param*>& params() const { return params_; }

    std::vector<Mat> m, v;
    int t = 0;

  private:
    std::vector<Param*> params_;
    OptimConfig oc_;
};

}  // namespace ssr
