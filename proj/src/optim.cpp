#include "ssr/optim.hpp"

#include <cmath>

namespace ssr {

void LrSchedule::validate() const {
    if (peak <= 0.0) fail_validation("schedule peak must be positive");
    if (total_steps < 1) fail_validation("schedule needs at least one step");
    if (warmup_ratio < 0.0 || warmup_ratio >= 1.0) fail_validation("warmup ratio outside [0,1)");
}

int LrSchedule::warmup_steps() const {
    int w = int(std::lround(warmup_ratio * total_steps));
    return std::min(w, total_steps - 1);
}

double LrSchedule::at(int step) const {
    validate();
    if (step < 0 || step > total_steps) fail_validation(strf("step %d outside schedule", step));
    int warm = warmup_steps();
    if (step < warm) return peak * double(step) / double(warm);
    double frac = double(step - warm) / double(total_steps - warm);
    return peak * 0.5 * (1.0 + std::cos(frac * M_PI));
}

double clip_global_norm(const std::vector<Param*>& params, double max_norm) {
    if (max_norm <= 0.0) fail_validation("clip norm must be positive");
    double sq = 0.0;
    for (Param* p : params) {
        if (p->g.count() == 0) continue;
        for (double x : p->g.a) sq += x * x;
    }
    double norm = std::sqrt(sq);
    if (norm > max_norm && norm > 0.0) {
        double s = max_norm / norm;
        for (Param* p : params)
            for (double& x : p->g.a) x *= s;
    }
    return norm;
}

AdamW::AdamW(std::vector<Param*> params, const OptimConfig& oc) : params_(std::move(params)), oc_(oc) {
    for (Param* p : params_) {
        if (!p->trainable) fail_validation(strf("optimizer given frozen parameter %s", p->name.c_str()));
        m.emplace_back(p->w.rows, p->w.cols);
        v.emplace_back(p->w.rows, p->w.cols);
    }
}

void AdamW::step(double lr) {
    ++t;
    double bc1 = 1.0 - std::pow(oc_.beta1, t);
    double bc2 = 1.0 - std::pow(oc_.beta2, t);
    for (size_t pi = 0; pi < params_.size(); ++pi) {
        Param& p = *params_[pi];
        p.ensure_grad();
        Mat& mm = m[pi];
        Mat& vv = v[pi];
        for (size_t i = 0; i < p.w.count(); ++i) {
            double g = p.g.a[i];
            p.w.a[i] -= lr * oc_.weight_decay * p.w.a[i];
            mm.a[i] = oc_.beta1 * mm.a[i] + (1.0 - oc_.beta1) * g;
            vv.a[i] = oc_.beta2 * vv.a[i] + (1.0 - oc_.beta2) * g * g;
            double mhat = mm.a[i] / bc1;
            double vhat = vv.a[i] / bc2;
            p.w.a[i] -= lr * mhat / (std::sqrt(vhat) + oc_.eps);
        }
    }
}

}  // namespace ssr
