#include "ssr/layers.hpp"

#include <cmath>
#include <cstring>

#include "ssr/sha256.hpp"

namespace ssr {

Param& ParamStore::create(const std::string& name, int rows, int cols, bool trainable) {
    if (name.empty()) fail_validation("parameter needs a name");
    if (by_name_.count(name)) fail_validation(strf("duplicate parameter %s", name.c_str()));
    if (rows < 1 || cols < 1) fail_validation(strf("parameter %s has empty shape", name.c_str()));
    params_.push_back(Param{name, Mat(rows, cols), Mat(), trainable});
    Param* p = &params_.back();
    by_name_[name] = p;
    order_.push_back(p);
    return *p;
}

Param* ParamStore::find(const std::string& name) const {
    auto it = by_name_.find(name);
    return it == by_name_.end() ? nullptr : it->second;
}

Param& ParamStore::at(const std::string& name) const {
    Param* p = find(name);
    if (!p) fail_validation(strf("unknown parameter %s", name.c_str()));
    return *p;
}

std::vector<Param*> ParamStore::trainable() const {
    std::vector<Param*> out;
    for (Param* p : order_)
        if (p->trainable) out.push_back(p);
    return out;
}

void ParamStore::zero_grads() {
    for (Param* p : order_)
        if (p->g.count() != 0) p->g.zero();
}

size_t ParamStore::scalar_count(bool trainable_only) const {
    size_t n = 0;
    for (Param* p : order_)
        if (!trainable_only || p->trainable) n += p->w.count();
    return n;
}

int Ctx::use(Param& p) {
    auto it = bound_.find(&p);
    if (it != bound_.end()) return it->second;
    int slot = t.leaf(p.w, train && p.trainable);
    bound_.emplace(&p, slot);
    return slot;
}

void Ctx::harvest() {
    if (!train) return;
    for (auto& [p, slot] : bound_) {
        if (!p->trainable) continue;
        p->ensure_grad();
        const Mat& g = t.grad(slot);
        for (size_t i = 0; i < g.count(); ++i) p->g.a[i] += g.a[i];
    }
}

void Ctx::harvest_into(GradBuffer& buf) {
    if (!train) return;
    for (auto& [p, slot] : bound_) {
        if (!p->trainable) continue;
        Mat& acc = buf.g[p];
        if (acc.count() == 0) acc = Mat(p->w.rows, p->w.cols);
        const Mat& g = t.grad(slot);
        for (size_t i = 0; i < g.count(); ++i) acc.a[i] += g.a[i];
    }
}

void GradBuffer::add_into_params(const std::vector<Param*>& order) const {
    // walk the store order, not the map order: map iteration depends on
    // pointer hashes and would change the float summation order between runs
    for (Param* p : order) {
        auto it = g.find(p);
        if (it == g.end()) continue;
        p->ensure_grad();
        const Mat& m = it->second;
        for (size_t i = 0; i < m.count(); ++i) p->g.a[i] += m.a[i];
    }
}

void GradBuffer::scale(double s) {
    for (auto& [p, m] : g)
        for (double& x : m.a) x *= s;
}

void init_uniform(Mat& w, Rng& rng, int fan_in) {
    double lim = 1.0 / std::sqrt(double(fan_in));
    for (double& x : w.a) x = rng.uniform(-lim, lim);
}

Linear::Linear(ParamStore& ps, const std::string& name, int in, int out, Rng& rng, bool bias) {
    w = &ps.create(name + ".w", in, out);
    init_uniform(w->w, rng, in);
    if (bias) {
        b = &ps.create(name + ".b", 1, out);
        init_uniform(b->w, rng, in);
    }
}

int Linear::apply(Ctx& c, int x) const {
    int y = c.t.matmul(x, c.use(*w));
    if (b) y = c.t.add_rowvec(y, c.use(*b));
    return y;
}

LayerNormP::LayerNormP(ParamStore& ps, const std::string& name, int dim) {
    gain = &ps.create(name + ".gain", 1, dim);
    for (double& x : gain->w.a) x = 1.0;
    bias = &ps.create(name + ".bias", 1, dim);
}

int LayerNormP::apply(Ctx& c, int x) const { return c.t.layernorm(x, c.use(*gain), c.use(*bias)); }

Mlp::Mlp(ParamStore& ps, const std::string& name, int dim, int mult, Rng& rng)
    : fc1(ps, name + ".fc1", dim, dim * mult, rng), fc2(ps, name + ".fc2", dim * mult, dim, rng) {}

int Mlp::apply(Ctx& c, int x) const { return fc2.apply(c, c.t.gelu(fc1.apply(c, x))); }

MixerKind mixer_from_name(const std::string& name) {
    if (name == "attention") return MixerKind::attention;
    if (name == "scan") return MixerKind::scan;
    if (name == "mlp") return MixerKind::mlp;
    fail_validation(strf("unknown mixer '%s'", name.c_str()));
}

Block::Block(ParamStore& ps, const std::string& name, int dim, int mult, MixerKind k, Rng& rng)
    : kind(k),
      ln1(ps, name + ".ln1", dim),
      ln2(ps, name + ".ln2", dim),
      ff(ps, name + ".ff", dim, mult, rng) {
    switch (kind) {
        case MixerKind::attention:
            q = Linear(ps, name + ".q", dim, dim, rng);
            this->k = Linear(ps, name + ".k", dim, dim, rng);
            v = Linear(ps, name + ".v", dim, dim, rng);
            o = Linear(ps, name + ".o", dim, dim, rng);
            break;
        case MixerKind::scan:
            gate = Linear(ps, name + ".gate", dim, dim, rng);
            // open the gates at init so state carries across steps
            for (double& x : gate.b->w.a) x = 1.0;
            inp = Linear(ps, name + ".inp", dim, dim, rng);
            out = Linear(ps, name + ".out", dim, dim, rng);
            break;
        case MixerKind::mlp:
            mix1 = Linear(ps, name + ".mix1", dim, dim, rng);
            mix2 = Linear(ps, name + ".mix2", dim, dim, rng);
            break;
    }
}

int Block::apply(Ctx& c, int x, bool causal) const {
    int h = ln1.apply(c, x);
    int mixed;
    switch (kind) {
        case MixerKind::attention:
            mixed = o.apply(
                c, c.t.attention(q.apply(c, h), k.apply(c, h), v.apply(c, h), causal));
            break;
        case MixerKind::scan:
            mixed = out.apply(
                c, c.t.gated_scan(c.t.sigmoid(gate.apply(c, h)), inp.apply(c, h)));
            break;
        case MixerKind::mlp:
            mixed = mix2.apply(c, c.t.gelu(mix1.apply(c, h)));
            break;
        default:
            fail_validation("bad mixer kind");
    }
    int y = c.t.add(x, mixed);
    return c.t.add(y, ff.apply(c, ln2.apply(c, y)));
}

std::string params_digest(const std::vector<Param*>& params) {
    std::vector<uint8_t> bytes;
    for (const Param* p : params) {
        bytes.insert(bytes.end(), p->name.begin(), p->name.end());
        bytes.push_back(0);
        size_t at = bytes.size();
        bytes.resize(at + p->w.count() * sizeof(double));
        std::memcpy(bytes.data() + at, p->w.a.data(), p->w.count() * sizeof(double));
    }
    return sha256_hex(bytes);
}

}  // namespace ssr
