#pragma once

#include <deque>
#include <string>
#include <unordered_map>
#include <vector>

#include "ssr/tape.hpp"

namespace ssr {

// A named weight with a gradient accumulator. Modules keep stable pointers
// into the owning ParamStore; per-sample tapes bind values on demand and the
// context harvests tape gradients back after backward().
struct Param {
    std::string name;
    Mat w;
    Mat g;
    bool trainable = true;

    void ensure_grad() {
        if (g.count() == 0) g = Mat(w.rows, w.cols);
    }
};

class ParamStore {
  public:
    Param& create(const std::string& name, int rows, int cols, bool trainable = true);
    Param* find(const std::string& name) const;
    Param& at(const std::string& name) const;
    const std::vector<Param*>& all() const { return order_; }
    std::vector<Param*> trainable() const;
    void zero_grads();
    size_t scalar_count(bool trainable_only = false) const;

  private:
    std::deque<Param> params_;
    std::unordered_map<std::string, Param*> by_name_;
    std::vector<Param*> order_;
};

// Per-parameter gradient accumulators owned by a worker, so several samples
// can run backward concurrently and reduce in a fixed order afterwards.
struct GradBuffer {
    std::unordered_map<Param*, Mat> g;
    void add_into_params(const std::vector<Param*>& order) const;
    void scale(double s);
};

// One forward/backward pass. use() leafs each param at most once; harvest()
// adds tape gradients into Param::g for the trainable ones that were touched,
// harvest_into() adds them to a buffer instead.
struct Ctx {
    Tape t;
    bool train = true;

    explicit Ctx(bool train_mode = true) : train(train_mode) {}
    int use(Param& p);
    void harvest();
    void harvest_into(GradBuffer& buf);

  private:
    std::unordered_map<Param*, int> bound_;
};

void init_uniform(Mat& w, Rng& rng, int fan_in);

class Linear {
  public:
    Linear() = default;
    Linear(ParamStore& ps, const std::string& name, int in, int out, Rng& rng, bool bias = true);
    int apply(Ctx& c, int x) const;
    Param* w = nullptr;
    Param* b = nullptr;  // null when built without bias
};

class LayerNormP {
  public:
    LayerNormP() = default;
    LayerNormP(ParamStore& ps, const std::string& name, int dim);
    int apply(Ctx& c, int x) const;
    Param* gain = nullptr;
    Param* bias = nullptr;
};

class Mlp {
  public:
    Mlp() = default;
    Mlp(ParamStore& ps, const std::string& name, int dim, int mult, Rng& rng);
    int apply(Ctx& c, int x) const;
    Linear fc1, fc2;
};

enum class MixerKind { attention, scan, mlp };
MixerKind mixer_from_name(const std::string& name);

// Pre-norm residual block: x + mixer(ln1(x)) then x + mlp(ln2(x)). The mlp
// mixer kind degenerates to a second feed-forward, giving a no-cross-token
// ablation point.
class Block {
  public:
    Block() = default;
    Block(ParamStore& ps, const std::string& name, int dim, int mult, MixerKind kind, Rng& rng);
    int apply(Ctx& c, int x, bool causal) const;
    MixerKind kind = MixerKind::attention;
    LayerNormP ln1, ln2;
    Linear q, k, v, o;        // attention
    Linear gate, inp, out;    // scan
    Linear mix1, mix2;        // mlp
    Mlp ff;
};

// hex digest over the exact bytes of the listed parameter values, used to
// prove weights did not move
std::string params_digest(const std::vector<Param*>& params);

}  // namespace ssr
