#pragma once

#include <functional>
#include <vector>

#include "ssr/mat.hpp"

namespace ssr {

// Reverse-mode autodiff over matrix-valued nodes. Every op appends a slot
// holding the forward value plus a backward closure; slots only reference
// lower-numbered slots, so reverse index order is a valid backward schedule.
// Gradients are accumulated only into slots marked need_g, which propagates
// through ops, so frozen parameters cost nothing on the backward pass.
class Tape {
  public:
    struct Slot {
        Mat v;
        Mat g;  // allocated on first accumulation
        bool need_g = false;
        std::function<void()> back;  // empty for leaves
    };

    int leaf(Mat v, bool need_g);

    int add(int a, int b);
    int sub(int a, int b);
    int mul(int a, int b);  // elementwise
    int scale(int a, double s);
    int add_rowvec(int a, int v);  // v is 1 x cols, broadcast over rows
    int mul_rowvec(int a, int v);

    int matmul(int a, int b);     // A (m x k) * B (k x n)
    int matmul_nt(int a, int b);  // A (m x k) * B^T with B (n x k)

    int gelu(int a);  // exact erf form
    int sigmoid(int a);
    int layernorm(int a, int gain, int bias);  // row-wise, eps 1e-5

    int embed_rows(int table, const std::vector<int>& ids);
    int take_rows(int a, const std::vector<int>& rows);
    int concat_rows(const std::vector<int>& parts);
    int slice_rows(int a, int begin, int count);
    int sum(int a);  // 1x1 total of all entries

    // h_t = gate_t (*) h_{t-1} + update_t over rows, h_{-1} = 0
    int gated_scan(int gate, int update);

    // softmax(q k^T / sqrt(d)) v over rows; causal masks keys after the
    // query row and requires matching sequence lengths
    int attention(int q, int k, int v, bool causal);

    // weighted mean of -log softmax(logits[pos])[target]; returns 1x1
    struct CePos {
        int pos;
        int target;
        double weight = 1.0;
    };
    int cross_entropy(int logits, const std::vector<CePos>& items);

    const Mat& val(int i) const;
    const Mat& grad(int i);  // fails unless need_g; zeros if untouched
    bool needs_grad(int i) const;
    void backward(int loss);  // loss must be 1x1; seeds d(loss) = 1
    size_t size() const { return slots_.size(); }

  private:
    std::vector<Slot> slots_;
    int push(Mat v, bool need_g, std::function<void()> back);
    Mat& gref(int i);
    void check(int i, const char* op) const;
};

Mat softmax_rows(const Mat& logits);

}  // namespace ssr
