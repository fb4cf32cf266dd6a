#include "ssr/tape.hpp"

#include <cmath>

namespace ssr {

void mm_acc(const Mat& A, const Mat& B, Mat& C) {
    if (A.cols != B.rows || C.rows != A.rows || C.cols != B.cols)
        fail_validation(strf("mm_acc shape mismatch (%dx%d)*(%dx%d)->(%dx%d)", A.rows, A.cols, B.rows,
                        B.cols, C.rows, C.cols));
    for (int i = 0; i < A.rows; ++i) {
        double* c = C.row(i);
        const double* a = A.row(i);
        for (int p = 0; p < A.cols; ++p) {
            double ap = a[p];
            const double* b = B.row(p);
            for (int j = 0; j < B.cols; ++j) c[j] += ap * b[j];
        }
    }
}

void mm_nt_acc(const Mat& A, const Mat& B, Mat& C) {
    if (A.cols != B.cols || C.rows != A.rows || C.cols != B.rows)
        fail_validation(strf("mm_nt_acc shape mismatch (%dx%d)*(%dx%d)^T->(%dx%d)", A.rows, A.cols,
                        B.rows, B.cols, C.rows, C.cols));
    for (int i = 0; i < A.rows; ++i) {
        const double* a = A.row(i);
        double* c = C.row(i);
        for (int j = 0; j < B.rows; ++j) {
            const double* b = B.row(j);
            double s = 0.0;
            for (int p = 0; p < A.cols; ++p) s += a[p] * b[p];
            c[j] += s;
        }
    }
}

void mm_tn_acc(const Mat& A, const Mat& B, Mat& C) {
    if (A.rows != B.rows || C.rows != A.cols || C.cols != B.cols)
        fail_validation(strf("mm_tn_acc shape mismatch (%dx%d)^T*(%dx%d)->(%dx%d)", A.rows, A.cols,
                        B.rows, B.cols, C.rows, C.cols));
    for (int i = 0; i < A.rows; ++i) {
        const double* a = A.row(i);
        const double* b = B.row(i);
        for (int p = 0; p < A.cols; ++p) {
            double ap = a[p];
            double* c = C.row(p);
            for (int j = 0; j < B.cols; ++j) c[j] += ap * b[j];
        }
    }
}

Mat softmax_rows(const Mat& logits) {
    Mat p(logits.rows, logits.cols);
    for (int i = 0; i < logits.rows; ++i) {
        const double* x = logits.row(i);
        double* q = p.row(i);
        double m = x[0];
        for (int j = 1; j < logits.cols; ++j) m = std::max(m, x[j]);
        double z = 0.0;
        for (int j = 0; j < logits.cols; ++j) {
            q[j] = std::exp(x[j] - m);
            z += q[j];
        }
        for (int j = 0; j < logits.cols; ++j) q[j] /= z;
    }
    return p;
}

void Tape::check(int i, const char* op) const {
    if (i < 0 || size_t(i) >= slots_.size()) fail_validation(strf("%s: bad slot %d", op, i));
}

int Tape::push(Mat v, bool need_g, std::function<void()> back) {
    Slot s;
    s.v = std::move(v);
    s.need_g = need_g;
    if (need_g) s.back = std::move(back);
    slots_.push_back(std::move(s));
    return int(slots_.size()) - 1;
}

Mat& Tape::gref(int i) {
    Slot& s = slots_[i];
    if (s.g.count() == 0) s.g = Mat(s.v.rows, s.v.cols);
    return s.g;
}

const Mat& Tape::val(int i) const {
    check(i, "val");
    return slots_[i].v;
}

const Mat& Tape::grad(int i) {
    check(i, "grad");
    if (!slots_[i].need_g) fail_validation(strf("grad requested for slot %d which does not need one", i));
    return gref(i);
}

bool Tape::needs_grad(int i) const {
    check(i, "needs_grad");
    return slots_[i].need_g;
}

void Tape::backward(int loss) {
    check(loss, "backward");
    const Mat& lv = slots_[loss].v;
    if (lv.rows != 1 || lv.cols != 1)
        fail_validation(strf("backward needs a 1x1 loss, got %dx%d", lv.rows, lv.cols));
    if (!slots_[loss].need_g) fail_validation("backward on a slot with no gradient path");
    gref(loss).at(0, 0) += 1.0;
    for (int i = loss; i >= 0; --i) {
        Slot& s = slots_[i];
        if (s.back && s.g.count() != 0) s.back();
    }
}

int Tape::leaf(Mat v, bool need_g) { return push(std::move(v), need_g, nullptr); }

int Tape::add(int a, int b) {
    check(a, "add");
    check(b, "add");
    const Mat &A = slots_[a].v, &B = slots_[b].v;
    if (!A.same_shape(B)) fail_validation("add shape mismatch");
    Mat out = A;
    for (size_t i = 0; i < out.count(); ++i) out.a[i] += B.a[i];
    bool ng = slots_[a].need_g || slots_[b].need_g;
    int o = int(slots_.size());
    return push(std::move(out), ng, [this, a, b, o] {
        const Mat& go = gref(o);
        if (slots_[a].need_g) {
            Mat& ga = gref(a);
            for (size_t i = 0; i < go.count(); ++i) ga.a[i] += go.a[i];
        }
        if (slots_[b].need_g) {
            Mat& gb = gref(b);
            for (size_t i = 0; i < go.count(); ++i) gb.a[i] += go.a[i];
        }
    });
}

int Tape::sub(int a, int b) {
    check(a, "sub");
    check(b, "sub");
    const Mat &A = slots_[a].v, &B = slots_[b].v;
    if (!A.same_shape(B)) fail_validation("sub shape mismatch");
    Mat out = A;
    for (size_t i = 0; i < out.count(); ++i) out.a[i] -= B.a[i];
    bool ng = slots_[a].need_g || slots_[b].need_g;
    int o = int(slots_.size());
    return push(std::move(out), ng, [this, a, b, o] {
        const Mat& go = gref(o);
        if (slots_[a].need_g) {
            Mat& ga = gref(a);
            for (size_t i = 0; i < go.count(); ++i) ga.a[i] += go.a[i];
        }
        if (slots_[b].need_g) {
            Mat& gb = gref(b);
            for (size_t i = 0; i < go.count(); ++i) gb.a[i] -= go.a[i];
        }
    });
}

int Tape::mul(int a, int b) {
    check(a, "mul");
    check(b, "mul");
    const Mat &A = slots_[a].v, &B = slots_[b].v;
    if (!A.same_shape(B)) fail_validation("mul shape mismatch");
    Mat out = A;
    for (size_t i = 0; i < out.count(); ++i) out.a[i] *= B.a[i];
    bool ng = slots_[a].need_g || slots_[b].need_g;
    int o = int(slots_.size());
    return push(std::move(out), ng, [this, a, b, o] {
        const Mat& go = gref(o);
        const Mat &A2 = slots_[a].v, &B2 = slots_[b].v;
        if (slots_[a].need_g) {
            Mat& ga = gref(a);
            for (size_t i = 0; i < go.count(); ++i) ga.a[i] += go.a[i] * B2.a[i];
        }
        if (slots_[b].need_g) {
            Mat& gb = gref(b);
            for (size_t i = 0; i < go.count(); ++i) gb.a[i] += go.a[i] * A2.a[i];
        }
    });
}

int Tape::scale(int a, double s) {
    check(a, "scale");
    Mat out = slots_[a].v;
    for (double& x : out.a) x *= s;
    int o = int(slots_.size());
    return push(std::move(out), slots_[a].need_g, [this, a, s, o] {
        const Mat& go = gref(o);
        Mat& ga = gref(a);
        for (size_t i = 0; i < go.count(); ++i) ga.a[i] += s * go.a[i];
    });
}

int Tape::add_rowvec(int a, int v) {
    check(a, "add_rowvec");
    check(v, "add_rowvec");
    const Mat &A = slots_[a].v, &V = slots_[v].v;
    if (V.rows != 1 || V.cols != A.cols) fail_validation(strf("add_rowvec wants 1x%d, got %dx%d", A.cols, V.rows, V.cols));
    Mat out = A;
    for (int r = 0; r < out.rows; ++r) {
        double* p = out.row(r);
        for (int c = 0; c < out.cols; ++c) p[c] += V.a[c];
    }
    bool ng = slots_[a].need_g || slots_[v].need_g;
    int o = int(slots_.size());
    return push(std::move(out), ng, [this, a, v, o] {
        const Mat& go = gref(o);
        if (slots_[a].need_g) {
            Mat& ga = gref(a);
            for (size_t i = 0; i < go.count(); ++i) ga.a[i] += go.a[i];
        }
        if (slots_[v].need_g) {
            Mat& gv = gref(v);
            for (int r = 0; r < go.rows; ++r) {
                const double* p = go.row(r);
                for (int c = 0; c < go.cols; ++c) gv.a[c] += p[c];
            }
        }
    });
}

int Tape::mul_rowvec(int a, int v) {
    check(a, "mul_rowvec");
    check(v, "mul_rowvec");
    const Mat &A = slots_[a].v, &V = slots_[v].v;
    if (V.rows != 1 || V.cols != A.cols) fail_validation(strf("mul_rowvec wants 1x%d, got %dx%d", A.cols, V.rows, V.cols));
    Mat out = A;
    for (int r = 0; r < out.rows; ++r) {
        double* p = out.row(r);
        for (int c = 0; c < out.cols; ++c) p[c] *= V.a[c];
    }
    bool ng = slots_[a].need_g || slots_[v].need_g;
    int o = int(slots_.size());
    return push(std::move(out), ng, [this, a, v, o] {
        const Mat& go = gref(o);
        const Mat &A2 = slots_[a].v, &V2 = slots_[v].v;
        if (slots_[a].need_g) {
            Mat& ga = gref(a);
            for (int r = 0; r < go.rows; ++r) {
                const double* p = go.row(r);
                double* q = ga.row(r);
                for (int c = 0; c < go.cols; ++c) q[c] += p[c] * V2.a[c];
            }
        }
        if (slots_[v].need_g) {
            Mat& gv = gref(v);
            for (int r = 0; r < go.rows; ++r) {
                const double* p = go.row(r);
                const double* x = A2.row(r);
                for (int c = 0; c < go.cols; ++c) gv.a[c] += p[c] * x[c];
            }
        }
    });
}

int Tape::matmul(int a, int b) {
    check(a, "matmul");
    check(b, "matmul");
    const Mat &A = slots_[a].v, &B = slots_[b].v;
    if (A.cols != B.rows) fail_validation(strf("matmul shape mismatch (%dx%d)*(%dx%d)", A.rows, A.cols, B.rows, B.cols));
    Mat out(A.rows, B.cols);
    mm_acc(A, B, out);
    bool ng = slots_[a].need_g || slots_[b].need_g;
    int o = int(slots_.size());
    return push(std::move(out), ng, [this, a, b, o] {
        const Mat& go = gref(o);
        if (slots_[a].need_g) mm_nt_acc(go, slots_[b].v, gref(a));
        if (slots_[b].need_g) mm_tn_acc(slots_[a].v, go, gref(b));
    });
}

int Tape::matmul_nt(int a, int b) {
    check(a, "matmul_nt");
    check(b, "matmul_nt");
    const Mat &A = slots_[a].v, &B = slots_[b].v;
    if (A.cols != B.cols)
        fail_validation(strf("matmul_nt shape mismatch (%dx%d)*(%dx%d)^T", A.rows, A.cols, B.rows, B.cols));
    Mat out(A.rows, B.rows);
    mm_nt_acc(A, B, out);
    bool ng = slots_[a].need_g || slots_[b].need_g;
    int o = int(slots_.size());
    return push(std::move(out), ng, [this, a, b, o] {
        const Mat& go = gref(o);
        if (slots_[a].need_g) mm_acc(go, slots_[b].v, gref(a));
        if (slots_[b].need_g) mm_tn_acc(go, slots_[a].v, gref(b));
    });
}

namespace {
constexpr double kInvSqrt2Pi = 0.39894228040143268;
}

int Tape::gelu(int a) {
    check(a, "gelu");
    Mat out = slots_[a].v;
    for (double& x : out.a) x = 0.5 * x * (1.0 + std::erf(x * M_SQRT1_2));
    int o = int(slots_.size());
    return push(std::move(out), slots_[a].need_g, [this, a, o] {
        const Mat& go = gref(o);
        const Mat& A2 = slots_[a].v;
        Mat& ga = gref(a);
        for (size_t i = 0; i < go.count(); ++i) {
            double x = A2.a[i];
            double d = 0.5 * (1.0 + std::erf(x * M_SQRT1_2)) +
                       x * kInvSqrt2Pi * std::exp(-0.5 * x * x);
            ga.a[i] += go.a[i] * d;
        }
    });
}

int Tape::sigmoid(int a) {
    check(a, "sigmoid");
    Mat out = slots_[a].v;
    for (double& x : out.a) x = 1.0 / (1.0 + std::exp(-x));
    int o = int(slots_.size());
    return push(std::move(out), slots_[a].need_g, [this, a, o] {
        const Mat& go = gref(o);
        const Mat& y = slots_[o].v;
        Mat& ga = gref(a);
        for (size_t i = 0; i < go.count(); ++i) ga.a[i] += go.a[i] * y.a[i] * (1.0 - y.a[i]);
    });
}

int Tape::layernorm(int a, int gain, int bias) {
    check(a, "layernorm");
    check(gain, "layernorm");
    check(bias, "layernorm");
    const Mat &A = slots_[a].v, &G = slots_[gain].v, &B = slots_[bias].v;
    if (G.rows != 1 || G.cols != A.cols || B.rows != 1 || B.cols != A.cols)
        fail_validation(strf("layernorm wants 1x%d gain and bias", A.cols));
    const double eps = 1e-5;
    int n = A.cols;
    Mat out(A.rows, n), xhat(A.rows, n);
    std::vector<double> inv_std(A.rows);
    for (int r = 0; r < A.rows; ++r) {
        const double* x = A.row(r);
        double mu = 0.0;
        for (int c = 0; c < n; ++c) mu += x[c];
        mu /= n;
        double var = 0.0;
        for (int c = 0; c < n; ++c) var += (x[c] - mu) * (x[c] - mu);
        var /= n;
        double is = 1.0 / std::sqrt(var + eps);
        inv_std[r] = is;
        double* xh = xhat.row(r);
        double* y = out.row(r);
        for (int c = 0; c < n; ++c) {
            xh[c] = (x[c] - mu) * is;
            y[c] = G.a[c] * xh[c] + B.a[c];
        }
    }
    bool ng = slots_[a].need_g || slots_[gain].need_g || slots_[bias].need_g;
    int o = int(slots_.size());
    return push(std::move(out), ng,
                [this, a, gain, bias, o, xhat = std::move(xhat), inv_std = std::move(inv_std)] {
                    const Mat& go = gref(o);
                    const Mat& G2 = slots_[gain].v;
                    int n2 = go.cols;
                    if (slots_[bias].need_g) {
                        Mat& gb = gref(bias);
                        for (int r = 0; r < go.rows; ++r) {
                            const double* p = go.row(r);
                            for (int c = 0; c < n2; ++c) gb.a[c] += p[c];
                        }
                    }
                    if (slots_[gain].need_g) {
                        Mat& gg = gref(gain);
                        for (int r = 0; r < go.rows; ++r) {
                            const double* p = go.row(r);
                            const double* xh = xhat.row(r);
                            for (int c = 0; c < n2; ++c) gg.a[c] += p[c] * xh[c];
                        }
                    }
                    if (slots_[a].need_g) {
                        Mat& ga = gref(a);
                        std::vector<double> dxh(n2);
                        for (int r = 0; r < go.rows; ++r) {
                            const double* p = go.row(r);
                            const double* xh = xhat.row(r);
                            double m1 = 0.0, m2 = 0.0;
                            for (int c = 0; c < n2; ++c) {
                                dxh[c] = p[c] * G2.a[c];
                                m1 += dxh[c];
                                m2 += dxh[c] * xh[c];
                            }
                            m1 /= n2;
                            m2 /= n2;
                            double* q = ga.row(r);
                            for (int c = 0; c < n2; ++c)
                                q[c] += inv_std[r] * (dxh[c] - m1 - xh[c] * m2);
                        }
                    }
                });
}

int Tape::embed_rows(int table, const std::vector<int>& ids) {
    check(table, "embed_rows");
    const Mat& T = slots_[table].v;
    if (ids.empty()) fail_validation("embed_rows with no ids");
    Mat out(int(ids.size()), T.cols);
    for (size_t r = 0; r < ids.size(); ++r) {
        if (ids[r] < 0 || ids[r] >= T.rows) fail_validation(strf("embed_rows id %d out of range", ids[r]));
        const double* src = T.row(ids[r]);
        std::copy(src, src + T.cols, out.row(int(r)));
    }
    int o = int(slots_.size());
    return push(std::move(out), slots_[table].need_g, [this, table, ids, o] {
        const Mat& go = gref(o);
        Mat& gt = gref(table);
        for (size_t r = 0; r < ids.size(); ++r) {
            const double* p = go.row(int(r));
            double* q = gt.row(ids[r]);
            for (int c = 0; c < go.cols; ++c) q[c] += p[c];
        }
    });
}

int Tape::take_rows(int a, const std::vector<int>& rows) {
    check(a, "take_rows");
    const Mat& A = slots_[a].v;
    if (rows.empty()) fail_validation("take_rows with no rows");
    Mat out(int(rows.size()), A.cols);
    for (size_t r = 0; r < rows.size(); ++r) {
        if (rows[r] < 0 || rows[r] >= A.rows) fail_validation(strf("take_rows row %d out of range", rows[r]));
        const double* src = A.row(rows[r]);
        std::copy(src, src + A.cols, out.row(int(r)));
    }
    int o = int(slots_.size());
    return push(std::move(out), slots_[a].need_g, [this, a, rows, o] {
        const Mat& go = gref(o);
        Mat& ga = gref(a);
        for (size_t r = 0; r < rows.size(); ++r) {
            const double* p = go.row(int(r));
            double* q = ga.row(rows[r]);
            for (int c = 0; c < go.cols; ++c) q[c] += p[c];
        }
    });
}

int Tape::concat_rows(const std::vector<int>& parts) {
    if (parts.empty()) fail_validation("concat_rows with no parts");
    int cols = -1, rows = 0;
    bool ng = false;
    for (int p : parts) {
        check(p, "concat_rows");
        const Mat& M = slots_[p].v;
        if (cols < 0) cols = M.cols;
        if (M.cols != cols) fail_validation(strf("concat_rows column mismatch %d vs %d", M.cols, cols));
        rows += M.rows;
        ng = ng || slots_[p].need_g;
    }
    Mat out(rows, cols);
    int at = 0;
    for (int p : parts) {
        const Mat& M = slots_[p].v;
        std::copy(M.a.begin(), M.a.end(), out.row(at));
        at += M.rows;
    }
    int o = int(slots_.size());
    return push(std::move(out), ng, [this, parts, o] {
        const Mat& go = gref(o);
        int r0 = 0;
        for (int p : parts) {
            const Mat& M = slots_[p].v;
            if (slots_[p].need_g) {
                Mat& gp = gref(p);
                const double* src = go.row(r0);
                for (size_t i = 0; i < gp.count(); ++i) gp.a[i] += src[i];
            }
            r0 += M.rows;
        }
    });
}

int Tape::slice_rows(int a, int begin, int count) {
    check(a, "slice_rows");
    const Mat& A = slots_[a].v;
    if (begin < 0 || count < 1 || begin + count > A.rows)
        fail_validation(strf("slice_rows [%d,%d) outside %d rows", begin, begin + count, A.rows));
    Mat out(count, A.cols);
    std::copy(A.row(begin), A.row(begin) + size_t(count) * A.cols, out.row(0));
    int o = int(slots_.size());
    return push(std::move(out), slots_[a].need_g, [this, a, begin, o] {
        const Mat& go = gref(o);
        Mat& ga = gref(a);
        double* dst = ga.row(begin);
        for (size_t i = 0; i < go.count(); ++i) dst[i] += go.a[i];
    });
}

int Tape::sum(int a) {
    check(a, "sum");
    const Mat& A = slots_[a].v;
    Mat out(1, 1);
    for (double x : A.a) out.a[0] += x;
    int o = int(slots_.size());
    return push(std::move(out), slots_[a].need_g, [this, a, o] {
        double g = gref(o).a[0];
        Mat& ga = gref(a);
        for (double& x : ga.a) x += g;
    });
}

int Tape::gated_scan(int gate, int update) {
    check(gate, "gated_scan");
    check(update, "gated_scan");
    const Mat &G = slots_[gate].v, &U = slots_[update].v;
    if (!G.same_shape(U)) fail_validation("gated_scan shape mismatch");
    Mat out(U.rows, U.cols);
    for (int t = 0; t < U.rows; ++t) {
        const double* g = G.row(t);
        const double* u = U.row(t);
        const double* prev = t > 0 ? out.row(t - 1) : nullptr;
        double* h = out.row(t);
        for (int c = 0; c < U.cols; ++c) h[c] = (prev ? g[c] * prev[c] : 0.0) + u[c];
    }
    bool ng = slots_[gate].need_g || slots_[update].need_g;
    int o = int(slots_.size());
    return push(std::move(out), ng, [this, gate, update, o] {
        const Mat& go = gref(o);
        const Mat& H = slots_[o].v;
        const Mat& G2 = slots_[gate].v;
        bool wg = slots_[gate].need_g, wu = slots_[update].need_g;
        Mat* gg = wg ? &gref(gate) : nullptr;
        Mat* gu = wu ? &gref(update) : nullptr;
        std::vector<double> carry(go.cols, 0.0);
        for (int t = go.rows - 1; t >= 0; --t) {
            const double* p = go.row(t);
            const double* g = G2.row(t);
            const double* hprev = t > 0 ? H.row(t - 1) : nullptr;
            for (int c = 0; c < go.cols; ++c) {
                double gt = p[c] + carry[c];
                if (wu) gu->row(t)[c] += gt;
                if (wg && hprev) gg->row(t)[c] += gt * hprev[c];
                carry[c] = g[c] * gt;
            }
        }
    });
}

int Tape::attention(int q, int k, int v, bool causal) {
    check(q, "attention");
    check(k, "attention");
    check(v, "attention");
    const Mat &Q = slots_[q].v, &K = slots_[k].v, &V = slots_[v].v;
    if (Q.cols != K.cols || K.rows != V.rows)
        fail_validation(strf("attention shape mismatch q %dx%d k %dx%d v %dx%d", Q.rows, Q.cols, K.rows,
                        K.cols, V.rows, V.cols));
    if (causal && Q.rows != K.rows) fail_validation("causal attention needs equal lengths");
    double inv_sqrt_d = 1.0 / std::sqrt(double(Q.cols));
    Mat scores(Q.rows, K.rows);
    mm_nt_acc(Q, K, scores);
    Mat P(Q.rows, K.rows);
    for (int i = 0; i < Q.rows; ++i) {
        int lim = causal ? i + 1 : K.rows;
        const double* s = scores.row(i);
        double* p = P.row(i);
        double m = s[0] * inv_sqrt_d;
        for (int j = 1; j < lim; ++j) m = std::max(m, s[j] * inv_sqrt_d);
        double z = 0.0;
        for (int j = 0; j < lim; ++j) {
            p[j] = std::exp(s[j] * inv_sqrt_d - m);
            z += p[j];
        }
        for (int j = 0; j < lim; ++j) p[j] /= z;
    }
    Mat out(Q.rows, V.cols);
    mm_acc(P, V, out);
    bool ng = slots_[q].need_g || slots_[k].need_g || slots_[v].need_g;
    int o = int(slots_.size());
    return push(std::move(out), ng, [this, q, k, v, o, P = std::move(P), inv_sqrt_d] {
        const Mat& go = gref(o);
        if (slots_[v].need_g) mm_tn_acc(P, go, gref(v));
        if (!slots_[q].need_g && !slots_[k].need_g) return;
        Mat dP(P.rows, P.cols);
        mm_nt_acc(go, slots_[v].v, dP);
        Mat dT(P.rows, P.cols);
        for (int i = 0; i < P.rows; ++i) {
            const double* p = P.row(i);
            const double* dp = dP.row(i);
            double dot = 0.0;
            for (int j = 0; j < P.cols; ++j) dot += dp[j] * p[j];
            double* dt = dT.row(i);
            for (int j = 0; j < P.cols; ++j) dt[j] = p[j] * (dp[j] - dot) * inv_sqrt_d;
        }
        if (slots_[q].need_g) mm_acc(dT, slots_[k].v, gref(q));
        if (slots_[k].need_g) mm_tn_acc(dT, slots_[q].v, gref(k));
    });
}

int Tape::cross_entropy(int logits, const std::vector<CePos>& items) {
    check(logits, "cross_entropy");
    const Mat& L = slots_[logits].v;
    if (items.empty()) fail_validation("cross_entropy with no positions");
    double wsum = 0.0;
    for (const CePos& it : items) {
        if (it.pos < 0 || it.pos >= L.rows) fail_validation(strf("cross_entropy pos %d out of range", it.pos));
        if (it.target < 0 || it.target >= L.cols)
            fail_validation(strf("cross_entropy target %d out of range", it.target));
        if (it.weight < 0.0) fail_validation("cross_entropy negative weight");
        wsum += it.weight;
    }
    if (wsum <= 0.0) fail_validation("cross_entropy weights sum to zero");
    Mat out(1, 1);
    for (const CePos& it : items) {
        const double* x = L.row(it.pos);
        double m = x[0];
        for (int j = 1; j < L.cols; ++j) m = std::max(m, x[j]);
        double z = 0.0;
        for (int j = 0; j < L.cols; ++j) z += std::exp(x[j] - m);
        out.a[0] += it.weight * (m + std::log(z) - x[it.target]);
    }
    out.a[0] /= wsum;
    int o = int(slots_.size());
    return push(std::move(out), slots_[logits].need_g, [this, logits, items, wsum, o] {
        double g = gref(o).a[0];
        const Mat& L2 = slots_[logits].v;
        Mat& gl = gref(logits);
        for (const CePos& it : items) {
            const double* x = L2.row(it.pos);
            double m = x[0];
            for (int j = 1; j < L2.cols; ++j) m = std::max(m, x[j]);
            double z = 0.0;
            for (int j = 0; j < L2.cols; ++j) z += std::exp(x[j] - m);
            double* q = gl.row(it.pos);
            double w = g * it.weight / wsum;
            for (int j = 0; j < L2.cols; ++j) q[j] += w * (std::exp(x[j] - m) / z);
            q[it.target] -= w;
        }
    });
}

}  // namespace ssr
