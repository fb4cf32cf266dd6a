#include <cmath>
#include <functional>
#include <memory>

#include "doctest.h"
#include "ssr/tape.hpp"

using namespace ssr;

namespace {

Mat random_mat(int r, int c, Rng& rng, double scale = 1.0) {
    Mat m(r, c);
    for (double& x : m.a) x = rng.normal() * scale;
    return m;
}

// Central-difference gradient oracle. Rebuilds the graph from perturbed
// copies of the inputs, so it shares no code with the backward pass.
void fd_check(const char* what, std::vector<Mat> inputs,
              const std::function<int(Tape&, const std::vector<int>&)>& build,
              double step = 1e-4, double tol_abs = 1e-6, double tol_rel = 1e-5) {
    auto run = [&](const std::vector<Mat>& ins, bool with_grad) {
        auto t = std::make_unique<Tape>();
        std::vector<int> ids;
        for (const Mat& m : ins) ids.push_back(t->leaf(m, with_grad));
        int loss = build(*t, ids);
        REQUIRE(t->val(loss).rows == 1);
        REQUIRE(t->val(loss).cols == 1);
        return std::pair<std::unique_ptr<Tape>, int>(std::move(t), loss);
    };
    auto [tape, loss] = run(inputs, true);
    tape->backward(loss);
    std::vector<Mat> analytic;
    std::vector<int> ids;
    {
        int i = 0;
        for (const Mat& m : inputs) {
            (void)m;
            analytic.push_back(tape->grad(i));
            ++i;
        }
    }
    for (size_t mi = 0; mi < inputs.size(); ++mi) {
        for (size_t ei = 0; ei < inputs[mi].count(); ++ei) {
            std::vector<Mat> plus = inputs, minus = inputs;
            plus[mi].a[ei] += step;
            minus[mi].a[ei] -= step;
            auto rp = run(plus, false);
            auto rm = run(minus, false);
            double lp = rp.first->val(rp.second).a[0];
            double lm = rm.first->val(rm.second).a[0];
            double num = (lp - lm) / (2.0 * step);
            double ana = analytic[mi].a[ei];
            double err = std::abs(num - ana);
            double bound = tol_abs + tol_rel * std::max(std::abs(num), std::abs(ana));
            CHECK_MESSAGE(err <= bound, what << " input " << mi << " elem " << ei << " numeric "
                                             << num << " analytic " << ana);
        }
    }
}

// scalarize a matrix output against a probe that is fixed per shape, so
// rebuilding the graph during finite differencing sees the same loss
int probed(Tape& t, int out) {
    Rng rng(987654321);
    Mat r(t.val(out).rows, t.val(out).cols);
    for (double& x : r.a) x = rng.normal();
    return t.sum(t.mul(out, t.leaf(r, false)));
}

}  // namespace

TEST_CASE("matmul matches a naive triple loop") {
    Rng rng(11);
    Mat A = random_mat(5, 4, rng), B = random_mat(4, 3, rng);
    Tape t;
    int out = t.matmul(t.leaf(A, false), t.leaf(B, false));
    for (int i = 0; i < 5; ++i)
        for (int j = 0; j < 3; ++j) {
            long double s = 0.0;
            for (int p = 0; p < 4; ++p) s += (long double)A.at(i, p) * B.at(p, j);
            CHECK(t.val(out).at(i, j) == doctest::Approx(double(s)).epsilon(1e-12));
        }
}

TEST_CASE("matmul_nt matches explicit row dots") {
    Rng rng(12);
    Mat A = random_mat(4, 6, rng), B = random_mat(3, 6, rng);
    Tape t;
    int out = t.matmul_nt(t.leaf(A, false), t.leaf(B, false));
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 3; ++j) {
            long double s = 0.0;
            for (int p = 0; p < 6; ++p) s += (long double)A.at(i, p) * B.at(j, p);
            CHECK(t.val(out).at(i, j) == doctest::Approx(double(s)).epsilon(1e-12));
        }
}

TEST_CASE("pointwise op values at known points") {
    Tape t;
    Mat x(1, 4);
    x.a = {0.0, 1.0, -6.0, 6.0};
    int g = t.gelu(t.leaf(x, false));
    CHECK(t.val(g).a[0] == 0.0);
    CHECK(t.val(g).a[1] == doctest::Approx(0.8413447460685429).epsilon(1e-12));
    CHECK(std::abs(t.val(g).a[2]) < 1e-7);
    CHECK(t.val(g).a[3] == doctest::Approx(6.0).epsilon(1e-9));
    int s = t.sigmoid(t.leaf(x, false));
    CHECK(t.val(s).a[0] == 0.5);
    CHECK(t.val(s).a[1] == doctest::Approx(1.0 / (1.0 + std::exp(-1.0))).epsilon(1e-12));
}

TEST_CASE("layernorm normalizes rows") {
    Tape t;
    Mat x(2, 2);
    x.a = {1.0, 3.0, 5.0, 5.0};
    Mat gain(1, 2), bias(1, 2);
    gain.a = {2.0, 2.0};
    bias.a = {0.5, -0.5};
    int out = t.layernorm(t.leaf(x, false), t.leaf(gain, false), t.leaf(bias, false));
    // row 0: mu 2, var 1, xhat close to -1 and +1
    double xh = 1.0 / std::sqrt(1.0 + 1e-5);
    CHECK(t.val(out).at(0, 0) == doctest::Approx(2.0 * -xh + 0.5).epsilon(1e-12));
    CHECK(t.val(out).at(0, 1) == doctest::Approx(2.0 * xh - 0.5).epsilon(1e-12));
    // constant row collapses to the bias
    CHECK(t.val(out).at(1, 0) == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(t.val(out).at(1, 1) == doctest::Approx(-0.5).epsilon(1e-12));
}

TEST_CASE("softmax_rows is a distribution and uniform on equal logits") {
    Mat l(2, 4);
    l.a = {3.0, 3.0, 3.0, 3.0, 0.1, -2.0, 5.0, 1.0};
    Mat p = softmax_rows(l);
    for (int j = 0; j < 4; ++j) CHECK(p.at(0, j) == doctest::Approx(0.25).epsilon(1e-12));
    double z = 0.0;
    for (int j = 0; j < 4; ++j) {
        z += p.at(1, j);
        CHECK(p.at(1, j) > 0.0);
    }
    CHECK(z == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("causal attention with zero queries averages the visible prefix") {
    Rng rng(5);
    Tape t;
    Mat q(3, 4);  // all zeros: scores uniform over allowed keys
    Mat k = random_mat(3, 4, rng), v = random_mat(3, 2, rng);
    int out = t.attention(t.leaf(q, false), t.leaf(k, false), t.leaf(v, false), true);
    CHECK(t.val(out).at(0, 0) == doctest::Approx(v.at(0, 0)).epsilon(1e-12));
    CHECK(t.val(out).at(0, 1) == doctest::Approx(v.at(0, 1)).epsilon(1e-12));
    CHECK(t.val(out).at(1, 0) == doctest::Approx(0.5 * (v.at(0, 0) + v.at(1, 0))).epsilon(1e-12));
    CHECK(t.val(out).at(2, 1) ==
          doctest::Approx((v.at(0, 1) + v.at(1, 1) + v.at(2, 1)) / 3.0).epsilon(1e-12));
}

TEST_CASE("causal attention ignores future keys") {
    Rng rng(6);
    Mat q = random_mat(4, 3, rng), k = random_mat(4, 3, rng), v = random_mat(4, 2, rng);
    Tape t1;
    int o1 = t1.attention(t1.leaf(q, false), t1.leaf(k, false), t1.leaf(v, false), true);
    Mat k2 = k, v2 = v;
    for (int c = 0; c < 3; ++c) k2.at(3, c) += 7.0;  // disturb only the last key and value
    for (int c = 0; c < 2; ++c) v2.at(3, c) -= 4.0;
    Tape t2;
    int o2 = t2.attention(t2.leaf(q, false), t2.leaf(k2, false), t2.leaf(v2, false), true);
    for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 2; ++c) CHECK(t1.val(o1).at(r, c) == t2.val(o2).at(r, c));
    CHECK(t1.val(o1).at(3, 0) != t2.val(o2).at(3, 0));
}

TEST_CASE("gated_scan edge behaviors") {
    Tape t;
    Mat u(4, 2);
    u.a = {1, 10, 2, 20, 3, 30, 4, 40};
    Mat ones(4, 2), zeros(4, 2);
    for (double& x : ones.a) x = 1.0;
    int cum = t.gated_scan(t.leaf(ones, false), t.leaf(u, false));
    CHECK(t.val(cum).at(0, 0) == 1.0);
    CHECK(t.val(cum).at(3, 0) == 10.0);
    CHECK(t.val(cum).at(3, 1) == 100.0);
    int idm = t.gated_scan(t.leaf(zeros, false), t.leaf(u, false));
    for (size_t i = 0; i < u.count(); ++i) CHECK(t.val(idm).a[i] == u.a[i]);
}

TEST_CASE("cross_entropy equals ln(n) on uniform logits") {
    for (int n : {4, 8}) {
        Tape t;
        Mat logits(3, n);
        int l = t.cross_entropy(t.leaf(logits, false), {{0, 1, 1.0}, {2, n - 1, 1.0}});
        CHECK(t.val(l).a[0] == doctest::Approx(std::log(double(n))).epsilon(1e-12));
    }
}

TEST_CASE("cross_entropy matches a long-double softmax enumeration") {
    Rng rng(19);
    Mat logits = random_mat(4, 5, rng, 2.0);
    std::vector<Tape::CePos> items = {{0, 2, 1.0}, {1, 4, 0.5}, {3, 0, 2.0}};
    Tape t;
    int l = t.cross_entropy(t.leaf(logits, false), items);
    long double total = 0.0, wsum = 0.0;
    for (const auto& it : items) {
        long double z = 0.0;
        for (int j = 0; j < 5; ++j) z += std::exp((long double)logits.at(it.pos, j));
        long double p = std::exp((long double)logits.at(it.pos, it.target)) / z;
        total += it.weight * -std::log(p);
        wsum += it.weight;
    }
    CHECK(t.val(l).a[0] == doctest::Approx(double(total / wsum)).epsilon(1e-10));
}

TEST_CASE("finite differences validate every op gradient") {
    Rng rng(101);

    fd_check("add", {random_mat(3, 4, rng), random_mat(3, 4, rng)},
             [&](Tape& t, const std::vector<int>& in) { return probed(t, t.add(in[0], in[1])); });
    fd_check("sub", {random_mat(3, 4, rng), random_mat(3, 4, rng)},
             [&](Tape& t, const std::vector<int>& in) { return probed(t, t.sub(in[0], in[1])); });
    fd_check("mul", {random_mat(3, 4, rng), random_mat(3, 4, rng)},
             [&](Tape& t, const std::vector<int>& in) { return probed(t, t.mul(in[0], in[1])); });
    fd_check("scale", {random_mat(3, 4, rng)}, [&](Tape& t, const std::vector<int>& in) {
        return probed(t, t.scale(in[0], -1.7));
    });
    fd_check("add_rowvec", {random_mat(3, 4, rng), random_mat(1, 4, rng)},
             [&](Tape& t, const std::vector<int>& in) {
                 return probed(t, t.add_rowvec(in[0], in[1]));
             });
    fd_check("mul_rowvec", {random_mat(3, 4, rng), random_mat(1, 4, rng)},
             [&](Tape& t, const std::vector<int>& in) {
                 return probed(t, t.mul_rowvec(in[0], in[1]));
             });
    fd_check("matmul", {random_mat(3, 4, rng), random_mat(4, 2, rng)},
             [&](Tape& t, const std::vector<int>& in) {
                 return probed(t, t.matmul(in[0], in[1]));
             });
    fd_check("matmul_nt", {random_mat(3, 4, rng), random_mat(5, 4, rng)},
             [&](Tape& t, const std::vector<int>& in) {
                 return probed(t, t.matmul_nt(in[0], in[1]));
             });
    fd_check("gelu", {random_mat(3, 4, rng)}, [&](Tape& t, const std::vector<int>& in) {
        return probed(t, t.gelu(in[0]));
    });
    fd_check("sigmoid", {random_mat(3, 4, rng)}, [&](Tape& t, const std::vector<int>& in) {
        return probed(t, t.sigmoid(in[0]));
    });
    fd_check("layernorm", {random_mat(3, 5, rng), random_mat(1, 5, rng), random_mat(1, 5, rng)},
             [&](Tape& t, const std::vector<int>& in) {
                 return probed(t, t.layernorm(in[0], in[1], in[2]));
             });
    std::vector<int> dup_ids = {2, 0, 2, 1};  // duplicate rows must accumulate
    fd_check("embed_rows", {random_mat(3, 4, rng)}, [&](Tape& t, const std::vector<int>& in) {
        return probed(t, t.embed_rows(in[0], dup_ids));
    });
    std::vector<int> takes = {1, 1, 0};
    fd_check("take_rows", {random_mat(4, 3, rng)}, [&](Tape& t, const std::vector<int>& in) {
        return probed(t, t.take_rows(in[0], takes));
    });
    fd_check("concat_rows", {random_mat(2, 3, rng), random_mat(1, 3, rng), random_mat(3, 3, rng)},
             [&](Tape& t, const std::vector<int>& in) {
                 return probed(t, t.concat_rows({in[0], in[1], in[2]}));
             });
    fd_check("slice_rows", {random_mat(5, 3, rng)}, [&](Tape& t, const std::vector<int>& in) {
        return probed(t, t.slice_rows(in[0], 1, 3));
    });
    fd_check("gated_scan", {random_mat(4, 3, rng, 0.4), random_mat(4, 3, rng)},
             [&](Tape& t, const std::vector<int>& in) {
                 return probed(t, t.gated_scan(in[0], in[1]));
             });
    fd_check("attention", {random_mat(3, 4, rng), random_mat(5, 4, rng), random_mat(5, 2, rng)},
             [&](Tape& t, const std::vector<int>& in) {
                 return probed(t, t.attention(in[0], in[1], in[2], false));
             });
    fd_check("attention_causal",
             {random_mat(4, 3, rng), random_mat(4, 3, rng), random_mat(4, 2, rng)},
             [&](Tape& t, const std::vector<int>& in) {
                 return probed(t, t.attention(in[0], in[1], in[2], true));
             });
    std::vector<Tape::CePos> ce = {{0, 2, 1.0}, {2, 5, 0.5}, {3, 0, 2.0}};
    fd_check("cross_entropy", {random_mat(4, 6, rng)}, [&](Tape& t, const std::vector<int>& in) {
        return t.cross_entropy(in[0], ce);
    });
    fd_check("sum", {random_mat(3, 3, rng)},
             [&](Tape& t, const std::vector<int>& in) { return t.sum(in[0]); });
    // a deeper composite resembling one block
    fd_check("composite",
             {random_mat(4, 6, rng), random_mat(6, 6, rng), random_mat(1, 6, rng),
              random_mat(1, 6, rng), random_mat(1, 6, rng)},
             [&](Tape& t, const std::vector<int>& in) {
                 int h = t.layernorm(in[0], in[2], t.leaf(Mat(1, 6), false));
                 int y = t.add(in[0], t.gelu(t.add_rowvec(t.matmul(h, in[1]), in[3])));
                 int z = t.layernorm(y, in[4], t.leaf(Mat(1, 6), false));
                 return probed(t, t.attention(z, z, z, true));
             });
}

TEST_CASE("frozen leaves stay out of the backward pass") {
    Rng rng(31);
    Mat a = random_mat(2, 3, rng), b = random_mat(2, 3, rng);
    Tape t;
    int fa = t.leaf(a, false);
    int tb = t.leaf(b, true);
    int loss = t.sum(t.mul(fa, tb));
    CHECK(t.needs_grad(loss));
    CHECK(!t.needs_grad(fa));
    t.backward(loss);
    for (size_t i = 0; i < a.count(); ++i) CHECK(t.grad(tb).a[i] == a.a[i]);
    CHECK_THROWS_AS(t.grad(fa), ValidationError);
}

TEST_CASE("an all-frozen graph cannot run backward") {
    Tape t;
    Mat a(2, 2);
    int loss = t.sum(t.leaf(a, false));
    CHECK(!t.needs_grad(loss));
    CHECK_THROWS_AS(t.backward(loss), ValidationError);
}

TEST_CASE("gradient accumulation across repeated use of one slot") {
    // loss = sum(x) + sum(x) so d(loss)/dx = 2 everywhere
    Tape t;
    Mat x(2, 2);
    x.a = {1, 2, 3, 4};
    int lx = t.leaf(x, true);
    int loss = t.add(t.sum(lx), t.sum(lx));
    t.backward(loss);
    for (size_t i = 0; i < x.count(); ++i) CHECK(t.grad(lx).a[i] == 2.0);
}

TEST_CASE("identical graphs produce bitwise identical losses and gradients") {
    auto build = [] {
        Rng rng(77);
        Tape t;
        int x = t.leaf(random_mat(4, 5, rng), true);
        int w = t.leaf(random_mat(5, 5, rng), true);
        int g = t.leaf(random_mat(1, 5, rng), true);
        int b = t.leaf(random_mat(1, 5, rng), true);
        int h = t.attention(t.layernorm(x, g, b), x, x, true);
        int loss = t.cross_entropy(t.matmul(h, w), {{0, 1, 1.0}, {3, 4, 1.0}});
        t.backward(loss);
        std::vector<double> out = t.val(loss).a;
        for (int i : {0, 1, 2, 3}) out.insert(out.end(), t.grad(i).a.begin(), t.grad(i).a.end());
        return out;
    };
    CHECK(build() == build());
}

TEST_CASE("shape violations are rejected") {
    Tape t;
    int a = t.leaf(Mat(2, 3), false);
    int b = t.leaf(Mat(3, 2), false);
    CHECK_THROWS_AS(t.add(a, b), ValidationError);
    CHECK_THROWS_AS(t.matmul(a, a), ValidationError);
    CHECK_THROWS_AS(t.attention(a, b, b, false), ValidationError);
    int c = t.leaf(Mat(3, 3), false);
    CHECK_THROWS_AS(t.attention(a, c, c, true), ValidationError);  // causal needs equal lengths
    CHECK_THROWS_AS(t.cross_entropy(a, {}), ValidationError);
    CHECK_THROWS_AS(t.cross_entropy(a, {{5, 0, 1.0}}), ValidationError);
    CHECK_THROWS_AS(t.embed_rows(a, {7}), ValidationError);
    CHECK_THROWS_AS(t.slice_rows(a, 1, 5), ValidationError);
}
