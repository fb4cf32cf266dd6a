#pragma once

#include <algorithm>
#include <vector>

#include "ssr/common.hpp"

namespace ssr {

// Dense row-major matrix of doubles. The whole numeric stack runs in double so
// finite-difference checks have headroom; model scale keeps memory trivial.
struct Mat {
    int rows = 0, cols = 0;
    std::vector<double> a;

    Mat() = default;
    Mat(int r, int c) : rows(r), cols(c), a(size_t(r) * size_t(c), 0.0) {}

    double& at(int r, int c) { return a[size_t(r) * cols + c]; }
    double at(int r, int c) const { return a[size_t(r) * cols + c]; }
    double* row(int r) { return a.data() + size_t(r) * cols; }
    const double* row(int r) const { return a.data() + size_t(r) * cols; }
    size_t count() const { return a.size(); }
    bool same_shape(const Mat& o) const { return rows == o.rows && cols == o.cols; }
    void zero() { std::fill(a.begin(), a.end(), 0.0); }
};

// C += A * B
void mm_acc(const Mat& A, const Mat& B, Mat& C);
// C += A * B^T
void mm_nt_acc(const Mat& A, const Mat& B, Mat& C);
// C += A^T * B
void mm_tn_acc(const Mat& A, const Mat& B, Mat& C);

}  // namespace ssr
