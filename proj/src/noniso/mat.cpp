#include "noniso/mat.hpp"

#include <cmath>

namespace noniso {

void require(bool cond, const std::string& msg) {
    if (!cond) throw ValidationError(msg);
}

Mat matmul(const Mat& a, const Mat& b) {
    require(a.cols == b.rows, "matmul: inner dimensions differ");
    Mat out(a.rows, b.cols);
    for (int i = 0; i < a.rows; ++i) {
        for (int k = 0; k < a.cols; ++k) {
            const double aik = a(i, k);
            if (aik == 0.0) continue;
            const double* brow = b.row_ptr(k);
            double* orow = out.row_ptr(i);
            for (int j = 0; j < b.cols; ++j) orow[j] += aik * brow[j];
        }
    }
    return out;
}

Mat matmul_tn(const Mat& a, const Mat& b) {
    require(a.rows == b.rows, "matmul_tn: inner dimensions differ");
    Mat out(a.cols, b.cols);
    for (int k = 0; k < a.rows; ++k) {
        const double* arow = a.row_ptr(k);
        const double* brow = b.row_ptr(k);
        for (int i = 0; i < a.cols; ++i) {
            const double aki = arow[i];
            if (aki == 0.0) continue;
            double* orow = out.row_ptr(i);
            for (int j = 0; j < b.cols; ++j) orow[j] += aki * brow[j];
        }
    }
    return out;
}

Mat matmul_nt(const Mat& a, const Mat& b) {
    require(a.cols == b.cols, "matmul_nt: inner dimensions differ");
    Mat out(a.rows, b.rows);
    for (int i = 0; i < a.rows; ++i) {
        const double* arow = a.row_ptr(i);
        for (int j = 0; j < b.rows; ++j) {
            const double* brow = b.row_ptr(j);
            double s = 0.0;
            for (int k = 0; k < a.cols; ++k) s += arow[k] * brow[k];
            out(i, j) = s;
        }
    }
    return out;
}

Mat transpose(const Mat& m) {
    Mat out(m.cols, m.rows);
    for (int i = 0; i < m.rows; ++i)
        for (int j = 0; j < m.cols; ++j) out(j, i) = m(i, j);
    return out;
}

Mat add(const Mat& a, const Mat& b) {
    require(a.same_shape(b), "add: shape mismatch");
    Mat out = a;
    for (size_t i = 0; i < out.a.size(); ++i) out.a[i] += b.a[i];
    return out;
}

Mat sub(const Mat& a, const Mat& b) {
    require(a.same_shape(b), "sub: shape mismatch");
    Mat out = a;
    for (size_t i = 0; i < out.a.size(); ++i) out.a[i] -= b.a[i];
    return out;
}

Mat scale(const Mat& a, double s) {
    Mat out = a;
    for (double& v : out.a) v *= s;
    return out;
}

void add_inplace(Mat& a, const Mat& b, double s) {
    require(a.same_shape(b), "add_inplace: shape mismatch");
    for (size_t i = 0; i < a.a.size(); ++i) a.a[i] += s * b.a[i];
}

double max_abs_diff(const Mat& a, const Mat& b) {
    require(a.same_shape(b), "max_abs_diff: shape mismatch");
    double m = 0.0;
    for (size_t i = 0; i < a.a.size(); ++i) m = std::max(m, std::fabs(a.a[i] - b.a[i]));
    return m;
}

double frobenius_norm(const Mat& m) {
    double s = 0.0;
    for (double v : m.a) s += v * v;
    return std::sqrt(s);
}

double rel_frobenius_error(const Mat& got, const Mat& want) {
    const double denom = frobenius_norm(want);
    if (denom == 0.0) return frobenius_norm(got) == 0.0 ? 0.0 : INFINITY;
    return frobenius_norm(sub(got, want)) / denom;
}

Mat sandwich_diag(const Mat& m, const std::vector<double>& d) {
    require(static_cast<int>(d.size()) == m.cols, "sandwich_diag: diagonal length mismatch");
    Mat scaled = m;
    for (int i = 0; i < m.rows; ++i)
        for (int j = 0; j < m.cols; ++j) scaled(i, j) *= d[j];
    return matmul_nt(scaled, m);
}

} // namespace noniso
