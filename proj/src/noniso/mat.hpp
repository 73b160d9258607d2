#pragma once

#include <cassert>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace noniso {

// Error raised when inputs violate documented preconditions (bad graphs,
// shape mismatches, out-of-range parameters). CLI maps it to exit code 2/3.
class ValidationError : public std::runtime_error {
public:
    explicit ValidationError(const std::string& msg) : std::runtime_error(msg) {}
};

// Dense row-major matrix of doubles. Everything in this project is small
// (J <= 64 joints, feature widths <= a few hundred), so no views, no
// expression templates, just flat storage.
struct Mat {
    int rows = 0;
    int cols = 0;
    std::vector<double> a;

    Mat() = default;
    Mat(int r, int c) : rows(r), cols(c), a(static_cast<size_t>(r) * c, 0.0) {}

    double& operator()(int r, int c) {
        assert(r >= 0 && r < rows && c >= 0 && c < cols);
        return a[static_cast<size_t>(r) * cols + c];
    }
    double operator()(int r, int c) const {
        assert(r >= 0 && r < rows && c >= 0 && c < cols);
        return a[static_cast<size_t>(r) * cols + c];
    }

    double* row_ptr(int r) { return a.data() + static_cast<size_t>(r) * cols; }
    const double* row_ptr(int r) const { return a.data() + static_cast<size_t>(r) * cols; }

    bool same_shape(const Mat& o) const { return rows == o.rows && cols == o.cols; }

    static Mat identity(int n) {
        Mat m(n, n);
        for (int i = 0; i < n; ++i) m(i, i) = 1.0;
        return m;
    }

    static Mat zeros_like(const Mat& o) { return Mat(o.rows, o.cols); }
};

Mat matmul(const Mat& a, const Mat& b);
Mat matmul_tn(const Mat& a, const Mat& b); // a^T * b
Mat matmul_nt(const Mat& a, const Mat& b); // a * b^T
Mat transpose(const Mat& m);

Mat add(const Mat& a, const Mat& b);
Mat sub(const Mat& a, const Mat& b);
Mat scale(const Mat& a, double s);
void add_inplace(Mat& a, const Mat& b, double s = 1.0);

double max_abs_diff(const Mat& a, const Mat& b);
double frobenius_norm(const Mat& m);
double rel_frobenius_error(const Mat& got, const Mat& want);

// m * diag(d) * m^T for diagonal d (length m.cols).
Mat sandwich_diag(const Mat& m, const std::vector<double>& d);

void require(bool cond, const std::string& msg);

} // namespace noniso
