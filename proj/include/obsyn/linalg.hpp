#pragma once

#include <cstddef>
#include <vector>

namespace obsyn::la {

/// Row-major dense matrix.
struct Mat {
    std::size_t rows = 0, cols = 0;
    std::vector<double> a;

    Mat() = default;
    Mat(std::size_t r, std::size_t c) : rows(r), cols(c), a(r * c, 0.0) {}

    double& operator()(std::size_t i, std::size_t j) { return a[i * cols + j]; }
    double operator()(std::size_t i, std::size_t j) const {
        return a[i * cols + j];
    }
    double* data() { return a.data(); }
    const double* data() const { return a.data(); }
    bool square() const { return rows == cols; }

    static Mat identity(std::size_t n) {
        Mat m(n, n);
        for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
        return m;
    }
};

/// In-place lower Cholesky; returns false if the matrix is not positive
/// definite (first failing pivot encountered).
bool chol_inplace(Mat& m);

/// Solves (L L^T) X = B given the lower factor, B row-major n x nrhs.
void chol_solve(const Mat& l, double* b, std::size_t nrhs);

/// B := L^{-1} B (forward substitution only).
void forward_solve(const Mat& l, double* b, std::size_t nrhs);

/// Symmetric eigenvalues (ascending). If vecs is non-null it receives the
/// orthonormal eigenvectors as columns. Returns false if the QL iteration
/// fails to converge.
bool sym_eig(Mat a, std::vector<double>& evals, Mat* vecs = nullptr);

/// Smallest eigenvalue of a symmetric matrix.
double sym_min_eig(const Mat& a);

/// C = A * B (dense, row-major).
Mat matmul(const Mat& a, const Mat& b);

/// Inverse of an SPD matrix via its Cholesky factor.
Mat spd_inverse(const Mat& a, bool* ok = nullptr);

double max_abs(const Mat& a);

} // namespace obsyn::la
