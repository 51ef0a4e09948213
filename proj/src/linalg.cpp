#include "obsyn/linalg.hpp"

#include "obsyn/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace obsyn::la {

bool chol_inplace(Mat& m) {
    if (!m.square()) throw std::invalid_argument("chol: matrix not square");
    return kern::potrf(m.data(), m.rows) < 0;
}

void forward_solve(const Mat& l, double* b, std::size_t nrhs) {
    kern::trsm_lower(l.data(), l.rows, b, nrhs);
}

void chol_solve(const Mat& l, double* b, std::size_t nrhs) {
    kern::trsm_lower(l.data(), l.rows, b, nrhs);
    kern::trsm_lower_t(l.data(), l.rows, b, nrhs);
}

Mat matmul(const Mat& a, const Mat& b) {
    if (a.cols != b.rows) throw std::invalid_argument("matmul: shape mismatch");
    Mat c(a.rows, b.cols);
    kern::gemm_acc(a.data(), a.cols, b.data(), b.cols, c.data(), c.cols,
                   a.rows, a.cols, b.cols, 1.0);
    return c;
}

Mat spd_inverse(const Mat& a, bool* ok) {
    Mat l = a;
    const bool good = chol_inplace(l);
    if (ok) *ok = good;
    if (!good && !ok) throw std::runtime_error("spd_inverse: not PD");
    Mat inv = Mat::identity(a.rows);
    if (good) chol_solve(l, inv.data(), a.rows);
    return inv;
}

double max_abs(const Mat& a) {
    double m = 0.0;
    for (double v : a.a) m = std::max(m, std::abs(v));
    return m;
}

// Householder tridiagonalization followed by implicit-shift QL.

namespace {

inline double hypot2(double a, double b) { return std::hypot(a, b); }

void tred2(std::vector<double>& a, std::size_t n, std::vector<double>& d,
           std::vector<double>& e, bool want_vecs) {
    auto A = [&](std::size_t i, std::size_t j) -> double& { return a[i * n + j]; };

    for (std::size_t i = n - 1; i > 0; --i) {
        const std::size_t l = i - 1;
        double h = 0.0, scale = 0.0;
        if (l > 0) {
            for (std::size_t k = 0; k <= l; ++k) scale += std::abs(A(i, k));
            if (scale == 0.0) {
                e[i] = A(i, l);
            } else {
                for (std::size_t k = 0; k <= l; ++k) {
                    A(i, k) /= scale;
                    h += A(i, k) * A(i, k);
                }
                double f = A(i, l);
                double g = f >= 0.0 ? -std::sqrt(h) : std::sqrt(h);
                e[i] = scale * g;
                h -= f * g;
                A(i, l) = f - g;
                f = 0.0;
                for (std::size_t j = 0; j <= l; ++j) {
                    if (want_vecs) A(j, i) = A(i, j) / h;
                    g = 0.0;
                    for (std::size_t k = 0; k <= j; ++k) g += A(j, k) * A(i, k);
                    for (std::size_t k = j + 1; k <= l; ++k)
                        g += A(k, j) * A(i, k);
                    e[j] = g / h;
                    f += e[j] * A(i, j);
                }
                const double hh = f / (h + h);
                for (std::size_t j = 0; j <= l; ++j) {
                    f = A(i, j);
                    e[j] = g = e[j] - hh * f;
                    for (std::size_t k = 0; k <= j; ++k)
                        A(j, k) -= f * e[k] + g * A(i, k);
                }
            }
        } else {
            e[i] = A(i, l);
        }
        d[i] = h;
    }
    d[0] = 0.0;
    e[0] = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        if (want_vecs) {
            if (d[i] != 0.0) {
                for (std::size_t j = 0; j < i; ++j) {
                    double g = 0.0;
                    for (std::size_t k = 0; k < i; ++k) g += A(i, k) * A(k, j);
                    for (std::size_t k = 0; k < i; ++k) A(k, j) -= g * A(k, i);
                }
            }
            d[i] = A(i, i);
            A(i, i) = 1.0;
            for (std::size_t j = 0; j < i; ++j) A(j, i) = A(i, j) = 0.0;
        } else {
            d[i] = A(i, i);
        }
    }
}

bool tqli(std::vector<double>& d, std::vector<double>& e, std::size_t n,
          std::vector<double>* z) {
    auto Z = [&](std::size_t i, std::size_t j) -> double& {
        return (*z)[i * n + j];
    };
    for (std::size_t i = 1; i < n; ++i) e[i - 1] = e[i];
    e[n - 1] = 0.0;
    for (std::size_t l = 0; l < n; ++l) {
        int iter = 0;
        std::size_t m;
        do {
            for (m = l; m + 1 < n; ++m) {
                const double dd = std::abs(d[m]) + std::abs(d[m + 1]);
                if (std::abs(e[m]) <= 1e-300 || std::abs(e[m]) <= 2.3e-16 * dd)
                    break;
            }
            if (m != l) {
                if (iter++ == 50) return false;
                double g = (d[l + 1] - d[l]) / (2.0 * e[l]);
                double r = hypot2(g, 1.0);
                g = d[m] - d[l] + e[l] / (g + (g >= 0 ? std::abs(r) : -std::abs(r)));
                double s = 1.0, c = 1.0, p = 0.0;
                for (std::size_t i = m; i-- > l;) {
                    double f = s * e[i];
                    const double b = c * e[i];
                    r = hypot2(f, g);
                    e[i + 1] = r;
                    if (r == 0.0) {
                        d[i + 1] -= p;
                        e[m] = 0.0;
                        break;
                    }
                    s = f / r;
                    c = g / r;
                    g = d[i + 1] - p;
                    r = (d[i] - g) * s + 2.0 * c * b;
                    p = s * r;
                    d[i + 1] = g + p;
                    g = c * r - b;
                    if (z) {
                        for (std::size_t k = 0; k < n; ++k) {
                            f = Z(k, i + 1);
                            Z(k, i + 1) = s * Z(k, i) + c * f;
                            Z(k, i) = c * Z(k, i) - s * f;
                        }
                    }
                }
                if (r == 0.0 && m - l > 1) continue;
                d[l] -= p;
                e[l] = g;
                e[m] = 0.0;
            }
        } while (m != l);
    }
    return true;
}

} // namespace

bool sym_eig(Mat a, std::vector<double>& evals, Mat* vecs) {
    if (!a.square()) throw std::invalid_argument("sym_eig: matrix not square");
    const std::size_t n = a.rows;
    evals.assign(n, 0.0);
    if (n == 0) return true;
    if (n == 1) {
        evals[0] = a(0, 0);
        if (vecs) *vecs = Mat::identity(1);
        return true;
    }
    std::vector<double> e(n, 0.0);
    tred2(a.a, n, evals, e, vecs != nullptr);
    const bool ok = tqli(evals, e, n, vecs ? &a.a : nullptr);
    if (vecs) {
        *vecs = Mat(n, n);
        vecs->a = a.a;
    }
    // ascending order, vectors permuted alongside
    std::vector<std::size_t> idx(n);
    for (std::size_t i = 0; i < n; ++i) idx[i] = i;
    std::sort(idx.begin(), idx.end(),
              [&](std::size_t x, std::size_t y) { return evals[x] < evals[y]; });
    std::vector<double> sorted(n);
    for (std::size_t i = 0; i < n; ++i) sorted[i] = evals[idx[i]];
    if (vecs) {
        Mat v(n, n);
        for (std::size_t j = 0; j < n; ++j)
            for (std::size_t i = 0; i < n; ++i) v(i, j) = (*vecs)(i, idx[j]);
        *vecs = std::move(v);
    }
    evals = std::move(sorted);
    return ok;
}

double sym_min_eig(const Mat& a) {
    std::vector<double> ev;
    if (!sym_eig(a, ev)) throw std::runtime_error("sym_min_eig: no convergence");
    return ev.empty() ? 0.0 : ev.front();
}

} // namespace obsyn::la
