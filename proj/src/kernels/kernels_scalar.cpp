#include "kernels_internal.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace obsyn::kern {

namespace {

double s_dot(const double* x, const double* y, std::size_t n) {
    double a0 = 0.0, a1 = 0.0, a2 = 0.0, a3 = 0.0;
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        a0 += x[i] * y[i];
        a1 += x[i + 1] * y[i + 1];
        a2 += x[i + 2] * y[i + 2];
        a3 += x[i + 3] * y[i + 3];
    }
    for (; i < n; ++i) a0 += x[i] * y[i];
    return (a0 + a1) + (a2 + a3);
}

void s_axpy(double a, const double* x, double* y, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) y[i] += a * x[i];
}

void s_scal(double a, double* x, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) x[i] *= a;
}

void s_gemm_acc(const double* a, std::size_t lda, const double* b,
                std::size_t ldb, double* c, std::size_t ldc, std::size_t m,
                std::size_t k, std::size_t n, double alpha) {
    for (std::size_t i = 0; i < m; ++i) {
        const double* arow = a + i * lda;
        double* crow = c + i * ldc;
        for (std::size_t p = 0; p < k; ++p) {
            const double f = alpha * arow[p];
            if (f == 0.0) continue;
            s_axpy(f, b + p * ldb, crow, n);
        }
    }
}

void s_gemm_tn_acc(const double* a, std::size_t lda, const double* b,
                   std::size_t ldb, double* c, std::size_t ldc, std::size_t k,
                   std::size_t m, std::size_t n, double alpha) {
    for (std::size_t p = 0; p < k; ++p) {
        const double* arow = a + p * lda;
        const double* brow = b + p * ldb;
        for (std::size_t i = 0; i < m; ++i) {
            const double f = alpha * arow[i];
            if (f == 0.0) continue;
            s_axpy(f, brow, c + i * ldc, n);
        }
    }
}

void s_ger(double* a, std::size_t rows, std::size_t cols, double alpha,
           const double* u, const double* v) {
    for (std::size_t i = 0; i < rows; ++i) {
        const double f = alpha * u[i];
        if (f == 0.0) continue;
        s_axpy(f, v, a + i * cols, cols);
    }
}

long long s_potrf(double* a, std::size_t n) {
    return detail::blocked_potrf(scalar_table(), a, n);
}
void s_trsm_lower(const double* l, std::size_t n, double* b,
                  std::size_t nrhs) {
    detail::blocked_trsm_lower(scalar_table(), l, n, b, nrhs);
}
void s_trsm_lower_t(const double* l, std::size_t n, double* b,
                    std::size_t nrhs) {
    detail::blocked_trsm_lower_t(scalar_table(), l, n, b, nrhs);
}
void s_eval_terms(const double* coefs, const std::uint8_t* exps,
                  std::size_t nterms, std::size_t nvars,
                  const double* const* vals, double* out, std::size_t width) {
    detail::eval_terms_generic(scalar_table(), coefs, exps, nterms, nvars,
                               vals, out, width);
}

} // namespace

const KernelTable& scalar_table() {
    static const KernelTable t = {
        s_dot,  s_axpy,  s_scal,        s_gemm_acc,     s_gemm_tn_acc,
        s_ger,  s_potrf, s_trsm_lower,  s_trsm_lower_t, s_eval_terms,
    };
    return t;
}

namespace detail {

namespace {
constexpr std::size_t kPanel = 64;
}

long long blocked_potrf(const KernelTable& t, double* a, std::size_t n) {
    for (std::size_t k0 = 0; k0 < n; k0 += kPanel) {
        const std::size_t k1 = std::min(k0 + kPanel, n);
        // diagonal block
        for (std::size_t i = k0; i < k1; ++i) {
            for (std::size_t j = k0; j <= i; ++j) {
                const double s =
                    a[i * n + j] - t.dot(a + i * n + k0, a + j * n + k0, j - k0);
                if (i == j) {
                    if (!(s > 0.0) || !std::isfinite(s))
                        return static_cast<long long>(i);
                    a[i * n + i] = std::sqrt(s);
                } else {
                    a[i * n + j] = s / a[j * n + j];
                }
            }
        }
        // panel below the diagonal block
        for (std::size_t i = k1; i < n; ++i) {
            for (std::size_t j = k0; j < k1; ++j) {
                const double s =
                    a[i * n + j] - t.dot(a + i * n + k0, a + j * n + k0, j - k0);
                a[i * n + j] = s / a[j * n + j];
            }
        }
        // trailing lower-triangle update
        const std::size_t w = k1 - k0;
        if (w == 0) continue;
        for (std::size_t i = k1; i < n; ++i) {
            const double* pi = a + i * n + k0;
            for (std::size_t j = k1; j <= i; ++j)
                a[i * n + j] -= t.dot(pi, a + j * n + k0, w);
        }
    }
    return -1;
}

void blocked_trsm_lower(const KernelTable& t, const double* l, std::size_t n,
                        double* b, std::size_t nrhs) {
    for (std::size_t p0 = 0; p0 < n; p0 += kPanel) {
        const std::size_t p1 = std::min(p0 + kPanel, n);
        for (std::size_t i = p0; i < p1; ++i) {
            double* bi = b + i * nrhs;
            for (std::size_t j = p0; j < i; ++j)
                t.axpy(-l[i * n + j], b + j * nrhs, bi, nrhs);
            t.scal(1.0 / l[i * n + i], bi, nrhs);
        }
        if (p1 < n)
            t.gemm_acc(l + p1 * n + p0, n, b + p0 * nrhs, nrhs, b + p1 * nrhs,
                       nrhs, n - p1, p1 - p0, nrhs, -1.0);
    }
}

void blocked_trsm_lower_t(const KernelTable& t, const double* l, std::size_t n,
                          double* b, std::size_t nrhs) {
    std::size_t p1 = n;
    while (p1 > 0) {
        const std::size_t p0 = p1 > kPanel ? p1 - kPanel : 0;
        // subtract contributions of already-solved rows [p1, n)
        if (p1 < n)
            t.gemm_tn_acc(l + p1 * n + p0, n, b + p1 * nrhs, nrhs,
                          b + p0 * nrhs, nrhs, n - p1, p1 - p0, nrhs, -1.0);
        for (std::size_t ii = p1; ii-- > p0;) {
            double* bi = b + ii * nrhs;
            for (std::size_t j = ii + 1; j < p1; ++j)
                t.axpy(-l[j * n + ii], b + j * nrhs, bi, nrhs);
            t.scal(1.0 / l[ii * n + ii], bi, nrhs);
        }
        p1 = p0;
    }
}

void eval_terms_generic(const KernelTable& t, const double* coefs,
                        const std::uint8_t* exps, std::size_t nterms,
                        std::size_t nvars, const double* const* vals,
                        double* out, std::size_t width) {
    std::fill(out, out + width, 0.0);
    std::vector<double> term(width);
    for (std::size_t tm = 0; tm < nterms; ++tm) {
        std::fill(term.begin(), term.end(), coefs[tm]);
        for (std::size_t v = 0; v < nvars; ++v) {
            unsigned e = exps[tm * nvars + v];
            if (e == 0) continue;
            const double* x = vals[v];
            for (std::size_t p = 0; p < width; ++p) {
                double base = x[p];
                double acc = 1.0;
                unsigned ee = e;
                while (ee) {
                    if (ee & 1) acc *= base;
                    base *= base;
                    ee >>= 1;
                }
                term[p] *= acc;
            }
        }
        t.axpy(1.0, term.data(), out, width);
    }
}

} // namespace detail

} // namespace obsyn::kern
