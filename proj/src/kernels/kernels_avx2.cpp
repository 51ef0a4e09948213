#include "kernels_internal.hpp"

#ifdef OBSYN_HAVE_AVX2

#include <immintrin.h>

#include <algorithm>
#include <vector>

namespace obsyn::kern {

namespace {

inline double hsum(__m256d v) {
    __m128d lo = _mm256_castpd256_pd128(v);
    __m128d hi = _mm256_extractf128_pd(v, 1);
    lo = _mm_add_pd(lo, hi);
    return _mm_cvtsd_f64(_mm_add_sd(lo, _mm_unpackhi_pd(lo, lo)));
}

double v_dot(const double* x, const double* y, std::size_t n) {
    __m256d a0 = _mm256_setzero_pd();
    __m256d a1 = _mm256_setzero_pd();
    __m256d a2 = _mm256_setzero_pd();
    __m256d a3 = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 16 <= n; i += 16) {
        a0 = _mm256_fmadd_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i), a0);
        a1 = _mm256_fmadd_pd(_mm256_loadu_pd(x + i + 4),
                             _mm256_loadu_pd(y + i + 4), a1);
        a2 = _mm256_fmadd_pd(_mm256_loadu_pd(x + i + 8),
                             _mm256_loadu_pd(y + i + 8), a2);
        a3 = _mm256_fmadd_pd(_mm256_loadu_pd(x + i + 12),
                             _mm256_loadu_pd(y + i + 12), a3);
    }
    for (; i + 4 <= n; i += 4)
        a0 = _mm256_fmadd_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i), a0);
    double s = hsum(_mm256_add_pd(_mm256_add_pd(a0, a1), _mm256_add_pd(a2, a3)));
    for (; i < n; ++i) s += x[i] * y[i];
    return s;
}

void v_axpy(double a, const double* x, double* y, std::size_t n) {
    const __m256d va = _mm256_set1_pd(a);
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8) {
        _mm256_storeu_pd(
            y + i, _mm256_fmadd_pd(va, _mm256_loadu_pd(x + i),
                                   _mm256_loadu_pd(y + i)));
        _mm256_storeu_pd(
            y + i + 4, _mm256_fmadd_pd(va, _mm256_loadu_pd(x + i + 4),
                                       _mm256_loadu_pd(y + i + 4)));
    }
    for (; i + 4 <= n; i += 4)
        _mm256_storeu_pd(
            y + i, _mm256_fmadd_pd(va, _mm256_loadu_pd(x + i),
                                   _mm256_loadu_pd(y + i)));
    for (; i < n; ++i) y[i] += a * x[i];
}

void v_scal(double a, double* x, std::size_t n) {
    const __m256d va = _mm256_set1_pd(a);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4)
        _mm256_storeu_pd(x + i, _mm256_mul_pd(va, _mm256_loadu_pd(x + i)));
    for (; i < n; ++i) x[i] *= a;
}

// two-row broadcast-FMA inner update: c0/c1 += f0/f1 * b
inline void fma2_rows(double f0, double f1, const double* b, double* c0,
                      double* c1, std::size_t n) {
    const __m256d v0 = _mm256_set1_pd(f0);
    const __m256d v1 = _mm256_set1_pd(f1);
    std::size_t j = 0;
    for (; j + 4 <= n; j += 4) {
        const __m256d vb = _mm256_loadu_pd(b + j);
        _mm256_storeu_pd(c0 + j,
                         _mm256_fmadd_pd(v0, vb, _mm256_loadu_pd(c0 + j)));
        _mm256_storeu_pd(c1 + j,
                         _mm256_fmadd_pd(v1, vb, _mm256_loadu_pd(c1 + j)));
    }
    for (; j < n; ++j) {
        c0[j] += f0 * b[j];
        c1[j] += f1 * b[j];
    }
}

void v_gemm_acc(const double* a, std::size_t lda, const double* b,
                std::size_t ldb, double* c, std::size_t ldc, std::size_t m,
                std::size_t k, std::size_t n, double alpha) {
    std::size_t i = 0;
    for (; i + 2 <= m; i += 2) {
        const double* a0 = a + i * lda;
        const double* a1 = a0 + lda;
        double* c0 = c + i * ldc;
        double* c1 = c0 + ldc;
        for (std::size_t p = 0; p < k; ++p)
            fma2_rows(alpha * a0[p], alpha * a1[p], b + p * ldb, c0, c1, n);
    }
    if (i < m) {
        const double* a0 = a + i * lda;
        double* c0 = c + i * ldc;
        for (std::size_t p = 0; p < k; ++p) v_axpy(alpha * a0[p], b + p * ldb, c0, n);
    }
}

void v_gemm_tn_acc(const double* a, std::size_t lda, const double* b,
                   std::size_t ldb, double* c, std::size_t ldc, std::size_t k,
                   std::size_t m, std::size_t n, double alpha) {
    for (std::size_t p = 0; p < k; ++p) {
        const double* arow = a + p * lda;
        const double* brow = b + p * ldb;
        std::size_t i = 0;
        for (; i + 2 <= m; i += 2)
            fma2_rows(alpha * arow[i], alpha * arow[i + 1], brow, c + i * ldc,
                      c + (i + 1) * ldc, n);
        if (i < m) v_axpy(alpha * arow[i], brow, c + i * ldc, n);
    }
}

void v_ger(double* a, std::size_t rows, std::size_t cols, double alpha,
           const double* u, const double* v) {
    std::size_t i = 0;
    for (; i + 2 <= rows; i += 2)
        fma2_rows(alpha * u[i], alpha * u[i + 1], v, a + i * cols,
                  a + (i + 1) * cols, cols);
    if (i < rows) v_axpy(alpha * u[i], v, a + i * cols, cols);
}

long long v_potrf(double* a, std::size_t n) {
    return detail::blocked_potrf(avx2_table(), a, n);
}
void v_trsm_lower(const double* l, std::size_t n, double* b,
                  std::size_t nrhs) {
    detail::blocked_trsm_lower(avx2_table(), l, n, b, nrhs);
}
void v_trsm_lower_t(const double* l, std::size_t n, double* b,
                    std::size_t nrhs) {
    detail::blocked_trsm_lower_t(avx2_table(), l, n, b, nrhs);
}
void v_eval_terms(const double* coefs, const std::uint8_t* exps,
                  std::size_t nterms, std::size_t nvars,
                  const double* const* vals, double* out, std::size_t width) {
    detail::eval_terms_generic(avx2_table(), coefs, exps, nterms, nvars, vals,
                               out, width);
}

} // namespace

const KernelTable& avx2_table() {
    static const KernelTable t = {
        v_dot,  v_axpy,  v_scal,       v_gemm_acc,     v_gemm_tn_acc,
        v_ger,  v_potrf, v_trsm_lower, v_trsm_lower_t, v_eval_terms,
    };
    return t;
}

} // namespace obsyn::kern

#else // !OBSYN_HAVE_AVX2

namespace obsyn::kern {
const KernelTable& avx2_table() { return scalar_table(); }
} // namespace obsyn::kern

#endif
