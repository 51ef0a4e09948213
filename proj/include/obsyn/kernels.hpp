#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>

// Dense numeric kernels used by the SDP solver and the grid sweeps.
// Every kernel has a scalar reference implementation and an AVX2+FMA
// variant; the active backend is chosen once at runtime from CPUID and
// can be pinned with force_backend() or the OBSYN_FORCE_SCALAR env var.
// Scalar and SIMD paths are equivalence-tested against each other.

namespace obsyn::kern {

enum class Backend { scalar, avx2 };

Backend active_backend();
const char* backend_name(Backend b);
// Pin the backend (tests); nullopt restores runtime detection.
void force_backend(std::optional<Backend> b);
bool cpu_has_avx2();

double dot(const double* x, const double* y, std::size_t n);
// y += a*x
void axpy(double a, const double* x, double* y, std::size_t n);
// x *= a
void scal(double a, double* x, std::size_t n);

// Row-major GEMM: C(m x n) += alpha * A(m x k) * B(k x n).
void gemm_acc(const double* a, std::size_t lda, const double* b,
              std::size_t ldb, double* c, std::size_t ldc,
              std::size_t m, std::size_t k, std::size_t n, double alpha);

// Transposed-A GEMM: C(m x n) += alpha * A^T B where A is k x m row-major.
void gemm_tn_acc(const double* a, std::size_t lda, const double* b,
                 std::size_t ldb, double* c, std::size_t ldc,
                 std::size_t k, std::size_t m, std::size_t n, double alpha);

// A(rows x cols, contiguous) += alpha * u v^T.
void ger(double* a, std::size_t rows, std::size_t cols, double alpha,
         const double* u, const double* v);

// In-place lower Cholesky of row-major A(n x n); reads the lower triangle,
// writes L over it (upper triangle left untouched).
// Returns the first pivot index that failed, or -1 on success.
long long potrf(double* a, std::size_t n);

// Solve L Y = B (forward) / L^T Y = B (backward) in place; B is n x nrhs
// row-major, L is the lower factor from potrf.
void trsm_lower(const double* l, std::size_t n, double* b, std::size_t nrhs);
void trsm_lower_t(const double* l, std::size_t n, double* b, std::size_t nrhs);

// Batched sparse-exponent term evaluation across `width` points laid out
// variable-major: vals[v][p] is variable v at point p.
//   out[p] = sum_t coefs[t] * prod_v vals[v][p]^exps[t*nvars+v]
void eval_terms(const double* coefs, const std::uint8_t* exps,
                std::size_t nterms, std::size_t nvars,
                const double* const* vals, double* out, std::size_t width);

struct KernelTable {
    double (*dot)(const double*, const double*, std::size_t);
    void (*axpy)(double, const double*, double*, std::size_t);
    void (*scal)(double, double*, std::size_t);
    void (*gemm_acc)(const double*, std::size_t, const double*, std::size_t,
                     double*, std::size_t, std::size_t, std::size_t,
                     std::size_t, double);
    void (*gemm_tn_acc)(const double*, std::size_t, const double*, std::size_t,
                        double*, std::size_t, std::size_t, std::size_t,
                        std::size_t, double);
    void (*ger)(double*, std::size_t, std::size_t, double,
                const double*, const double*);
    long long (*potrf)(double*, std::size_t);
    void (*trsm_lower)(const double*, std::size_t, double*, std::size_t);
    void (*trsm_lower_t)(const double*, std::size_t, double*, std::size_t);
    void (*eval_terms)(const double*, const std::uint8_t*, std::size_t,
                       std::size_t, const double* const*, double*,
                       std::size_t);
};

const KernelTable& scalar_table();
const KernelTable& avx2_table();

} // namespace obsyn::kern
