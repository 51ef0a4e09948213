#include "obsyn/kernels.hpp"

#include <cstdlib>

namespace obsyn::kern {

namespace {

std::optional<Backend> g_forced;

Backend detect() {
#ifdef OBSYN_HAVE_AVX2
    if (const char* env = std::getenv("OBSYN_FORCE_SCALAR");
        env && env[0] == '1')
        return Backend::scalar;
    if (cpu_has_avx2()) return Backend::avx2;
#endif
    return Backend::scalar;
}

Backend current() {
    if (g_forced) return *g_forced;
    static const Backend b = detect();
    return b;
}

const KernelTable& table() {
    return current() == Backend::avx2 ? avx2_table() : scalar_table();
}

} // namespace

bool cpu_has_avx2() {
#if defined(__x86_64__) || defined(_M_X64)
    return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
    return false;
#endif
}

Backend active_backend() { return current(); }

const char* backend_name(Backend b) {
    return b == Backend::avx2 ? "avx2" : "scalar";
}

void force_backend(std::optional<Backend> b) { g_forced = b; }

double dot(const double* x, const double* y, std::size_t n) {
    return table().dot(x, y, n);
}
void axpy(double a, const double* x, double* y, std::size_t n) {
    table().axpy(a, x, y, n);
}
void scal(double a, double* x, std::size_t n) { table().scal(a, x, n); }
void gemm_acc(const double* a, std::size_t lda, const double* b,
              std::size_t ldb, double* c, std::size_t ldc, std::size_t m,
              std::size_t k, std::size_t n, double alpha) {
    table().gemm_acc(a, lda, b, ldb, c, ldc, m, k, n, alpha);
}
void gemm_tn_acc(const double* a, std::size_t lda, const double* b,
                 std::size_t ldb, double* c, std::size_t ldc, std::size_t k,
                 std::size_t m, std::size_t n, double alpha) {
    table().gemm_tn_acc(a, lda, b, ldb, c, ldc, k, m, n, alpha);
}
void ger(double* a, std::size_t rows, std::size_t cols, double alpha,
         const double* u, const double* v) {
    table().ger(a, rows, cols, alpha, u, v);
}
long long potrf(double* a, std::size_t n) { return table().potrf(a, n); }
void trsm_lower(const double* l, std::size_t n, double* b, std::size_t nrhs) {
    table().trsm_lower(l, n, b, nrhs);
}
void trsm_lower_t(const double* l, std::size_t n, double* b,
                  std::size_t nrhs) {
    table().trsm_lower_t(l, n, b, nrhs);
}
void eval_terms(const double* coefs, const std::uint8_t* exps,
                std::size_t nterms, std::size_t nvars,
                const double* const* vals, double* out, std::size_t width) {
    table().eval_terms(coefs, exps, nterms, nvars, vals, out, width);
}

} // namespace obsyn::kern
