#pragma once

#include "obsyn/kernels.hpp"

// Shared blocked drivers. The factorization and triangular-solve logic is
// backend independent; only the inner kernels differ, so the drivers take
// the kernel table of the backend they belong to.

namespace obsyn::kern::detail {

long long blocked_potrf(const KernelTable& t, double* a, std::size_t n);
void blocked_trsm_lower(const KernelTable& t, const double* l, std::size_t n,
                        double* b, std::size_t nrhs);
void blocked_trsm_lower_t(const KernelTable& t, const double* l, std::size_t n,
                          double* b, std::size_t nrhs);
void eval_terms_generic(const KernelTable& t, const double* coefs,
                        const std::uint8_t* exps, std::size_t nterms,
                        std::size_t nvars, const double* const* vals,
                        double* out, std::size_t width);

} // namespace obsyn::kern::detail
