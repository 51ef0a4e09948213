#pragma once

#include "obsyn/linalg.hpp"

#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace obsyn {

/// One coefficient of a symmetric constraint matrix, upper triangle
/// (i <= j). `value` is the matrix entry itself; inner products weight
/// off-diagonal entries by 2, i.e. <A, X> = sum_d A_dd X_dd + 2 sum_{i<j}
/// A_ij X_ij.
struct BlockEntry {
    int block = 0;
    int i = 0, j = 0;
    double value = 0.0;
};

struct SdpRow {
    std::vector<std::pair<int, double>> free_terms; // (free index, coeff)
    std::vector<BlockEntry> mat_terms;
    double rhs = 0.0;
};

/// Block-diagonal SDP with free scalar variables:
///   minimize  <C, X> + c_f . y
///   s.t.      <A_r, X> + a_r . y = b_r,   X_k >= 0 (PSD), y free.
struct SdpProblem {
    std::vector<int> psd_blocks; // block dimensions
    int num_free = 0;
    std::vector<SdpRow> rows;
    std::vector<std::pair<int, double>> obj_free;
    std::vector<BlockEntry> obj_mat;
    // sense is always minimize

    /// Throws std::invalid_argument on malformed data (bad indices,
    /// non-finite values, i > j entries).
    void validate() const;
};

enum class SolveStatus { optimal, infeasible, unbounded, max_iter,
                         numerical_failure };

const char* status_name(SolveStatus s);

struct SdpResiduals {
    double primal_eq = 0.0; // ||A(X) + Fy - b||_inf
    double dual = 0.0;      // max dual-feasibility violation
    double gap = 0.0;       // relative duality gap
    double min_eig = 0.0;   // smallest eigenvalue over primal blocks
};

struct SdpSolveOptions {
    double tol = 1e-7;
    int max_iter = 200;
    bool want_log = true;
};

struct SdpSolution {
    SolveStatus status = SolveStatus::numerical_failure;
    std::vector<double> free_values;
    std::vector<la::Mat> block_matrices; // primal X_k
    std::vector<la::Mat> dual_blocks;    // dual slack S_k
    std::vector<double> equality_duals;  // lambda
    SdpResiduals residuals;
    int iterations = 0;
    double primal_objective = 0.0;
    double dual_objective = 0.0;
    std::string log; // per-iteration lines: iter, mu, steps, residuals
    std::string failure_detail;
};

/// Deterministic primal-dual path-following solve (HKM direction with a
/// Mehrotra corrector, dense Schur complement, free variables eliminated
/// through the F^T M^{-1} F system). No randomness anywhere: identical
/// inputs give bit-identical outputs.
SdpSolution solve(const SdpProblem& p, const SdpSolveOptions& opts = {});

/// KKT residuals of an arbitrary (problem, solution) pair.
SdpResiduals residuals(const SdpProblem& p, const SdpSolution& s);

/// SDPA sparse export (.dat-s). Free variables are written as a trailing
/// diagonal block with negative declared size; the objective is written as
/// matrix 0 with flipped sign per the SDPA max convention. Entries are
/// coalesced and emitted in a fixed order with 17 significant digits, so
/// the output is bit-exact reproducible.
std::string export_sdpa(const SdpProblem& p);

/// Inverse of export_sdpa on its image; tolerates comments and the usual
/// SDPA punctuation. Errors carry 1-based line numbers.
SdpProblem import_sdpa(std::string_view text);

} // namespace obsyn
