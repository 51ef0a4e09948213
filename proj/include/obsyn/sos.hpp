#pragma once

#include "obsyn/certificate.hpp"
#include "obsyn/observer.hpp"
#include "obsyn/poly.hpp"
#include "obsyn/sdp.hpp"
#include "obsyn/semialg.hpp"

#include <array>
#include <string>
#include <vector>

namespace obsyn {

/// SOS multiplier layout for one membership constraint q in Q_d(A):
/// q = s_0 + sum_k h_k s_k with s = basis^T G basis, G PSD. The budget
/// bounds deg(q); deg(s_0) <= 2*floor(budget/2) and
/// deg(s_k) = 2*floor((budget - deg h_k)/2). Inequalities whose degree
/// exceeds the budget get no multiplier.
struct QuadraticModuleTemplate {
    std::vector<std::size_t> vars;
    unsigned budget = 0;
    std::vector<Polynomial> multiplier_h;            // h_0 = 1 first
    std::vector<std::vector<Monomial>> bases;        // Gram basis per h
    std::vector<std::size_t> gram_sizes() const;
};

struct ConstraintLayout {
    std::string name;
    QuadraticModuleTemplate module;
    std::vector<Monomial> support; // ambient monomials = equality rows
    std::vector<int> block_ids;    // global SDP block per multiplier
    int row_offset = 0;
};

/// Everything needed to reconstruct certificates from a solver run: bases
/// and index maps for the polynomial variables, the per-constraint
/// quadratic-module templates, the affine variable scaling applied before
/// compilation, and the objective moment vector.
struct DualProgramLayout {
    unsigned degree = 0;     // d
    unsigned lie_budget = 0; // degree budget of the Lie constraint
    RegistryPtr registry;
    std::size_t n = 0, m = 0;
    std::vector<Monomial> v_basis, w_basis;
    // original = center + scale * scaled, one entry per registry variable
    std::vector<double> centers, scales;
    std::vector<Polynomial> phi_scaled;
    SemialgebraicSet x_scaled; // moment source for the averaged term
    std::array<ConstraintLayout, 4> constraints;
    std::vector<double> objective_moments; // aligned with w_basis
    double jacobian = 1.0; // volume factor between scaled and original (e,l)
    std::uint64_t problem_fingerprint = 0;

    std::size_t v_index(std::size_t i) const { return i; }
    std::size_t w_index(std::size_t j) const { return v_basis.size() + j; }
    std::size_t num_vars() const { return v_basis.size() + w_basis.size(); }
};

/// L_phi v = dv/dt + sum_i dv/dz_i * phi_i with the fixed registry layout
/// (t first, then the 2n augmented states).
Polynomial lie_derivative(const Polynomial& v, const AugmentedField& phi);

/// Substitutes t = 0 and integrates the X-variables against their
/// Lebesgue measure: every monomial x^a e^b l^c becomes
/// moment_X(a) * e^b l^c. Requires closed-form moments on X.
Polynomial average_initial(const Polynomial& v, const SemialgebraicSet& X,
                           std::size_t t_var);

/// Numeric evaluation of s_0 + sum h_k s_k for given Gram blocks.
Polynomial expand_quadratic_module(const QuadraticModuleTemplate& tmpl,
                                   const std::vector<la::Mat>& grams);

/// Compiles the degree-d dual program into a block-diagonal SDP:
/// free variables are the coefficients of v in R_d[t,z,l] and w in
/// R_d[e,l]; one PSD Gram block per SOS multiplier; one equality per
/// ambient monomial of each membership constraint; objective = Lebesgue
/// moments of E x L against the w basis. All sets are affinely rescaled
/// to unit-size coordinates first; certificates are mapped back on
/// recovery. d must be even, at least 2 and at least deg_z(phi) + 1.
std::pair<SdpProblem, DualProgramLayout>
compile_dual(const ObserverProblem& p, unsigned d);

/// Extracts (v, w) from a solve, audits all four constraint identities by
/// re-expanding the quadratic modules numerically, and maps the pair back
/// to original coordinates. Throws for infeasible/unbounded runs.
Certificate recover_certificate(const DualProgramLayout& layout,
                                const SdpSolution& sol);

/// Constraint polynomials q_c implied by (v, w) in scaled coordinates,
/// in layout order; used for residual audits.
std::array<Polynomial, 4> constraint_polynomials(const DualProgramLayout& l,
                                                 const Polynomial& v_scaled,
                                                 const Polynomial& w_scaled);

std::string layout_to_json(const DualProgramLayout& l);
DualProgramLayout layout_from_json(const std::string& text);
void save_layout(const DualProgramLayout& l, const std::string& path);
DualProgramLayout load_layout(const std::string& path);

} // namespace obsyn
