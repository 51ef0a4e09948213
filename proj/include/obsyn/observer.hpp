#pragma once

#include "obsyn/poly.hpp"
#include "obsyn/semialg.hpp"

#include <cstdint>
#include <vector>

namespace obsyn {

/// Observer synthesis instance: drift dynamics xdot = f(t, x) with output
/// y = h(x), a constant output-injection gain to be designed, and compact
/// sets for states (X), initial errors (E), target errors (E_T) and gains
/// (L). The registry layout is fixed: [t, x1..xn, e1..en, l1..l_{n*m}],
/// gains flattened row-major (l_{ij} multiplies output j in state row i).
class ObserverProblem {
public:
    static ObserverProblem create(std::size_t n, std::size_t m,
                                  std::vector<std::string> f_text,
                                  std::vector<std::string> h_text,
                                  const SemialgebraicSet& X,
                                  const SemialgebraicSet& E,
                                  const SemialgebraicSet& E_T,
                                  const SemialgebraicSet& L, double horizon);
    /// Registry for a given (n, m): names t, x1.., e1.., l1..
    static RegistryPtr make_registry(std::size_t n, std::size_t m);

    const RegistryPtr& registry() const { return reg_; }
    std::size_t n() const { return n_; }
    std::size_t m() const { return m_; }
    const std::vector<Polynomial>& f() const { return f_; }
    const std::vector<Polynomial>& h() const { return h_; }
    const SemialgebraicSet& X() const { return X_; }
    const SemialgebraicSet& E() const { return E_; }
    const SemialgebraicSet& E_T() const { return ET_; }
    const SemialgebraicSet& L() const { return L_; }
    double horizon() const { return horizon_; }

    std::size_t t_var() const { return 0; }
    std::size_t x_var(std::size_t i) const { return 1 + i; }
    std::size_t e_var(std::size_t i) const { return 1 + n_ + i; }
    std::size_t l_var(std::size_t flat) const { return 1 + 2 * n_ + flat; }
    std::size_t l_var(std::size_t i, std::size_t j) const {
        return l_var(i * m_ + j);
    }
    std::vector<std::size_t> x_vars() const;
    std::vector<std::size_t> e_vars() const;
    std::vector<std::size_t> l_vars() const;
    /// z = (x, e)
    std::vector<std::size_t> z_vars() const;

    /// Hash of the canonical problem description (dynamics, sets, horizon);
    /// certificates carry it so downstream stages can detect mismatches.
    std::uint64_t fingerprint() const;
    std::string canonical_description() const;

private:
    ObserverProblem() = default;
    RegistryPtr reg_;
    std::size_t n_ = 0, m_ = 0;
    std::vector<Polynomial> f_, h_;
    SemialgebraicSet X_, E_, ET_, L_;
    double horizon_ = 1.0;
};

/// Error dynamics g(t, x, e, l) with
///   g_i = f_i(t,x) - f_i(t,x-e) - sum_j l_ij (h_j(x) - h_j(x-e));
/// vanishes identically at e = 0.
std::vector<Polynomial> error_dynamics(const ObserverProblem& p);

/// Stacked field phi = (f, g) of the augmented state z = (x, e), written in
/// internal time tau in [0, 1]: phi(tau, .) = T * field(T tau, .).
struct AugmentedField {
    std::size_t n = 0;
    std::vector<Polynomial> phi; // 2n components over (t, x, e, l)

    unsigned degree() const;
    /// Degree in the state variables z=(x,e) only.
    unsigned degree_in_z(const ObserverProblem& p) const;
};

AugmentedField augmented_field(const ObserverProblem& p);

std::string set_description(const SemialgebraicSet& s);

} // namespace obsyn
