#include "obsyn/sos.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <stdexcept>

namespace obsyn {

std::vector<std::size_t> QuadraticModuleTemplate::gram_sizes() const {
    std::vector<std::size_t> out;
    for (const auto& b : bases) out.push_back(b.size());
    return out;
}

Polynomial lie_derivative(const Polynomial& v, const AugmentedField& phi) {
    const auto& reg = v.registry();
    if (!reg) throw std::invalid_argument("lie_derivative: empty polynomial");
    Polynomial out = v.differentiate(0); // time variable is slot 0
    for (std::size_t i = 0; i < phi.phi.size(); ++i)
        out = out + v.differentiate(1 + i) * phi.phi[i];
    return out;
}

Polynomial average_initial(const Polynomial& v, const SemialgebraicSet& X,
                           std::size_t t_var) {
    if (!X.has_moments())
        throw std::invalid_argument(
            "average_initial: X has no closed-form moments");
    const auto& reg = v.registry();
    const Polynomial v0 = v.substitute_values({{t_var, 0.0}});
    Polynomial::TermMap out;
    const auto& xvars = X.vars();
    for (const auto& [mono, c] : v0.terms()) {
        Monomial xpart(reg->size()), rest(reg->size());
        for (std::size_t var = 0; var < mono.exps.size(); ++var) {
            if (std::find(xvars.begin(), xvars.end(), var) != xvars.end())
                xpart.exps[var] = mono.exps[var];
            else
                rest.exps[var] = mono.exps[var];
        }
        const double mom = X.lebesgue_moment(xpart);
        if (mom != 0.0) out[rest] += c * mom;
    }
    return Polynomial::from_terms(reg, std::move(out));
}

Polynomial expand_quadratic_module(const QuadraticModuleTemplate& tmpl,
                                   const std::vector<la::Mat>& grams) {
    if (grams.size() != tmpl.bases.size())
        throw std::invalid_argument(
            "expand_quadratic_module: gram count mismatch");
    RegistryPtr reg;
    for (const auto& h : tmpl.multiplier_h)
        if (h.registry()) reg = h.registry();
    if (!reg)
        throw std::invalid_argument("expand_quadratic_module: empty template");

    Polynomial::TermMap acc;
    const std::size_t nreg = reg->size();
    Monomial prod(nreg), target(nreg);
    for (std::size_t k = 0; k < tmpl.bases.size(); ++k) {
        const auto& basis = tmpl.bases[k];
        const auto& g = grams[k];
        if (g.rows != basis.size() || g.cols != basis.size())
            throw std::invalid_argument(
                "expand_quadratic_module: gram dimension mismatch");
        const auto& h = tmpl.multiplier_h[k];
        for (std::size_t i = 0; i < basis.size(); ++i) {
            for (std::size_t j = i; j < basis.size(); ++j) {
                const double c =
                    (i == j ? 1.0 : 2.0) * 0.5 * (g(i, j) + g(j, i));
                if (c == 0.0) continue;
                for (std::size_t t = 0; t < nreg; ++t)
                    prod.exps[t] = basis[i].exps[t] + basis[j].exps[t];
                for (const auto& [hm, hc] : h.terms()) {
                    for (std::size_t t = 0; t < nreg; ++t)
                        target.exps[t] = prod.exps[t] + hm.exps[t];
                    acc[target] += c * hc;
                }
            }
        }
    }
    return Polynomial::from_terms(reg, std::move(acc));
}

namespace {

unsigned even_ceil(unsigned x) { return x + (x & 1u); }

QuadraticModuleTemplate make_template(const RegistryPtr& reg,
                                      const SemialgebraicSet& set,
                                      unsigned budget) {
    QuadraticModuleTemplate t;
    t.vars = set.vars();
    t.budget = budget;
    t.multiplier_h.push_back(Polynomial::constant(reg, 1.0));
    t.bases.push_back(monomial_basis(reg, t.vars, budget / 2));
    for (const auto& h : set.inequalities()) {
        const unsigned dh = h.degree();
        if (dh > budget) continue; // no admissible multiplier degree
        t.multiplier_h.push_back(h);
        t.bases.push_back(monomial_basis(reg, t.vars, (budget - dh) / 2));
    }
    return t;
}

} // namespace

std::array<Polynomial, 4> constraint_polynomials(const DualProgramLayout& l,
                                                 const Polynomial& v_scaled,
                                                 const Polynomial& w_scaled) {
    AugmentedField phi;
    phi.n = l.n;
    phi.phi = l.phi_scaled;
    std::array<Polynomial, 4> q;
    q[0] = w_scaled;
    q[1] = v_scaled.substitute_values({{0, 1.0}});
    q[2] = -lie_derivative(v_scaled, phi);
    q[3] = w_scaled - average_initial(v_scaled, l.x_scaled, 0) -
           Polynomial::constant(l.registry, 1.0);
    return q;
}

std::pair<SdpProblem, DualProgramLayout> compile_dual(const ObserverProblem& p,
                                                      unsigned d) {
    if (d % 2 != 0)
        throw std::invalid_argument(
            "compile_dual: relaxation degree must be even");
    if (d < 2) throw std::invalid_argument("compile_dual: degree must be >= 2");

    const auto& reg = p.registry();
    const AugmentedField aug = augmented_field(p);
    if (d < aug.degree_in_z(p) + 1)
        throw std::invalid_argument(
            "compile_dual: degree too small for the dynamics (need d >= "
            "deg_z(phi) + 1 = " +
            std::to_string(aug.degree_in_z(p) + 1) + ")");

    DualProgramLayout lay;
    lay.degree = d;
    lay.registry = reg;
    lay.n = p.n();
    lay.m = p.m();
    lay.problem_fingerprint = p.fingerprint();

    // affine scaling from the set geometry: original = center + scale*new
    lay.centers.assign(reg->size(), 0.0);
    lay.scales.assign(reg->size(), 1.0);
    auto set_scaling = [&](const SemialgebraicSet& s) {
        for (auto v : s.vars()) {
            const double lo = s.lower_bound(v), hi = s.upper_bound(v);
            lay.centers[v] = 0.5 * (lo + hi);
            lay.scales[v] = 0.5 * (hi - lo);
        }
    };
    set_scaling(p.X());
    set_scaling(p.E());
    set_scaling(p.L());
    lay.jacobian = 1.0;
    for (auto v : p.e_vars()) lay.jacobian *= lay.scales[v];
    for (auto v : p.l_vars()) lay.jacobian *= lay.scales[v];

    // field in scaled coordinates: phi_i'(t, u) = phi_i(t, c + s*u) / s_i
    std::map<std::size_t, Polynomial> into_orig;
    auto add_map = [&](std::size_t v) {
        into_orig.emplace(v, Polynomial::constant(reg, lay.centers[v]) +
                                 Polynomial::variable(reg, v).scaled(
                                     lay.scales[v]));
    };
    for (auto v : p.z_vars()) add_map(v);
    for (auto v : p.l_vars()) add_map(v);
    for (std::size_t i = 0; i < aug.phi.size(); ++i) {
        const std::size_t state_var = 1 + i;
        lay.phi_scaled.push_back(aug.phi[i].substitute(into_orig).scaled(
            1.0 / lay.scales[state_var]));
    }

    // scaled sets
    const SemialgebraicSet Xs = affine_rescale(p.X(), lay.centers, lay.scales);
    const SemialgebraicSet Es = affine_rescale(p.E(), lay.centers, lay.scales);
    const SemialgebraicSet ETs =
        affine_rescale(p.E_T(), lay.centers, lay.scales);
    const SemialgebraicSet Ls = affine_rescale(p.L(), lay.centers, lay.scales);
    const SemialgebraicSet Ts = SemialgebraicSet::time_interval(reg, 0);
    lay.x_scaled = Xs;

    unsigned phi_deg = 0;
    for (const auto& c : lay.phi_scaled) phi_deg = std::max(phi_deg, c.degree());
    lay.lie_budget = even_ceil(d + std::max(1u, phi_deg) - 1);

    // polynomial variable bases
    std::vector<std::size_t> tzl, el;
    tzl.push_back(0);
    for (auto v : p.z_vars()) tzl.push_back(v);
    for (auto v : p.l_vars()) tzl.push_back(v);
    for (auto v : p.e_vars()) el.push_back(v);
    for (auto v : p.l_vars()) el.push_back(v);
    lay.v_basis = monomial_basis(reg, tzl, d);
    lay.w_basis = monomial_basis(reg, el, d);

    // constraint domains and budgets
    const SemialgebraicSet EL = SemialgebraicSet::product(Es, Ls);
    const SemialgebraicSet ZTL =
        SemialgebraicSet::product(SemialgebraicSet::product(Xs, ETs), Ls);
    const SemialgebraicSet TZL = SemialgebraicSet::product(
        SemialgebraicSet::product(Ts, SemialgebraicSet::product(Xs, Es)), Ls);

    lay.constraints[0].name = "w_nonneg";
    lay.constraints[0].module = make_template(reg, EL, d);
    lay.constraints[1].name = "terminal_nonneg";
    lay.constraints[1].module = make_template(reg, ZTL, d);
    lay.constraints[2].name = "lie_nonpos";
    lay.constraints[2].module = make_template(reg, TZL, lay.lie_budget);
    lay.constraints[3].name = "w_dominates_initial";
    lay.constraints[3].module = make_template(reg, EL, d);

    // q-side linear images of the polynomial variables
    AugmentedField phis;
    phis.n = p.n();
    phis.phi = lay.phi_scaled;
    const std::size_t nv = lay.v_basis.size();
    const std::size_t nw = lay.w_basis.size();
    std::vector<Polynomial> lie_img(nv), avg_img(nv), term_img(nv);
    for (std::size_t i = 0; i < nv; ++i) {
        const Polynomial mu = Polynomial::monomial(reg, lay.v_basis[i], 1.0);
        term_img[i] = mu.substitute_values({{0, 1.0}});
        lie_img[i] = -lie_derivative(mu, phis);
        avg_img[i] = -average_initial(mu, Xs, 0);
    }

    // objective moments over the scaled E x L
    for (const auto& mono : lay.w_basis)
        lay.objective_moments.push_back(EL.lebesgue_moment(mono));

    // ------------------------------------------------------- SDP assembly
    SdpProblem sdp;
    sdp.num_free = int(lay.num_vars());
    for (auto& c : lay.constraints)
        for (const auto& b : c.module.bases) {
            c.block_ids.push_back(int(sdp.psd_blocks.size()));
            sdp.psd_blocks.push_back(int(b.size()));
        }

    const std::size_t nreg = reg->size();
    int row_offset = 0;
    for (std::size_t ci = 0; ci < 4; ++ci) {
        ConstraintLayout& con = lay.constraints[ci];
        con.row_offset = row_offset;

        // support: union of module products and q-side images
        std::map<Monomial, int, GradedLexLess> support;
        auto touch = [&](const Monomial& mono) { support.emplace(mono, 0); };
        Monomial prod(nreg), target(nreg);
        for (std::size_t k = 0; k < con.module.bases.size(); ++k) {
            const auto& basis = con.module.bases[k];
            const auto& h = con.module.multiplier_h[k];
            for (std::size_t i = 0; i < basis.size(); ++i)
                for (std::size_t j = i; j < basis.size(); ++j) {
                    for (std::size_t t = 0; t < nreg; ++t)
                        prod.exps[t] = basis[i].exps[t] + basis[j].exps[t];
                    for (const auto& [hm, hc] : h.terms()) {
                        for (std::size_t t = 0; t < nreg; ++t)
                            target.exps[t] = prod.exps[t] + hm.exps[t];
                        touch(target);
                    }
                }
        }
        auto touch_poly = [&](const Polynomial& q) {
            for (const auto& [mono, c] : q.terms()) touch(mono);
        };
        if (ci == 0 || ci == 3)
            for (const auto& mono : lay.w_basis) touch(mono);
        if (ci == 1)
            for (std::size_t i = 0; i < nv; ++i) touch_poly(term_img[i]);
        if (ci == 2)
            for (std::size_t i = 0; i < nv; ++i) touch_poly(lie_img[i]);
        if (ci == 3) {
            for (std::size_t i = 0; i < nv; ++i) touch_poly(avg_img[i]);
            touch(Monomial(nreg)); // the constant -1
        }
        int idx = 0;
        con.support.clear();
        for (auto& [mono, id] : support) {
            id = idx++;
            con.support.push_back(mono);
        }
        const int nrows = idx;

        std::vector<std::map<std::array<int, 3>, double>> mat_acc(nrows);
        std::vector<std::map<int, double>> free_acc(nrows);
        std::vector<double> rhs(nrows, 0.0);
        auto row_of = [&](const Monomial& mono) {
            const auto at = support.find(mono);
            if (at == support.end())
                throw std::logic_error("compile_dual: monomial outside support");
            return at->second;
        };

        // quadratic-module side enters with a minus: q - QM = const
        for (std::size_t k = 0; k < con.module.bases.size(); ++k) {
            const auto& basis = con.module.bases[k];
            const auto& h = con.module.multiplier_h[k];
            const int block = con.block_ids[k];
            for (std::size_t i = 0; i < basis.size(); ++i)
                for (std::size_t j = i; j < basis.size(); ++j) {
                    for (std::size_t t = 0; t < nreg; ++t)
                        prod.exps[t] = basis[i].exps[t] + basis[j].exps[t];
                    for (const auto& [hm, hc] : h.terms()) {
                        for (std::size_t t = 0; t < nreg; ++t)
                            target.exps[t] = prod.exps[t] + hm.exps[t];
                        mat_acc[row_of(target)][{block, int(i), int(j)}] -= hc;
                    }
                }
        }
        // q side
        auto add_poly = [&](const Polynomial& q, std::size_t yidx) {
            for (const auto& [mono, c] : q.terms())
                free_acc[row_of(mono)][int(yidx)] += c;
        };
        if (ci == 0 || ci == 3)
            for (std::size_t j = 0; j < nw; ++j)
                free_acc[row_of(lay.w_basis[j])][int(lay.w_index(j))] += 1.0;
        if (ci == 1)
            for (std::size_t i = 0; i < nv; ++i)
                add_poly(term_img[i], lay.v_index(i));
        if (ci == 2)
            for (std::size_t i = 0; i < nv; ++i)
                add_poly(lie_img[i], lay.v_index(i));
        if (ci == 3) {
            for (std::size_t i = 0; i < nv; ++i)
                add_poly(avg_img[i], lay.v_index(i));
            rhs[row_of(Monomial(nreg))] += 1.0; // move the -1 across
        }

        for (int r = 0; r < nrows; ++r) {
            SdpRow row;
            row.rhs = rhs[r];
            for (const auto& [key, val] : mat_acc[r]) {
                if (val == 0.0) continue;
                row.mat_terms.push_back(BlockEntry{key[0], key[1], key[2], val});
            }
            for (const auto& [j, c] : free_acc[r]) {
                if (c == 0.0) continue;
                row.free_terms.emplace_back(j, c);
            }
            sdp.rows.push_back(std::move(row));
        }
        row_offset += nrows;
    }

    // objective: minimize moments . w-coefficients
    for (std::size_t j = 0; j < nw; ++j)
        if (lay.objective_moments[j] != 0.0)
            sdp.obj_free.emplace_back(int(lay.w_index(j)),
                                      lay.objective_moments[j]);

    sdp.validate();
    return {std::move(sdp), std::move(lay)};
}

Certificate recover_certificate(const DualProgramLayout& lay,
                                const SdpSolution& sol) {
    if (sol.status == SolveStatus::infeasible ||
        sol.status == SolveStatus::unbounded ||
        sol.status == SolveStatus::numerical_failure)
        throw std::runtime_error(
            std::string("recover_certificate: solver reported ") +
            status_name(sol.status) +
            (sol.failure_detail.empty() ? "" : " (" + sol.failure_detail + ")"));
    if (sol.free_values.size() != lay.num_vars())
        throw std::invalid_argument(
            "recover_certificate: solution does not match layout");

    const auto& reg = lay.registry;
    Polynomial::TermMap vt, wt;
    for (std::size_t i = 0; i < lay.v_basis.size(); ++i)
        vt[lay.v_basis[i]] += sol.free_values[lay.v_index(i)];
    for (std::size_t j = 0; j < lay.w_basis.size(); ++j)
        wt[lay.w_basis[j]] += sol.free_values[lay.w_index(j)];
    const Polynomial v_scaled = Polynomial::from_terms(reg, std::move(vt));
    const Polynomial w_scaled = Polynomial::from_terms(reg, std::move(wt));

    Certificate cert;
    cert.degree = lay.degree;
    cert.problem_fingerprint = lay.problem_fingerprint;
    cert.solver_status = sol.status;
    cert.solver_iterations = sol.iterations;
    cert.solver_residuals = sol.residuals;

    // audit the four constraint identities against the module expansions
    const auto qs = constraint_polynomials(lay, v_scaled, w_scaled);
    for (std::size_t ci = 0; ci < 4; ++ci) {
        const auto& con = lay.constraints[ci];
        std::vector<la::Mat> grams;
        for (int b : con.block_ids)
            grams.push_back(sol.block_matrices[std::size_t(b)]);
        const Polynomial expansion = expand_quadratic_module(con.module, grams);
        const Polynomial diff = qs[ci] - expansion;
        double gap = 0.0;
        for (const auto& [mono, c] : diff.terms())
            gap = std::max(gap, std::abs(c));
        cert.reconstruction_residuals[ci] = gap;
    }

    // back to original coordinates: scaled var = (orig - center)/scale
    std::map<std::size_t, Polynomial> back;
    for (std::size_t var = 1; var < reg->size(); ++var)
        back.emplace(var, (Polynomial::variable(reg, var) -
                           Polynomial::constant(reg, lay.centers[var]))
                              .scaled(1.0 / lay.scales[var]));
    cert.v = v_scaled.substitute(back);
    cert.w = w_scaled.substitute(back);
    cert.objective = sol.primal_objective * lay.jacobian;
    return cert;
}

} // namespace obsyn
