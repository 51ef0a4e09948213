#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#define OBSYN_TESTUTIL_FIXTURES
#include "testutil.hpp"

#include "obsyn/sos.hpp"

#include <cmath>
#include <random>

using namespace obsyn;

namespace {

double max_coeff_gap(const Polynomial& a, const Polynomial& b) {
    double gap = 0.0;
    for (const auto& [m, c] : (a - b).terms()) gap = std::max(gap, std::abs(c));
    return gap;
}

double max_coeff(const Polynomial& p) {
    double m = 0.0;
    for (const auto& [mono, c] : p.terms()) m = std::max(m, std::abs(c));
    return m;
}

Polynomial random_poly(const RegistryPtr& reg,
                       const std::vector<std::size_t>& vars, std::mt19937& rng,
                       unsigned maxdeg, std::size_t nterms) {
    std::uniform_real_distribution<double> coeff(-2.0, 2.0);
    std::uniform_int_distribution<unsigned> deg(0, maxdeg);
    Polynomial::TermMap terms;
    for (std::size_t t = 0; t < nterms; ++t) {
        Monomial m(reg->size());
        unsigned budget = deg(rng);
        for (std::size_t vi = 0; vi < vars.size() && budget; ++vi) {
            std::uniform_int_distribution<unsigned> pick(0, budget);
            const unsigned e = pick(rng);
            m.exps[vars[vi]] = e;
            budget -= e;
        }
        terms[m] += coeff(rng);
    }
    return Polynomial::from_terms(reg, std::move(terms));
}

} // namespace

TEST_CASE("lie derivative") {
    auto p = testutil::fixture_2d_linear();
    auto phi = augmented_field(p);
    const auto& reg = p.registry();

    // d/dt t = 1 regardless of the field
    CHECK(lie_derivative(Polynomial::parse("t", reg), phi) ==
          Polynomial::constant(reg, 1.0));

    // rotational field conserves the squared norm (components bind to the
    // first two augmented states x1, x2)
    {
        AugmentedField rot;
        rot.n = 1;
        rot.phi = {Polynomial::parse("x2", reg),
                   Polynomial::parse("-x1", reg)};
        CHECK(lie_derivative(Polynomial::parse("x1^2 + x2^2", reg), rot)
                  .is_zero());
    }

    // hand expansion on the 2D linear fixture: v = e1^2
    {
        auto lv = lie_derivative(Polynomial::parse("e1^2", reg), phi);
        CHECK(lv == Polynomial::parse("2*e1*(-(1 + l1)*e1 - 3*e2)", reg));
    }

    // linearity on random polynomials
    std::mt19937 rng(5);
    std::vector<std::size_t> tzl = {0, 1, 2, 3, 4, 5, 6};
    for (int trial = 0; trial < 30; ++trial) {
        auto u = random_poly(reg, tzl, rng, 4, 6);
        auto v = random_poly(reg, tzl, rng, 4, 6);
        const double a = 1.37, b = -0.21;
        auto lhs = lie_derivative(u.scaled(a) + v.scaled(b), phi);
        auto rhs = lie_derivative(u, phi).scaled(a) +
                   lie_derivative(v, phi).scaled(b);
        CHECK(max_coeff_gap(lhs, rhs) <=
              1e-12 * (1.0 + max_coeff(lhs) + max_coeff(rhs)));
    }
}

TEST_CASE("average initial") {
    auto reg = ObserverProblem::make_registry(2, 1);
    auto X = SemialgebraicSet::make_box(reg, {1, 2}, {-1.0, -1.0}, {1.0, 1.0});

    CHECK(average_initial(Polynomial::constant(reg, 1.0), X, 0) ==
          Polynomial::constant(reg, 4.0));
    CHECK(max_coeff_gap(average_initial(Polynomial::parse("x1^2", reg), X, 0),
                        Polynomial::constant(reg, 4.0 / 3.0)) <= 1e-15);
    CHECK(average_initial(Polynomial::parse("x1*e1", reg), X, 0).is_zero());
    // t kills terms: <lambda_X, (t*x1^2)(0)> = 0
    CHECK(average_initial(Polynomial::parse("t*x1^2", reg), X, 0).is_zero());

    // linearity + quadrature cross-check at random fixed (e, l)
    std::mt19937 rng(11);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    std::vector<std::size_t> txl = {0, 1, 2, 3, 4, 5, 6};
    for (int trial = 0; trial < 20; ++trial) {
        auto v = random_poly(reg, txl, rng, 4, 8);
        auto av = average_initial(v, X, 0);
        std::vector<double> pt(reg->size());
        for (auto& x : pt) x = u(rng);
        // quadrature of v(0, x, e, l) over x at this fixed (e, l)
        auto probe = pt;
        const double got = av.evaluate(pt);
        const double want = testutil::box_integral(
            {-1.0, -1.0}, {1.0, 1.0},
            [&](const std::vector<double>& x) {
                probe[0] = 0.0;
                probe[1] = x[0];
                probe[2] = x[1];
                return v.evaluate(probe);
            },
            12);
        CHECK(std::abs(got - want) <= 1e-8 * (1.0 + std::abs(want)));
    }

    auto gen = SemialgebraicSet::from_inequalities(
        reg, {1, 2}, {Polynomial::parse("1 - x1^4 - x2^4", reg)});
    CHECK_THROWS_AS(average_initial(Polynomial::constant(reg, 1.0), gen, 0),
                    std::invalid_argument);
}

TEST_CASE("expand quadratic module") {
    auto reg = ObserverProblem::make_registry(1, 1);
    auto E = SemialgebraicSet::make_box(reg, {2}, {-1.0}, {1.0});

    QuadraticModuleTemplate tmpl;
    tmpl.vars = {2};
    tmpl.budget = 2;
    tmpl.multiplier_h = {Polynomial::constant(reg, 1.0),
                         E.inequalities()[0]}; // 1 - e1^2
    tmpl.bases = {monomial_basis(reg, tmpl.vars, 1),
                  monomial_basis(reg, tmpl.vars, 0)};

    // all-zero blocks give the zero polynomial
    {
        std::vector<la::Mat> grams = {la::Mat(2, 2), la::Mat(1, 1)};
        CHECK(expand_quadratic_module(tmpl, grams).is_zero());
    }
    // identity Gram on basis [1, e1]: 1 + e1^2
    {
        std::vector<la::Mat> grams = {la::Mat::identity(2), la::Mat(1, 1)};
        CHECK(expand_quadratic_module(tmpl, grams) ==
              Polynomial::parse("1 + e1^2", reg));
    }
    // s_0 = 0, s_1 = [1] against h = 1 - e1^2
    {
        std::vector<la::Mat> grams = {la::Mat(2, 2), la::Mat::identity(1)};
        CHECK(expand_quadratic_module(tmpl, grams) ==
              Polynomial::parse("1 - e1^2", reg));
    }
    // dimension mismatch
    {
        std::vector<la::Mat> grams = {la::Mat(3, 3), la::Mat(1, 1)};
        CHECK_THROWS_AS(expand_quadratic_module(tmpl, grams),
                        std::invalid_argument);
    }
}

TEST_CASE("compile_dual structure on the 1D fixture at d = 4") {
    auto p = testutil::fixture_1d();
    auto [sdp, lay] = compile_dual(p, 4);

    CHECK(lay.v_basis.size() == 70); // C(4+4, 4)
    CHECK(lay.w_basis.size() == 15); // C(2+4, 4)
    CHECK(sdp.num_free == 85);
    CHECK(lay.constraints[0].module.bases[0].size() == 6); // C(2+2, 2)
    CHECK(lay.lie_budget == 6); // deg phi = 2 -> even ceil of 4 + 1

    // number of equality rows = sum of ambient basis sizes
    std::size_t expect_rows = 0;
    expect_rows += 15;  // C1: (e,l) deg <= 4
    expect_rows += 35;  // C2: (x,e,l) deg <= 4 = C(7,4)
    expect_rows += 210; // C3: (t,x,e,l) deg <= 6 = C(10,6)
    expect_rows += 15;  // C4
    CHECK(sdp.rows.size() == expect_rows);
    for (std::size_t ci = 0; ci < 4; ++ci)
        CHECK(lay.constraints[ci].support.size() ==
              (ci == 0 || ci == 3 ? 15u : ci == 1 ? 35u : 210u));

    // every Gram block appears in at least one equality
    std::vector<bool> seen(sdp.psd_blocks.size(), false);
    for (const auto& r : sdp.rows)
        for (const auto& e : r.mat_terms) seen[std::size_t(e.block)] = true;
    for (bool b : seen) CHECK(b);

    // degree bookkeeping: multiplier degrees obey the budget rule
    for (const auto& con : lay.constraints) {
        for (std::size_t k = 0; k < con.module.bases.size(); ++k) {
            const unsigned dh = con.module.multiplier_h[k].degree();
            unsigned basis_deg = 0;
            for (const auto& m : con.module.bases[k])
                basis_deg = std::max(basis_deg, m.degree());
            CHECK(basis_deg == (con.module.budget - dh) / 2);
        }
    }

    // odd degrees are rejected; too-small degrees are rejected
    CHECK_THROWS_AS(compile_dual(p, 5), std::invalid_argument);
    CHECK_THROWS_AS(compile_dual(p, 0), std::invalid_argument);
}

TEST_CASE("degree too small for cubic dynamics") {
    auto reg = ObserverProblem::make_registry(1, 1);
    auto X = SemialgebraicSet::make_box(reg, {1}, {-1.0}, {1.0});
    auto E = SemialgebraicSet::make_box(reg, {2}, {-1.0}, {1.0});
    auto ET = SemialgebraicSet::make_box(reg, {2}, {-0.05}, {0.05});
    auto L = SemialgebraicSet::make_box(reg, {3}, {-10.0}, {10.0});
    auto p = ObserverProblem::create(1, 1, {"-x1^3"}, {"x1"}, X, E, ET, L,
                                     1.0);
    // deg_z(phi) = 3 -> need d >= 4
    CHECK_THROWS_AS(compile_dual(p, 2), std::invalid_argument);
    CHECK_NOTHROW(compile_dual(p, 4));
}

TEST_CASE("hand-built feasible point reconstructs exactly") {
    // v = 0, w = 1 is feasible: C1: w = 1 in Q(ExL) via s_0 = 1;
    // C4: w - <X, v(0)> - 1 = 0 with zero multipliers
    auto p = testutil::fixture_1d();
    auto [sdp, lay] = compile_dual(p, 2);

    SdpSolution sol;
    sol.status = SolveStatus::optimal;
    sol.free_values.assign(lay.num_vars(), 0.0);
    // w = 1: constant monomial is the first w basis element
    REQUIRE(lay.w_basis[0].is_constant());
    sol.free_values[lay.w_index(0)] = 1.0;
    for (int b : sdp.psd_blocks) sol.block_matrices.emplace_back(b, b);
    // Gram for C1's s_0: put 1 on the constant basis element
    const int c1s0 = lay.constraints[0].block_ids[0];
    REQUIRE(lay.constraints[0].module.bases[0][0].is_constant());
    sol.block_matrices[c1s0](0, 0) = 1.0;
    sol.primal_objective = 0.0;

    auto cert = recover_certificate(lay, sol);
    for (double r : cert.reconstruction_residuals) CHECK(r <= 1e-12);
    CHECK(cert.w == Polynomial::constant(p.registry(), 1.0));
    CHECK(cert.v.is_zero());

    // identity: the recovered w reproduces the planted coefficients
    CHECK(cert.w.constant_term() == 1.0);

    // corrupting one Gram entry shows up as a residual of matching size
    sol.block_matrices[c1s0](0, 0) = 1.1;
    auto bad = recover_certificate(lay, sol);
    CHECK(bad.reconstruction_residuals[0] >= 0.09);
}

TEST_CASE("feasible SDP points satisfy all four reconstruction identities") {
    // end-to-end on the zero problem at d = 2: compile, solve, recover
    auto p = testutil::fixture_zero();
    auto [sdp, lay] = compile_dual(p, 2);
    auto sol = solve(sdp);
    REQUIRE(sol.status == SolveStatus::optimal);
    auto cert = recover_certificate(lay, sol);
    for (double r : cert.reconstruction_residuals) CHECK(r <= 1e-6);
    CHECK(cert.objective >= 0.0);

    // scaled-back w must be a polynomial in (e, l) only; v in (t, z, l)
    for (const auto& [m, c] : cert.w.terms()) {
        CHECK(m.exps[0] == 0);
        CHECK(m.exps[1] == 0);
    }
}

TEST_CASE("1D fixture end-to-end at d = 4") {
    auto p = testutil::fixture_1d();
    auto [sdp, lay] = compile_dual(p, 4);
    auto sol = solve(sdp);
    REQUIRE(sol.status == SolveStatus::optimal);
    auto cert = recover_certificate(lay, sol);
    for (double r : cert.reconstruction_residuals)
        CHECK(r <= 1e-6 * (1.0 + max_coeff(cert.w) + max_coeff(cert.v)));

    // objective versus the closed-form feasible volume:
    //   lambda(X_feas) = int min(2, 0.1 e^{1+l}) dl over [-10, 10] ~ 18.009
    const double truth = 18.0086;
    CHECK(cert.objective >= truth - 1e-3);
    CHECK(cert.objective <= 40.0); // trivial upper bound w = 1 everywhere

    // Lemma: w >= 1 on the feasible set, checked on a closed-form sample:
    // e0 = 0.2, l = 4: |e(1)| = 0.2 exp(-5) ~ 1.3e-3 < 0.05 feasible
    std::vector<double> pt(p.registry()->size(), 0.0);
    pt[2] = 0.2;
    pt[3] = 4.0;
    CHECK(cert.w.evaluate(pt) >= 1.0 - 1e-6);
}

TEST_CASE("layout manifest round trip") {
    auto p = testutil::fixture_zero();
    auto [sdp, lay] = compile_dual(p, 2);
    const std::string text = layout_to_json(lay);
    auto back = layout_from_json(text);
    CHECK(back.degree == lay.degree);
    CHECK(back.lie_budget == lay.lie_budget);
    CHECK(back.v_basis.size() == lay.v_basis.size());
    CHECK(back.w_basis.size() == lay.w_basis.size());
    CHECK(back.problem_fingerprint == lay.problem_fingerprint);
    CHECK(back.jacobian == lay.jacobian);
    CHECK(layout_to_json(back) == text);

    // a recovery through the deserialized layout matches the direct one
    auto sol = solve(sdp);
    REQUIRE(sol.status == SolveStatus::optimal);
    auto a = recover_certificate(lay, sol);
    auto b = recover_certificate(back, sol);
    CHECK(a.w.to_string() == b.w.to_string()); // registries differ by identity
    CHECK(a.objective == b.objective);
}
