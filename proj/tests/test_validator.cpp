#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <fstream>
#include <algorithm>
#include <doctest.h>

#define OBSYN_TESTUTIL_FIXTURES
#include "testutil.hpp"

#include "obsyn/sos.hpp"
#include "obsyn/validator.hpp"

#include <cmath>

using namespace obsyn;

TEST_CASE("integrate basics") {
    // zero field: z(1) = z0
    {
        auto reg = ObserverProblem::make_registry(1, 1);
        AugmentedField phi;
        phi.n = 1;
        phi.phi = {Polynomial::zero(reg), Polynomial::zero(reg)};
        auto z = integrate(phi, std::vector<double>{0.3, -0.7},
                           std::vector<double>{0.0}, 10);
        CHECK(z[0] == 0.3);
        CHECK(z[1] == -0.7);
    }
    // 1D exponential growth: x' = x, x(0) = 1 -> e
    {
        auto reg = ObserverProblem::make_registry(1, 1);
        AugmentedField phi;
        phi.n = 1;
        phi.phi = {Polynomial::parse("x1", reg), Polynomial::zero(reg)};
        auto z = integrate(phi, std::vector<double>{1.0, 0.0},
                           std::vector<double>{0.0}, 1000);
        CHECK(std::abs(z[0] - std::exp(1.0)) <= 1e-9);
    }
    // planar rotation conserves the norm
    {
        auto reg = ObserverProblem::make_registry(1, 1);
        AugmentedField phi;
        phi.n = 1;
        phi.phi = {Polynomial::parse("e1", reg),
                   Polynomial::parse("-x1", reg)};
        auto z = integrate(phi, std::vector<double>{0.6, 0.8},
                           std::vector<double>{0.0}, 500);
        CHECK(std::abs(std::hypot(z[0], z[1]) - 1.0) <= 1e-8);
    }
    // errors
    {
        auto reg = ObserverProblem::make_registry(1, 1);
        AugmentedField phi;
        phi.n = 1;
        phi.phi = {Polynomial::zero(reg), Polynomial::zero(reg)};
        CHECK_THROWS_AS(integrate(phi, std::vector<double>{0.0, 0.0},
                                  std::vector<double>{0.0}, 0),
                        std::invalid_argument);
        const double nan = std::nan("");
        CHECK_THROWS_AS(integrate(phi, std::vector<double>{nan, 0.0},
                                  std::vector<double>{0.0}, 5),
                        std::invalid_argument);
    }
}

TEST_CASE("RK4 order on the exponential fixture") {
    auto reg = ObserverProblem::make_registry(1, 1);
    AugmentedField phi;
    phi.n = 1;
    phi.phi = {Polynomial::parse("x1", reg), Polynomial::zero(reg)};
    auto terminal = [&](int steps) {
        return integrate(phi, std::vector<double>{1.0, 0.0},
                         std::vector<double>{0.0}, steps)[0];
    };
    const double exact = std::exp(1.0);
    const double e8 = std::abs(terminal(8) - exact);
    const double e16 = std::abs(terminal(16) - exact);
    const double ratio = e8 / e16;
    CHECK(ratio >= 14.0);
    CHECK(ratio <= 18.0);
}

TEST_CASE("admissible on the 1D analytic fixture") {
    auto p = testutil::fixture_1d();
    // closed form: e(1) = e0 * exp(-(1 + l))
    std::vector<std::vector<double>> x0s = {{0.5}};
    // l = 5, e0 = 0.5: |e(1)| = 0.5 e^{-6} ~ 1.2e-3 < 0.05
    CHECK(admissible(p, std::vector<double>{5.0}, std::vector<double>{0.5},
                     x0s, 1000));
    // l = -1: e(1) = e0, 0.5 > 0.05
    CHECK(!admissible(p, std::vector<double>{-1.0}, std::vector<double>{0.5},
                      x0s, 1000));
    // e0 = 0 is the error equilibrium for every gain
    for (double l : {-10.0, -1.0, 0.0, 3.0, 10.0})
        CHECK(admissible(p, std::vector<double>{l}, std::vector<double>{0.0},
                         x0s, 200));
}

TEST_CASE("quantifier: adding x0 samples only removes admissibility") {
    auto p = testutil::fixture_2d_nonlinear();
    std::vector<std::vector<double>> one = {{0.3, 0.2}};
    std::vector<std::vector<double>> more = {{0.3, 0.2}, {-0.5, 0.4},
                                             {0.9, 0.0}, {0.0, -0.8}};
    const std::vector<double> e0 = {0.2, 0.2};
    for (double l1 : {0.0, 2.0, 5.0, 8.0}) {
        const std::vector<double> gains = {l1, 1.0};
        const bool with_more = admissible(p, gains, e0, more, 400);
        const bool with_one = admissible(p, gains, e0, one, 400);
        if (with_more) CHECK(with_one);
    }
}

TEST_CASE("blow-up guard") {
    // xdot = 1 + x^2 from x0 = 1 escapes before t = 1 (tan singularity);
    // the 10x inflated box guard must catch it and report not admissible
    auto reg = ObserverProblem::make_registry(1, 1);
    auto X = SemialgebraicSet::make_box(reg, {1}, {-2.0}, {2.0});
    auto E = SemialgebraicSet::make_box(reg, {2}, {-1.0}, {1.0});
    auto ET = SemialgebraicSet::make_box(reg, {2}, {-0.05}, {0.05});
    auto L = SemialgebraicSet::make_box(reg, {3}, {-10.0}, {10.0});
    auto p = ObserverProblem::create(1, 1, {"1 + x1^2"}, {"x1"}, X, E, ET, L,
                                     1.0);
    std::vector<std::vector<double>> x0s = {{1.0}};
    int blowups = 0;
    CHECK(!admissible(p, std::vector<double>{0.0}, std::vector<double>{0.0},
                      x0s, 1000, &blowups));
    CHECK(blowups == 1);
}

TEST_CASE("sampling schemes") {
    auto p = testutil::fixture_2d_linear();
    // polar samples on the 2-D gain ball: count formula 1 + nr*na
    auto sp = polar_samples(p.L(), 41);
    CHECK(sp.coords.size() == 41); // nr = 4, na = 10
    CHECK(sp.scheme == "polar");
    double wsum = 0.0;
    for (double w : sp.weights) wsum += w;
    CHECK(std::abs(wsum - M_PI * 100.0) <= 1e-9 * M_PI * 100.0);
    for (const auto& c : sp.coords)
        CHECK(std::hypot(c[0], c[1]) <= 10.0 + 1e-12);

    // cartesian samples on a box: weights are the cell volume
    auto p1 = testutil::fixture_1d();
    auto se = cartesian_samples(p1.E(), 41);
    CHECK(se.coords.size() == 41);
    CHECK(se.weights[0] == doctest::Approx(2.0 / 40.0));

    // x0 lattice squashes the cube onto the ball
    auto x0 = x0_lattice(p.X(), 5);
    CHECK(x0.coords.size() == 25);
    for (const auto& c : x0.coords)
        CHECK(std::hypot(c[0], c[1]) <= 1.0 + 1e-12);
}

TEST_CASE("ground truth on the 1D fixture") {
    auto p = testutil::fixture_1d();
    ValidatorSettings vs;
    vs.e_count = 41;
    vs.l_count = 41;
    vs.x0_per_dim = 25;
    vs.steps = 400;
    auto rep = ground_truth(p, vs);

    CHECK(rep.x_independent_error); // linear system: g has no x terms
    CHECK(rep.x0_used == 1);
    CHECK(rep.e0.coords.size() == 41);
    CHECK(rep.gains.coords.size() == 41);

    // analytic: feasible-e0 measure is min(2, 0.1 e^{1+l}); the sampled
    // optimal-gain band is l >= ln(20) - 1 ~ 1.9957 within one cell
    const double lcell = 20.0 / 40.0;
    for (std::size_t li = 0; li < rep.gains.coords.size(); ++li) {
        const double l = rep.gains.coords[li][0];
        const double truth = std::min(2.0, 0.1 * std::exp(1.0 + l));
        CHECK(std::abs(rep.measure_estimates[li] - truth) <=
              0.15 + 1e-12); // a cell layer of the e-grid
        const bool in_best =
            std::find(rep.best_gains.begin(), rep.best_gains.end(), li) !=
            rep.best_gains.end();
        if (l >= std::log(20.0) - 1.0 + lcell) CHECK(in_best);
        if (l <= std::log(20.0) - 1.0 - lcell) CHECK(!in_best);
    }

    // determinism: identical settings (and seed) give identical reports
    auto rep2 = ground_truth(p, vs);
    CHECK(rep2.admissible == rep.admissible);
    CHECK(rep2.measure_estimates == rep.measure_estimates);

    // measure convergence: doubling the e-grid moves each estimate by at
    // most one cell layer
    ValidatorSettings vs2 = vs;
    vs2.e_count = 81;
    auto rep3 = ground_truth(p, vs2);
    for (std::size_t li = 0; li < rep.gains.coords.size(); ++li)
        CHECK(std::abs(rep3.measure_estimates[li] -
                       rep.measure_estimates[li]) <= 2.0 / 40.0 + 1e-12);
}

TEST_CASE("containment check against a solved certificate") {
    auto p = testutil::fixture_1d();
    auto [sdp, lay] = compile_dual(p, 4);
    auto sol = solve(sdp);
    REQUIRE(sol.status == SolveStatus::optimal);
    auto cert = recover_certificate(lay, sol);

    ValidatorSettings vs;
    vs.e_count = 41;
    vs.l_count = 41;
    vs.steps = 400;
    auto rep = ground_truth(p, vs);

    // outer approximation: no admissible sample may fall below w = 1 - 1e-6
    auto violations = containment_check(cert, p, rep);
    CHECK(violations.empty());

    // a corrupted certificate (w scaled down) fails containment
    Certificate badc = cert;
    badc.w = cert.w.scaled(0.1);
    auto bad = containment_check(badc, p, rep);
    CHECK(!bad.empty());

    // fingerprint mismatch is rejected
    Certificate other = cert;
    other.problem_fingerprint ^= 1;
    CHECK_THROWS_AS(containment_check(other, p, rep), std::invalid_argument);

    // vacuous containment: a report with zero admissible samples passes
    ValidationReport empty = rep;
    std::fill(empty.admissible.begin(), empty.admissible.end(), 0);
    CHECK(containment_check(badc, p, empty).empty());
}

TEST_CASE("nonlinear fixture end-to-end with the full state quantifier") {
    auto p = testutil::fixture_2d_nonlinear();
    auto [sdp, lay] = compile_dual(p, 4);
    auto sol = solve(sdp);
    REQUIRE((sol.status == SolveStatus::optimal ||
             sol.residuals.primal_eq < 1e-7));
    auto cert = recover_certificate(lay, sol);

    ValidatorSettings vs;
    vs.e_count = 21;
    vs.l_count = 21;
    vs.x0_per_dim = 5; // 25 initial states, all exercised (g depends on x)
    vs.steps = 300;
    auto rep = ground_truth(p, vs);
    CHECK(!rep.x_independent_error);
    CHECK(rep.x0_used == 25);

    auto viol = containment_check(cert, p, rep);
    CHECK(viol.empty());
}

TEST_CASE("report export") {
    auto p = testutil::fixture_1d();
    ValidatorSettings vs;
    vs.e_count = 5;
    vs.l_count = 5;
    vs.steps = 50;
    auto rep = ground_truth(p, vs);
    export_report_csv("/tmp/obsyn_test_report.csv", rep);
    std::ifstream in("/tmp/obsyn_test_report.csv");
    std::string header;
    std::getline(in, header);
    CHECK(header == "e1,l1,admissible");
    std::size_t rows = 0;
    std::string line;
    while (std::getline(in, line))
        if (!line.empty()) ++rows;
    CHECK(rows == rep.e0.coords.size() * rep.gains.coords.size());

    const std::string summary = report_summary_json(rep);
    CHECK(summary.find("obsyn-validation-summary") != std::string::npos);
    CHECK(summary.find("x_independent_error") != std::string::npos);
}
