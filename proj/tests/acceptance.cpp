// Acceptance suite: one criterion per section, one PASS/FAIL line each.
// Usage: acceptance [--fast] [--only N]
//   --fast    criteria 1-7 (default runs all eight)
//   --only N  a single criterion (the slow degree-6 run is criterion 8)

#define OBSYN_TESTUTIL_FIXTURES
#define OBSYN_TESTUTIL_SDP
#include "testutil.hpp"

#include "obsyn/gain.hpp"
#include "obsyn/sos.hpp"
#include "obsyn/validator.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <random>
#include <string>
#include <vector>

using namespace obsyn;

namespace {

struct Outcome {
    bool pass = true;
    std::string detail;
    void fail(const std::string& why) {
        pass = false;
        detail += (detail.empty() ? "" : "; ") + why;
    }
    void note(const std::string& what) {
        detail += (detail.empty() ? "" : "; ") + what;
    }
};

double now_s() {
    using namespace std::chrono;
    return duration<double>(steady_clock::now().time_since_epoch()).count();
}

struct SolvedFixture {
    DualProgramLayout layout;
    SdpSolution solution;
    Certificate cert;
};

SolvedFixture solve_fixture(const ObserverProblem& p, unsigned d) {
    auto [sdp, lay] = compile_dual(p, d);
    SolvedFixture out{std::move(lay), solve(sdp), {}};
    out.cert = recover_certificate(out.layout, out.solution);
    return out;
}

double max_abs_coeff(const Polynomial& q) {
    double m = 0.0;
    for (const auto& [mono, c] : q.terms()) m = std::max(m, std::abs(c));
    return m;
}

// ---------------------------------------------------------- criterion 1
Outcome criterion1() {
    Outcome o;
    auto p = testutil::fixture_1d();
    auto fx = solve_fixture(p, 4);
    if (fx.solution.status != SolveStatus::optimal)
        o.fail("solve status " +
               std::string(status_name(fx.solution.status)));
    auto egrid = GridSpec::cartesian(p.E(), 201);
    auto lgrid = GridSpec::cartesian(p.L(), 201);
    auto rank = select_gains(fx.cert, lgrid, egrid, 1000);

    std::vector<bool> in_band(lgrid.size(), false);
    for (auto f : rank.argmax) in_band[f] = true;
    bool contains = true, excludes = true;
    double onset = 10.0;
    for (std::size_t f = 0; f < lgrid.size(); ++f) {
        const double l = lgrid.coords(f)[0];
        if (l >= 2.1 && !in_band[f]) contains = false;
        if (l <= 1.8 && in_band[f]) {
            excludes = false;
            onset = std::min(onset, l);
        }
    }
    if (!contains) o.fail("argmax band does not contain [2.1, 10]");
    else o.note("band contains [2.1, 10]");
    if (!excludes)
        o.fail("argmax band reaches down to l = " + format_double(onset) +
               ", it does not exclude [-10, 1.8] at d = 4 (the degree-4 "
               "optimum saturates w >= 1 there; the band edge reaches the "
               "analytic threshold only around d = 10)");
    else
        o.note("band excludes [-10, 1.8]");
    return o;
}

// ---------------------------------------------------------- criterion 2
Outcome criterion2() {
    Outcome o;
    // 1D fixture at d = 4
    {
        auto p = testutil::fixture_1d();
        auto fx = solve_fixture(p, 4);
        ValidatorSettings vs;
        vs.e_count = 41;
        vs.l_count = 41;
        vs.x0_per_dim = 25;
        vs.steps = 1000;
        auto rep = ground_truth(p, vs);
        auto viol = containment_check(fx.cert, p, rep);
        if (!viol.empty())
            o.fail("1D fixture: " + std::to_string(viol.size()) +
                   " containment violations");
        else
            o.note("1D fixture: 0 violations");
    }
    // 2D linear fixture at d = 4
    {
        auto p = testutil::fixture_2d_linear();
        auto fx = solve_fixture(p, 4);
        if (fx.solution.status != SolveStatus::optimal)
            o.fail("2D solve status " +
                   std::string(status_name(fx.solution.status)));
        ValidatorSettings vs;
        vs.e_count = 41; // polar on the error ball
        vs.l_count = 41; // polar on the gain ball
        vs.x0_per_dim = 25;
        vs.steps = 1000;
        auto rep = ground_truth(p, vs);
        auto viol = containment_check(fx.cert, p, rep);
        if (!viol.empty())
            o.fail("2D fixture: " + std::to_string(viol.size()) +
                   " containment violations");
        else
            o.note("2D fixture: 0 violations");
    }
    return o;
}

// ---------------------------------------------------------- criterion 3
Outcome criterion3() {
    Outcome o;
    auto p = testutil::fixture_1d();
    std::vector<double> objs;
    for (unsigned d : {2u, 4u, 6u}) {
        auto fx = solve_fixture(p, d);
        if (fx.solution.status != SolveStatus::optimal)
            o.fail("d=" + std::to_string(d) + " status " +
                   status_name(fx.solution.status));
        objs.push_back(fx.cert.objective);
    }
    char buf[160];
    std::snprintf(buf, sizeof buf, "objectives %.4f >= %.4f >= %.4f", objs[0],
                  objs[1], objs[2]);
    o.note(buf);
    if (!(objs[0] >= objs[1] - 1e-6 && objs[1] >= objs[2] - 1e-6))
        o.fail("hierarchy is not monotone within 1e-6");

    // Monte-Carlo estimate of the feasible-volume from the validator
    ValidatorSettings vs;
    vs.e_count = 41;
    vs.l_count = 41;
    vs.steps = 1000;
    auto rep = ground_truth(p, vs);
    double mc = 0.0;
    const double dl = 20.0 / 40.0;
    for (double m : rep.measure_estimates) mc += m * dl;
    const double slack = 0.05 * 2.0 * 20.0 + 0.5 * 2.0 * 2.0; // cell layer
    o.note("MC volume " + format_double(mc));
    for (double obj : objs)
        if (obj < mc - slack)
            o.fail("objective " + format_double(obj) +
                   " below the MC volume minus slack");
    return o;
}

// ---------------------------------------------------------- criterion 4
Outcome criterion4() {
    Outcome o;
    auto p = testutil::fixture_1d();
    auto fx = solve_fixture(p, 4);
    auto egrid = GridSpec::cartesian(p.E(), 201);
    ValidatorSettings vs;
    vs.e_count = 41;
    vs.l_count = 41;
    vs.steps = 1000;
    auto rep = ground_truth(p, vs);
    const double slack = egrid.layer_slack() + 2.0 * (2.0 / 40.0);
    int viol = 0;
    for (std::size_t li = 0; li < rep.gains.coords.size(); ++li) {
        const double b = beta(fx.cert, rep.gains.coords[li], egrid, 1000);
        if (b + slack < rep.measure_estimates[li]) ++viol;
    }
    if (viol > 0)
        o.fail(std::to_string(viol) + " gains violate the bound direction");
    else
        o.note("0 violations over " +
               std::to_string(rep.gains.coords.size()) + " gains");
    return o;
}

// ---------------------------------------------------------- criterion 5
Outcome criterion5() {
    Outcome o;
    int solved = 0;
    for (std::uint64_t seed = 1; seed <= 100; ++seed) {
        auto rs = testutil::random_feasible_sdp(seed);
        auto s = solve(rs.problem);
        if (s.status != SolveStatus::optimal) {
            o.fail("seed " + std::to_string(seed) + " status " +
                   status_name(s.status));
            continue;
        }
        if (std::abs(s.primal_objective - rs.optimum) >
            1e-6 * (1.0 + std::abs(rs.optimum)))
            o.fail("seed " + std::to_string(seed) + " objective error " +
                   format_double(s.primal_objective - rs.optimum));
        if (s.residuals.primal_eq > 1e-7 || s.residuals.dual > 1e-7)
            o.fail("seed " + std::to_string(seed) + " KKT residuals " +
                   format_double(s.residuals.primal_eq) + "/" +
                   format_double(s.residuals.dual));
        ++solved;
    }
    // bit-identical re-runs
    for (std::uint64_t seed : {3ULL, 42ULL, 77ULL}) {
        auto rs = testutil::random_feasible_sdp(seed);
        auto a = solve(rs.problem);
        auto b = solve(rs.problem);
        bool same = a.free_values == b.free_values &&
                    a.equality_duals == b.equality_duals &&
                    a.log == b.log && a.iterations == b.iterations;
        for (std::size_t k = 0; same && k < a.block_matrices.size(); ++k)
            same = a.block_matrices[k].a == b.block_matrices[k].a;
        if (!same) o.fail("seed " + std::to_string(seed) + " not bit-identical");
    }
    o.note(std::to_string(solved) + "/100 solved to tolerance");
    return o;
}

// ---------------------------------------------------------- criterion 6
Outcome criterion6() {
    Outcome o;
    struct Case {
        const char* name;
        ObserverProblem problem;
        unsigned degree;
    };
    std::vector<Case> cases;
    cases.push_back({"zero d=2", testutil::fixture_zero(), 2});
    cases.push_back({"1d d=2", testutil::fixture_1d(), 2});
    cases.push_back({"1d d=4", testutil::fixture_1d(), 4});
    cases.push_back({"1d d=6", testutil::fixture_1d(), 6});
    cases.push_back({"2d d=4", testutil::fixture_2d_linear(), 4});
    for (auto& c : cases) {
        auto [sdp, lay] = compile_dual(c.problem, c.degree);
        auto sol = solve(sdp);
        auto cert = recover_certificate(lay, sol);
        // rebuild the scaled pair to measure the coefficient scale of the
        // constraint polynomials themselves
        Polynomial::TermMap vt, wt;
        for (std::size_t i = 0; i < lay.v_basis.size(); ++i)
            vt[lay.v_basis[i]] += sol.free_values[lay.v_index(i)];
        for (std::size_t j = 0; j < lay.w_basis.size(); ++j)
            wt[lay.w_basis[j]] += sol.free_values[lay.w_index(j)];
        const auto qs = constraint_polynomials(
            lay, Polynomial::from_terms(lay.registry, std::move(vt)),
            Polynomial::from_terms(lay.registry, std::move(wt)));
        for (std::size_t ci = 0; ci < 4; ++ci) {
            const double tolerance = 1e-6 * (1.0 + max_abs_coeff(qs[ci]));
            if (cert.reconstruction_residuals[ci] > tolerance)
                o.fail(std::string(c.name) + " constraint " +
                       std::to_string(ci + 1) + " residual " +
                       format_double(cert.reconstruction_residuals[ci]) +
                       " > " + format_double(tolerance));
        }
    }
    if (o.pass) o.note("all four identities reconstruct on every fixture");
    return o;
}

// ---------------------------------------------------------- criterion 7
Outcome criterion7() {
    Outcome o;
    // RK4 order ratio on the exponential fixture
    {
        auto reg = ObserverProblem::make_registry(1, 1);
        AugmentedField phi;
        phi.n = 1;
        phi.phi = {Polynomial::parse("x1", reg), Polynomial::zero(reg)};
        auto terminal = [&](int steps) {
            return integrate(phi, std::vector<double>{1.0, 0.0},
                             std::vector<double>{0.0}, steps)[0];
        };
        const double exact = std::exp(1.0);
        const double ratio = std::abs(terminal(8) - exact) /
                             std::abs(terminal(16) - exact);
        if (ratio < 14.0 || ratio > 18.0)
            o.fail("RK4 order ratio " + format_double(ratio));
        else
            o.note("RK4 ratio " + format_double(ratio));
    }
    // polynomial derivative vs central differences
    {
        auto reg = VariableRegistry::create({"a", "b", "c"});
        std::mt19937 rng(2024);
        std::uniform_real_distribution<double> u(-1.0, 1.0);
        std::uniform_real_distribution<double> coeff(-2.0, 2.0);
        int bad = 0;
        for (int trial = 0; trial < 200; ++trial) {
            Polynomial::TermMap terms;
            for (int t = 0; t < 6; ++t) {
                Monomial m(3);
                unsigned budget = unsigned(rng() % 6);
                for (std::size_t v = 0; v < 3 && budget; ++v) {
                    const unsigned e = unsigned(rng() % (budget + 1));
                    m.exps[v] = e;
                    budget -= e;
                }
                terms[m] += coeff(rng);
            }
            const auto poly = Polynomial::from_terms(reg, std::move(terms));
            std::vector<double> pt = {u(rng), u(rng), u(rng)};
            for (std::size_t v = 0; v < 3; ++v) {
                auto hi = pt, lo = pt;
                hi[v] += 1e-5;
                lo[v] -= 1e-5;
                const double fd =
                    (poly.evaluate(hi) - poly.evaluate(lo)) / 2e-5;
                const double ex = poly.differentiate(v).evaluate(pt);
                if (std::abs(fd - ex) > 1e-6 * (1.0 + std::abs(ex))) ++bad;
            }
        }
        if (bad) o.fail(std::to_string(bad) + " derivative mismatches");
    }
    // moments vs quadrature
    {
        auto reg = ObserverProblem::make_registry(2, 1);
        auto box = SemialgebraicSet::make_box(reg, {1, 2}, {-0.7, 0.2},
                                              {1.1, 1.9});
        auto ball = SemialgebraicSet::make_ball(reg, {3, 4}, {0.0, 0.0}, 0.9);
        int bad = 0;
        for (unsigned a = 0; a <= 6; a += 2)
            for (unsigned b = 0; b + a <= 10; b += 3) {
                const std::vector<std::uint32_t> alpha = {a, b};
                const std::vector<unsigned> alu = {a, b};
                const double got_box = box.lebesgue_moment(alpha);
                const double want_box = testutil::box_moment_quad(
                    {-0.7, 0.2}, {1.1, 1.9}, alu);
                if (std::abs(got_box - want_box) >
                    1e-9 * (1.0 + std::abs(want_box)))
                    ++bad;
                const double got_ball = ball.lebesgue_moment(alpha);
                const double want_ball = testutil::ball_moment_quad(alu, 0.9);
                if (std::abs(got_ball - want_ball) >
                    1e-9 * (1.0 + std::abs(want_ball)))
                    ++bad;
            }
        if (bad) o.fail(std::to_string(bad) + " moment mismatches");
    }
    if (o.pass && o.detail.empty()) o.note("all numeric properties hold");
    return o;
}

// ---------------------------------------------------------- criterion 8
Outcome criterion8() {
    Outcome o;
    auto p = testutil::fixture_2d_linear();
    auto fx = solve_fixture(p, 6);
    // any feasible recovered pair certifies the outer approximation; the
    // audit below (reconstruction residuals) is what the criterion needs
    o.note("solver " + std::string(status_name(fx.solution.status)) +
           ", pinf " + format_double(fx.solution.residuals.primal_eq) +
           ", gap " + format_double(fx.solution.residuals.gap));
    double recon = 0.0;
    for (double r : fx.cert.reconstruction_residuals)
        recon = std::max(recon, r);
    if (recon > 1e-5)
        o.fail("certificate reconstruction residual " + format_double(recon));
    o.note("degree-6 objective " + format_double(fx.cert.objective));

    ValidatorSettings vs;
    vs.e_count = 41;
    vs.l_count = 41;
    vs.x0_per_dim = 25;
    vs.steps = 1000;
    auto rep = ground_truth(p, vs);
    auto viol = containment_check(fx.cert, p, rep);
    if (!viol.empty())
        o.fail(std::to_string(viol.size()) + " containment violations");
    else
        o.note("containment: 0 violations");

    // exported gain region must contain every fully admissible gain:
    // a sampled gain with all feasible errors must attain the maximal
    // beta within the selector's tie tolerance
    auto egrid = GridSpec::cartesian(p.E(), 201);
    auto lgrid = GridSpec::cartesian(p.L(), 101);
    auto rank = select_gains(fx.cert, lgrid, egrid, 1000);
    {
        const auto dir = std::string("acceptance_out");
        export_gain_csv(dir + "_gain_region.csv", rank);
        export_levelset_csv(dir + "_levelset_e.csv", fx.cert, egrid,
                            rank.selected);
    }
    const double tie = 1e-9 * (1.0 + rank.max_beta);
    int missing = 0, admissible_gains = 0;
    for (std::size_t li = 0; li < rep.gains.coords.size(); ++li) {
        if (rep.feasible_counts[li] != int(rep.e0.coords.size())) continue;
        ++admissible_gains;
        const double b = beta(fx.cert, rep.gains.coords[li], egrid, 1000);
        if (b < rank.max_beta - tie) ++missing;
    }
    o.note(std::to_string(admissible_gains) + " fully admissible gains");
    if (missing > 0)
        o.fail(std::to_string(missing) +
               " admissible gains fall outside the exported gain region");
    return o;
}

} // namespace

int main(int argc, char** argv) {
    bool fast = false;
    int only = 0;
    for (int i = 1; i < argc; ++i) {
        if (std::strcmp(argv[i], "--fast") == 0) fast = true;
        if (std::strcmp(argv[i], "--only") == 0 && i + 1 < argc)
            only = std::atoi(argv[++i]);
    }
    using Fn = Outcome (*)();
    const Fn criteria[8] = {criterion1, criterion2, criterion3, criterion4,
                            criterion5, criterion6, criterion7, criterion8};
    const char* names[8] = {
        "1D fixture argmax band (d=4, k=1000, grids 201/201)",
        "outer-approximation containment (1D and 2D linear, d=4)",
        "hierarchy monotonicity and volume lower bound (1D, d=2/4/6)",
        "beta bound direction vs sampled measure (1D)",
        "random SDP suite: 100 known optima, deterministic re-runs",
        "certificate reconstruction identities on all solved fixtures",
        "numerics: RK4 order, derivatives, moments",
        "degree-6 2D linear gain region covers admissible gains (slow)",
    };

    bool all_pass = true;
    for (int c = 1; c <= 8; ++c) {
        if (only != 0 && c != only) continue;
        if (only == 0 && fast && c == 8) continue;
        const double t0 = now_s();
        Outcome o = criteria[c - 1]();
        const double dt = now_s() - t0;
        std::printf("criterion %d: %s (%.1f s) - %s [%s]\n", c,
                    o.pass ? "PASS" : "FAIL", dt, names[c - 1],
                    o.detail.c_str());
        std::fflush(stdout);
        if (!o.pass) all_pass = false;
    }
    return all_pass ? 0 : 1;
}
