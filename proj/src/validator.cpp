#include "obsyn/validator.hpp"

#include "obsyn/kernels.hpp"
#include "obsyn/poly.hpp"
#include "obsyn/util.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>

namespace obsyn {

namespace {

struct FlatPoly {
    std::vector<double> coefs;
    std::vector<std::uint8_t> exps; // nterms x nreg
    std::size_t nterms = 0;
};

FlatPoly flatten_full(const Polynomial& p) {
    FlatPoly f;
    for (const auto& [m, c] : p.terms()) {
        f.coefs.push_back(c);
        for (auto e : m.exps) f.exps.push_back(std::uint8_t(e));
        ++f.nterms;
    }
    return f;
}

double eval_flat(const FlatPoly& f, std::span<const double> point) {
    double s = 0.0;
    const std::size_t nreg = point.size();
    for (std::size_t t = 0; t < f.nterms; ++t) {
        double v = f.coefs[t];
        for (std::size_t j = 0; j < nreg; ++j) {
            unsigned e = f.exps[t * nreg + j];
            if (!e) continue;
            double base = point[j], acc = 1.0;
            while (e) {
                if (e & 1) acc *= base;
                base *= base;
                e >>= 1;
            }
            v *= acc;
        }
        s += v;
    }
    return s;
}

} // namespace

std::vector<double> integrate(const AugmentedField& phi,
                              std::span<const double> z0,
                              std::span<const double> gains, int steps) {
    if (steps < 1) throw std::invalid_argument("integrate: steps >= 1");
    const std::size_t dim = phi.phi.size();
    if (z0.size() != dim)
        throw std::invalid_argument("integrate: state dimension mismatch");
    for (double v : z0)
        if (!std::isfinite(v))
            throw std::invalid_argument("integrate: non-finite initial state");

    const auto& reg = phi.phi.front().registry();
    std::vector<FlatPoly> f;
    for (const auto& c : phi.phi) f.push_back(flatten_full(c));

    std::vector<double> pt(reg->size(), 0.0);
    for (std::size_t i = 0; i < gains.size(); ++i)
        pt[1 + dim + i] = gains[i];

    auto field = [&](double t, const std::vector<double>& z,
                     std::vector<double>& out) {
        pt[0] = t;
        for (std::size_t i = 0; i < dim; ++i) pt[1 + i] = z[i];
        for (std::size_t i = 0; i < dim; ++i) out[i] = eval_flat(f[i], pt);
    };

    const double h = 1.0 / double(steps);
    std::vector<double> z(z0.begin(), z0.end());
    std::vector<double> k1(dim), k2(dim), k3(dim), k4(dim), tmp(dim);
    for (int s = 0; s < steps; ++s) {
        const double t = h * double(s);
        field(t, z, k1);
        for (std::size_t i = 0; i < dim; ++i) tmp[i] = z[i] + 0.5 * h * k1[i];
        field(t + 0.5 * h, tmp, k2);
        for (std::size_t i = 0; i < dim; ++i) tmp[i] = z[i] + 0.5 * h * k2[i];
        field(t + 0.5 * h, tmp, k3);
        for (std::size_t i = 0; i < dim; ++i) tmp[i] = z[i] + h * k3[i];
        field(t + h, tmp, k4);
        for (std::size_t i = 0; i < dim; ++i)
            z[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        for (double v : z)
            if (!std::isfinite(v))
                throw std::runtime_error(
                    "integrate: non-finite state at step " +
                    std::to_string(s + 1) +
                    " (trajectory left the modeled region)");
    }
    return z;
}

namespace {

struct Guard {
    std::vector<double> lo, hi; // per augmented state, 10x inflated
};

Guard make_guard(const ObserverProblem& p) {
    Guard g;
    auto widen = [&](const SemialgebraicSet& s, std::size_t var) {
        const double lo = s.lower_bound(var), hi = s.upper_bound(var);
        const double c = 0.5 * (lo + hi), half = 0.5 * (hi - lo);
        g.lo.push_back(c - 10.0 * half);
        g.hi.push_back(c + 10.0 * half);
    };
    for (auto v : p.x_vars()) widen(p.X(), v);
    for (auto v : p.e_vars()) widen(p.E(), v);
    return g;
}

bool within(const Guard& g, std::span<const double> z) {
    for (std::size_t i = 0; i < z.size(); ++i)
        if (!std::isfinite(z[i]) || z[i] < g.lo[i] || z[i] > g.hi[i])
            return false;
    return true;
}

} // namespace

namespace {

struct SweepContext {
    std::vector<FlatPoly> f;
    Guard guard;
    std::size_t n = 0;
    std::size_t nreg = 0;
};

SweepContext make_context(const ObserverProblem& p) {
    SweepContext ctx;
    const AugmentedField phi = augmented_field(p);
    for (const auto& c : phi.phi) ctx.f.push_back(flatten_full(c));
    ctx.guard = make_guard(p);
    ctx.n = p.n();
    ctx.nreg = p.registry()->size();
    return ctx;
}

bool admissible_impl(const SweepContext& ctx, const ObserverProblem& p,
                     std::span<const double> gains, std::span<const double> e0,
                     const std::vector<std::vector<double>>& x0_samples,
                     int steps, int* blowups) {
    const std::size_t n = ctx.n;
    const auto& f = ctx.f;
    const auto& guard = ctx.guard;
    for (const auto& x0 : x0_samples) {
        std::vector<double> z(2 * n);
        for (std::size_t i = 0; i < n; ++i) z[i] = x0[i];
        for (std::size_t i = 0; i < n; ++i) z[n + i] = e0[i];

        std::vector<double> pt(ctx.nreg, 0.0);
        for (std::size_t i = 0; i < gains.size(); ++i)
            pt[1 + 2 * n + i] = gains[i];
        auto field = [&](double t, const std::vector<double>& zz,
                         std::vector<double>& out) {
            pt[0] = t;
            for (std::size_t i = 0; i < 2 * n; ++i) pt[1 + i] = zz[i];
            for (std::size_t i = 0; i < 2 * n; ++i) out[i] = eval_flat(f[i], pt);
        };

        const double h = 1.0 / double(steps);
        std::vector<double> k1(2 * n), k2(2 * n), k3(2 * n), k4(2 * n),
            tmp(2 * n);
        bool dead = false;
        for (int s = 0; s < steps && !dead; ++s) {
            const double t = h * double(s);
            field(t, z, k1);
            for (std::size_t i = 0; i < 2 * n; ++i)
                tmp[i] = z[i] + 0.5 * h * k1[i];
            field(t + 0.5 * h, tmp, k2);
            for (std::size_t i = 0; i < 2 * n; ++i)
                tmp[i] = z[i] + 0.5 * h * k2[i];
            field(t + 0.5 * h, tmp, k3);
            for (std::size_t i = 0; i < 2 * n; ++i) tmp[i] = z[i] + h * k3[i];
            field(t + h, tmp, k4);
            for (std::size_t i = 0; i < 2 * n; ++i)
                z[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
            if (!within(guard, z)) dead = true;
        }
        if (dead) {
            if (blowups) ++*blowups;
            return false;
        }
        // terminal error in E_T?
        std::vector<double> term(ctx.nreg, 0.0);
        for (std::size_t i = 0; i < n; ++i) term[p.e_var(i)] = z[n + i];
        if (!p.E_T().contains(term, 1e-9)) return false;
    }
    return true;
}

} // namespace

bool admissible(const ObserverProblem& p, std::span<const double> gains,
                std::span<const double> e0,
                const std::vector<std::vector<double>>& x0_samples, int steps,
                int* blowups) {
    if (x0_samples.empty())
        throw std::invalid_argument("admissible: x0 sample set is empty");
    const SweepContext ctx = make_context(p);
    return admissible_impl(ctx, p, gains, e0, x0_samples, steps, blowups);
}

// --------------------------------------------------------------- sampling

SamplePoints cartesian_samples(const SemialgebraicSet& set, int per_dim) {
    if (per_dim < 2)
        throw std::invalid_argument("cartesian_samples: need >= 2 per dim");
    SamplePoints sp;
    sp.vars = set.vars();
    sp.scheme = "cartesian";
    const std::size_t n = sp.vars.size();
    std::vector<double> lo(n), hi(n), delta(n);
    double cell = 1.0;
    for (std::size_t j = 0; j < n; ++j) {
        lo[j] = set.lower_bound(sp.vars[j]);
        hi[j] = set.upper_bound(sp.vars[j]);
        delta[j] = (hi[j] - lo[j]) / double(per_dim - 1);
        cell *= delta[j];
    }
    std::vector<int> idx(n, 0);
    std::vector<double> reg_pt(set.registry()->size(), 0.0);
    for (;;) {
        std::vector<double> c(n);
        for (std::size_t j = 0; j < n; ++j) {
            c[j] = lo[j] + delta[j] * double(idx[j]);
            reg_pt[sp.vars[j]] = c[j];
        }
        if (set.contains(reg_pt, 1e-9)) {
            sp.coords.push_back(c);
            sp.weights.push_back(cell);
        }
        std::size_t j = 0;
        while (j < n && ++idx[j] == per_dim) idx[j++] = 0;
        if (j == n) break;
    }
    return sp;
}

SamplePoints polar_samples(const SemialgebraicSet& ball, int total) {
    if (ball.factors().size() != 1 ||
        ball.factors()[0].kind != SetFactor::Kind::ball ||
        ball.vars().size() != 2)
        throw std::invalid_argument(
            "polar_samples: supported for 2-D ball sets");
    const auto& f = ball.factors()[0];
    SamplePoints sp;
    sp.vars = ball.vars();
    sp.scheme = "polar";
    const int nr = std::max(1, int(std::lround(std::sqrt((total - 1) / 2.0))));
    const int na = std::max(1, int(std::lround(double(total - 1) / nr)));
    const double R = f.radius;
    // center point with the innermost disk as its weight
    sp.coords.push_back({f.center[0], f.center[1]});
    sp.weights.push_back(M_PI * (0.5 * R / nr) * (0.5 * R / nr));
    for (int i = 1; i <= nr; ++i) {
        const double r = R * double(i) / double(nr);
        const double r_in = R * (double(i) - 0.5) / double(nr);
        const double r_out = std::min(R, R * (double(i) + 0.5) / double(nr));
        const double ring_area = M_PI * (r_out * r_out - r_in * r_in);
        for (int a = 0; a < na; ++a) {
            const double th = 2.0 * M_PI * double(a) / double(na);
            sp.coords.push_back({f.center[0] + r * std::cos(th),
                                 f.center[1] + r * std::sin(th)});
            sp.weights.push_back(ring_area / double(na));
        }
    }
    return sp;
}

SamplePoints x0_lattice(const SemialgebraicSet& X, int per_dim) {
    const auto& factors = X.factors();
    const bool is_ball = factors.size() == 1 &&
                         factors[0].kind == SetFactor::Kind::ball &&
                         X.vars().size() >= 2;
    if (!is_ball) {
        SamplePoints sp = cartesian_samples(X, per_dim);
        sp.scheme = "lattice";
        return sp;
    }
    // lattice on the unit cube squashed onto the ball:
    // u -> center + R * u * (|u|_inf / |u|_2)
    const auto& f = factors[0];
    const std::size_t n = X.vars().size();
    SamplePoints sp;
    sp.vars = X.vars();
    sp.scheme = "lattice-squashed";
    std::vector<int> idx(n, 0);
    for (;;) {
        std::vector<double> u(n);
        double linf = 0.0, l2 = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            u[j] = -1.0 + 2.0 * double(idx[j]) / double(per_dim - 1);
            linf = std::max(linf, std::abs(u[j]));
            l2 += u[j] * u[j];
        }
        l2 = std::sqrt(l2);
        std::vector<double> c(n);
        const double squash = l2 > 0.0 ? linf / l2 : 0.0;
        for (std::size_t j = 0; j < n; ++j)
            c[j] = f.center[j] + f.radius * u[j] * squash;
        sp.coords.push_back(c);
        sp.weights.push_back(0.0); // not used for measure estimates
        std::size_t j = 0;
        while (j < n && ++idx[j] == per_dim) idx[j++] = 0;
        if (j == n) break;
    }
    return sp;
}

// ------------------------------------------------------------ full sweep

ValidationReport ground_truth(const ObserverProblem& p,
                              const ValidatorSettings& s) {
    ValidationReport rep;
    rep.settings = s;
    rep.problem_fingerprint = p.fingerprint();

    auto pick_samples = [&](const SemialgebraicSet& set, int count) {
        const bool polar_able = set.vars().size() == 2 &&
                                set.factors().size() == 1 &&
                                set.factors()[0].kind == SetFactor::Kind::ball;
        return polar_able ? polar_samples(set, count)
                          : cartesian_samples(set, count);
    };
    rep.e0 = pick_samples(p.E(), s.e_count);
    rep.gains = pick_samples(p.L(), s.l_count);
    rep.x0 = x0_lattice(p.X(), s.x0_per_dim);

    // when g has no x dependence the x0 quantifier is vacuous: a single
    // representative sample decides admissibility for all x0
    const auto g = error_dynamics(p);
    bool uses_x = false;
    for (const auto& gi : g)
        for (auto v : gi.support_vars())
            for (auto xv : p.x_vars())
                if (v == xv) uses_x = true;
    rep.x_independent_error = !uses_x;
    std::vector<std::vector<double>> x0s = rep.x0.coords;
    if (!uses_x) x0s.resize(1);
    rep.x0_used = x0s.size();

    const std::size_t ne = rep.e0.coords.size();
    const std::size_t nl = rep.gains.coords.size();
    rep.admissible.assign(ne * nl, 0);
    std::vector<int> blowups(nl, 0);

    const SweepContext ctx = make_context(p);
    parallel_for(nl, s.threads, [&](std::size_t li) {
        for (std::size_t ei = 0; ei < ne; ++ei) {
            const bool ok = admissible_impl(ctx, p, rep.gains.coords[li],
                                            rep.e0.coords[ei], x0s, s.steps,
                                            &blowups[li]);
            rep.admissible[li * ne + ei] = ok ? 1 : 0;
        }
    });
    for (int b : blowups) rep.blowups += b;

    rep.feasible_counts.assign(nl, 0);
    rep.measure_estimates.assign(nl, 0.0);
    for (std::size_t li = 0; li < nl; ++li) {
        for (std::size_t ei = 0; ei < ne; ++ei)
            if (rep.admissible[li * ne + ei]) {
                rep.feasible_counts[li] += 1;
                rep.measure_estimates[li] += rep.e0.weights[ei];
            }
    }
    int best = 0;
    for (int c : rep.feasible_counts) best = std::max(best, c);
    for (std::size_t li = 0; li < nl; ++li)
        if (rep.feasible_counts[li] == best && best > 0)
            rep.best_gains.push_back(li);
    return rep;
}

std::vector<ContainmentViolation>
containment_check(const Certificate& cert, const ObserverProblem& p,
                  const ValidationReport& rep) {
    if (cert.problem_fingerprint != rep.problem_fingerprint)
        throw std::invalid_argument(
            "containment_check: certificate/report fingerprint mismatch");
    std::vector<ContainmentViolation> out;
    const std::size_t ne = rep.e0.coords.size();
    std::vector<double> pt(p.registry()->size(), 0.0);
    for (std::size_t li = 0; li < rep.gains.coords.size(); ++li) {
        for (std::size_t ei = 0; ei < ne; ++ei) {
            if (!rep.admissible[li * ne + ei]) continue;
            for (std::size_t j = 0; j < rep.e0.vars.size(); ++j)
                pt[rep.e0.vars[j]] = rep.e0.coords[ei][j];
            for (std::size_t j = 0; j < rep.gains.vars.size(); ++j)
                pt[rep.gains.vars[j]] = rep.gains.coords[li][j];
            const double w = cert.w.evaluate(pt);
            if (w < 1.0 - 1e-6) out.push_back({li, ei, w});
        }
    }
    return out;
}

void export_report_csv(const std::string& path, const ValidationReport& r) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path);
    for (std::size_t j = 0; j < r.e0.vars.size(); ++j)
        out << "e" << j + 1 << ",";
    for (std::size_t j = 0; j < r.gains.vars.size(); ++j)
        out << "l" << j + 1 << ",";
    out << "admissible\n";
    const std::size_t ne = r.e0.coords.size();
    for (std::size_t li = 0; li < r.gains.coords.size(); ++li)
        for (std::size_t ei = 0; ei < ne; ++ei) {
            for (double v : r.e0.coords[ei]) out << format_double(v) << ",";
            for (double v : r.gains.coords[li]) out << format_double(v) << ",";
            out << int(r.admissible[li * ne + ei]) << "\n";
        }
}

std::string report_summary_json(const ValidationReport& r) {
    nlohmann::ordered_json j;
    j["kind"] = "obsyn-validation-summary";
    j["fingerprint"] = to_hex(r.problem_fingerprint);
    j["e0_samples"] = r.e0.coords.size();
    j["e0_scheme"] = r.e0.scheme;
    j["gain_samples"] = r.gains.coords.size();
    j["gain_scheme"] = r.gains.scheme;
    j["x0_samples"] = r.x0.coords.size();
    j["x0_used"] = r.x0_used;
    j["x_independent_error"] = r.x_independent_error;
    j["blowups"] = r.blowups;
    j["settings"] = {{"steps", r.settings.steps},
                     {"x0_per_dim", r.settings.x0_per_dim},
                     {"e_count", r.settings.e_count},
                     {"l_count", r.settings.l_count},
                     {"seed", r.settings.seed}};
    nlohmann::ordered_json counts = nlohmann::ordered_json::array();
    for (int c : r.feasible_counts) counts.push_back(c);
    j["feasible_counts"] = counts;
    nlohmann::ordered_json meas = nlohmann::ordered_json::array();
    for (double m : r.measure_estimates) meas.push_back(format_double(m));
    j["measure_estimates"] = meas;
    j["best_gains"] = r.best_gains;
    return j.dump(1) + "\n";
}

} // namespace obsyn
