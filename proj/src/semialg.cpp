#include "obsyn/semialg.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <stdexcept>

namespace obsyn {

namespace {

Polynomial ball_inequality(const RegistryPtr& reg,
                           const std::vector<std::size_t>& vars,
                           const std::vector<double>& center, double radius) {
    // radius^2 - sum (x_i - c_i)^2
    Polynomial p = Polynomial::constant(reg, radius * radius);
    for (std::size_t i = 0; i < vars.size(); ++i) {
        Polynomial d = Polynomial::variable(reg, vars[i]) -
                       Polynomial::constant(reg, center[i]);
        p = p - d * d;
    }
    return p;
}

void sort_by_var(std::vector<std::size_t>& vars,
                 std::vector<std::vector<double>*> parallel) {
    std::vector<std::size_t> idx(vars.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(),
              [&](std::size_t a, std::size_t b) { return vars[a] < vars[b]; });
    auto apply = [&](auto& v) {
        auto copy = v;
        for (std::size_t i = 0; i < idx.size(); ++i) v[i] = copy[idx[i]];
    };
    apply(vars);
    for (auto* p : parallel)
        if (p && !p->empty()) apply(*p);
}

// integral of x^k over [a, b]
double box_axis_moment(double a, double b, unsigned k) {
    return (std::pow(b, k + 1) - std::pow(a, k + 1)) / double(k + 1);
}

// integral of u^alpha over the centered unit ball in |alpha| dims:
//   2 * prod Gamma((a_i+1)/2) / Gamma((|a|+n)/2) / (|a|+n), zero for odd a_i
double unit_ball_moment(std::span<const std::uint32_t> alpha) {
    const std::size_t n = alpha.size();
    unsigned total = 0;
    for (auto a : alpha) {
        if (a % 2 == 1) return 0.0;
        total += a;
    }
    double lg = 0.0;
    for (auto a : alpha) lg += std::lgamma((a + 1) / 2.0);
    lg -= std::lgamma((total + n) / 2.0);
    return 2.0 * std::exp(lg) / double(total + n);
}

double centered_ball_moment(std::span<const std::uint32_t> alpha, double r) {
    unsigned total = 0;
    for (auto a : alpha) total += a;
    return std::pow(r, double(total + alpha.size())) * unit_ball_moment(alpha);
}

// shifted ball moment via binomial expansion around the center
double ball_moment(std::span<const std::uint32_t> alpha,
                   const std::vector<double>& center, double r) {
    bool centered = true;
    for (double c : center)
        if (c != 0.0) centered = false;
    if (centered) return centered_ball_moment(alpha, r);

    const std::size_t n = alpha.size();
    std::vector<std::uint32_t> beta(n, 0);
    double sum = 0.0;
    for (;;) {
        double w = 1.0;
        for (std::size_t i = 0; i < n; ++i)
            w *= binomial(alpha[i], beta[i]) *
                 std::pow(center[i], double(alpha[i] - beta[i]));
        if (w != 0.0) sum += w * centered_ball_moment(beta, r);
        // odometer over beta <= alpha
        std::size_t i = 0;
        while (i < n && beta[i] == alpha[i]) beta[i++] = 0;
        if (i == n) break;
        ++beta[i];
    }
    return sum;
}

double factor_moment(const SetFactor& f, std::span<const std::uint32_t> alpha) {
    if (f.kind == SetFactor::Kind::box) {
        double m = 1.0;
        for (std::size_t i = 0; i < f.vars.size(); ++i)
            m *= box_axis_moment(f.lower[i], f.upper[i], alpha[i]);
        return m;
    }
    return ball_moment(alpha, f.center, f.radius);
}

} // namespace

void SemialgebraicSet::add_archimedean() {
    double big_r = 0.0;
    for (std::size_t i = 0; i < vars_.size(); ++i) {
        const double m = std::max(std::abs(bbox_lo_[i]), std::abs(bbox_hi_[i]));
        big_r += m * m;
    }
    Polynomial arch = Polynomial::constant(reg_, big_r);
    for (auto v : vars_) {
        Polynomial x = Polynomial::variable(reg_, v);
        arch = arch - x * x;
    }
    for (const auto& h : ineqs_)
        if (h == arch) return; // already present (symmetric 1-D boxes)
    ineqs_.push_back(std::move(arch));
}

SemialgebraicSet SemialgebraicSet::make_box(RegistryPtr reg,
                                            std::vector<std::size_t> vars,
                                            std::vector<double> lower,
                                            std::vector<double> upper) {
    if (vars.empty() || vars.size() != lower.size() ||
        vars.size() != upper.size())
        throw std::invalid_argument("make_box: size mismatch");
    sort_by_var(vars, {&lower, &upper});
    for (std::size_t i = 0; i < vars.size(); ++i)
        if (!(lower[i] < upper[i]))
            throw std::invalid_argument("make_box: degenerate interval");

    SemialgebraicSet s;
    s.reg_ = std::move(reg);
    s.vars_ = vars;
    s.shape_ = ShapeHint::box;
    s.bbox_lo_ = lower;
    s.bbox_hi_ = upper;
    for (std::size_t i = 0; i < vars.size(); ++i) {
        Polynomial x = Polynomial::variable(s.reg_, vars[i]);
        s.ineqs_.push_back((x - Polynomial::constant(s.reg_, lower[i])) *
                           (Polynomial::constant(s.reg_, upper[i]) - x));
    }
    s.add_archimedean();
    SetFactor f;
    f.kind = SetFactor::Kind::box;
    f.vars = vars;
    f.lower = std::move(lower);
    f.upper = std::move(upper);
    s.factors_.push_back(std::move(f));
    return s;
}

SemialgebraicSet SemialgebraicSet::make_ball(RegistryPtr reg,
                                             std::vector<std::size_t> vars,
                                             std::vector<double> center,
                                             double radius) {
    if (vars.empty() || vars.size() != center.size())
        throw std::invalid_argument("make_ball: size mismatch");
    if (!(radius > 0.0))
        throw std::invalid_argument("make_ball: non-positive radius");
    sort_by_var(vars, {&center});

    SemialgebraicSet s;
    s.reg_ = std::move(reg);
    s.vars_ = vars;
    s.shape_ = ShapeHint::ball;
    for (std::size_t i = 0; i < vars.size(); ++i) {
        s.bbox_lo_.push_back(center[i] - radius);
        s.bbox_hi_.push_back(center[i] + radius);
    }
    s.ineqs_.push_back(ball_inequality(s.reg_, vars, center, radius));
    bool centered = true;
    for (double c : center)
        if (c != 0.0) centered = false;
    if (!centered) s.add_archimedean();
    SetFactor f;
    f.kind = SetFactor::Kind::ball;
    f.vars = vars;
    f.center = std::move(center);
    f.radius = radius;
    s.factors_.push_back(std::move(f));
    return s;
}

SemialgebraicSet SemialgebraicSet::time_interval(RegistryPtr reg,
                                                 std::size_t tvar, double t0,
                                                 double t1) {
    SemialgebraicSet s = make_box(std::move(reg), {tvar}, {t0}, {t1});
    s.shape_ = ShapeHint::interval_time;
    return s;
}

SemialgebraicSet
SemialgebraicSet::from_inequalities(RegistryPtr reg,
                                    std::vector<std::size_t> vars,
                                    std::vector<Polynomial> ineqs) {
    std::sort(vars.begin(), vars.end());
    SemialgebraicSet s;
    s.reg_ = std::move(reg);
    s.vars_ = std::move(vars);
    s.ineqs_ = std::move(ineqs);
    s.shape_ = ShapeHint::generic;
    return s;
}

SemialgebraicSet SemialgebraicSet::product(const SemialgebraicSet& a,
                                           const SemialgebraicSet& b) {
    if (a.reg_ != b.reg_)
        throw std::invalid_argument("product_set: registry mismatch");
    for (auto v : a.vars_)
        if (std::find(b.vars_.begin(), b.vars_.end(), v) != b.vars_.end())
            throw std::invalid_argument("product_set: overlapping variables");

    SemialgebraicSet s;
    s.reg_ = a.reg_;
    s.vars_ = a.vars_;
    s.vars_.insert(s.vars_.end(), b.vars_.begin(), b.vars_.end());
    s.ineqs_ = a.ineqs_;
    s.ineqs_.insert(s.ineqs_.end(), b.ineqs_.begin(), b.ineqs_.end());
    s.shape_ = (a.shape_ != ShapeHint::generic && b.shape_ != ShapeHint::generic &&
                a.shape_ != ShapeHint::ball && b.shape_ != ShapeHint::ball)
                   ? ShapeHint::box
                   : ShapeHint::generic;
    if (a.has_moments() && b.has_moments()) {
        s.factors_ = a.factors_;
        s.factors_.insert(s.factors_.end(), b.factors_.begin(),
                          b.factors_.end());
    }
    s.bbox_lo_ = a.bbox_lo_;
    s.bbox_lo_.insert(s.bbox_lo_.end(), b.bbox_lo_.begin(), b.bbox_lo_.end());
    s.bbox_hi_ = a.bbox_hi_;
    s.bbox_hi_.insert(s.bbox_hi_.end(), b.bbox_hi_.begin(), b.bbox_hi_.end());

    // canonical ascending variable order
    std::vector<std::size_t> perm(s.vars_.size());
    std::iota(perm.begin(), perm.end(), 0);
    std::sort(perm.begin(), perm.end(), [&](std::size_t x, std::size_t y) {
        return s.vars_[x] < s.vars_[y];
    });
    auto vars = s.vars_;
    auto lo = s.bbox_lo_, hi = s.bbox_hi_;
    for (std::size_t i = 0; i < perm.size(); ++i) {
        s.vars_[i] = vars[perm[i]];
        if (!lo.empty()) {
            s.bbox_lo_[i] = lo[perm[i]];
            s.bbox_hi_[i] = hi[perm[i]];
        }
    }
    return s;
}

double
SemialgebraicSet::lebesgue_moment(std::span<const std::uint32_t> alpha) const {
    if (!has_moments())
        throw std::invalid_argument(
            "lebesgue_moment: set has no closed-form moments (generic shape)");
    if (alpha.size() != vars_.size())
        throw std::invalid_argument("lebesgue_moment: alpha size mismatch");
    double m = 1.0;
    std::vector<std::uint32_t> sub;
    for (const auto& f : factors_) {
        sub.clear();
        for (auto v : f.vars) {
            const auto it = std::find(vars_.begin(), vars_.end(), v);
            sub.push_back(alpha[std::size_t(it - vars_.begin())]);
        }
        m *= factor_moment(f, sub);
        if (m == 0.0) return 0.0;
    }
    return m;
}

double SemialgebraicSet::lebesgue_moment(const Monomial& mono) const {
    std::vector<std::uint32_t> alpha(vars_.size(), 0);
    for (std::size_t v = 0; v < mono.exps.size(); ++v) {
        if (mono.exps[v] == 0) continue;
        const auto it = std::find(vars_.begin(), vars_.end(), v);
        if (it == vars_.end())
            throw std::invalid_argument(
                "lebesgue_moment: monomial uses a non-set variable");
        alpha[std::size_t(it - vars_.begin())] = mono.exps[v];
    }
    return lebesgue_moment(alpha);
}

double SemialgebraicSet::volume() const {
    const std::vector<std::uint32_t> zeros(vars_.size(), 0);
    return lebesgue_moment(zeros);
}

double SemialgebraicSet::lower_bound(std::size_t var) const {
    const auto it = std::find(vars_.begin(), vars_.end(), var);
    if (it == vars_.end() || bbox_lo_.empty())
        throw std::invalid_argument("lower_bound: unknown set variable");
    return bbox_lo_[std::size_t(it - vars_.begin())];
}

double SemialgebraicSet::upper_bound(std::size_t var) const {
    const auto it = std::find(vars_.begin(), vars_.end(), var);
    if (it == vars_.end() || bbox_hi_.empty())
        throw std::invalid_argument("upper_bound: unknown set variable");
    return bbox_hi_[std::size_t(it - vars_.begin())];
}

bool SemialgebraicSet::contains(std::span<const double> point,
                                double tol) const {
    for (const auto& h : ineqs_)
        if (h.evaluate(point) < -tol) return false;
    return true;
}

SemialgebraicSet affine_rescale(const SemialgebraicSet& set,
                                std::span<const double> centers,
                                std::span<const double> scales) {
    const auto& reg = set.registry();
    if (centers.size() != reg->size() || scales.size() != reg->size())
        throw std::invalid_argument("affine_rescale: map size mismatch");

    // factor-preserving path
    if (set.has_moments()) {
        std::vector<SemialgebraicSet> parts;
        bool ok = true;
        for (const auto& f : set.factors()) {
            if (f.kind == SetFactor::Kind::box) {
                std::vector<double> lo, hi;
                for (std::size_t i = 0; i < f.vars.size(); ++i) {
                    const double c = centers[f.vars[i]], s = scales[f.vars[i]];
                    lo.push_back((f.lower[i] - c) / s);
                    hi.push_back((f.upper[i] - c) / s);
                }
                parts.push_back(
                    SemialgebraicSet::make_box(reg, f.vars, lo, hi));
            } else {
                const double s0 = scales[f.vars[0]];
                bool uniform = true;
                for (auto v : f.vars)
                    if (scales[v] != s0) uniform = false;
                if (!uniform) {
                    ok = false;
                    break;
                }
                std::vector<double> c;
                for (std::size_t i = 0; i < f.vars.size(); ++i)
                    c.push_back((f.center[i] - centers[f.vars[i]]) / s0);
                parts.push_back(SemialgebraicSet::make_ball(
                    reg, f.vars, c, f.radius / s0));
            }
        }
        if (ok && !parts.empty()) {
            SemialgebraicSet out = parts.front();
            for (std::size_t i = 1; i < parts.size(); ++i)
                out = SemialgebraicSet::product(out, parts[i]);
            if (set.shape() == ShapeHint::interval_time &&
                parts.size() == 1)
                return SemialgebraicSet::time_interval(
                    reg, set.vars()[0], out.lower_bound(set.vars()[0]),
                    out.upper_bound(set.vars()[0]));
            return out;
        }
    }

    // generic path: substitute x -> c + s*x into every inequality
    std::map<std::size_t, Polynomial> sub;
    for (auto v : set.vars())
        sub.emplace(v, Polynomial::constant(reg, centers[v]) +
                           Polynomial::variable(reg, v).scaled(scales[v]));
    std::vector<Polynomial> ineqs;
    for (const auto& h : set.inequalities()) ineqs.push_back(h.substitute(sub));
    // fresh Archimedean bound from the transformed bounding box
    double big_r = 0.0;
    for (auto v : set.vars()) {
        const double lo = (set.lower_bound(v) - centers[v]) / scales[v];
        const double hi = (set.upper_bound(v) - centers[v]) / scales[v];
        const double m = std::max(std::abs(lo), std::abs(hi));
        big_r += m * m;
    }
    Polynomial arch = Polynomial::constant(reg, big_r);
    for (auto v : set.vars()) {
        Polynomial x = Polynomial::variable(reg, v);
        arch = arch - x * x;
    }
    ineqs.push_back(std::move(arch));
    return SemialgebraicSet::from_inequalities(reg, set.vars(), std::move(ineqs));
}

std::vector<std::vector<double>> boundary_points(const SemialgebraicSet& set,
                                                 std::size_t count) {
    const std::size_t nreg = set.registry()->size();
    std::vector<std::vector<double>> pts;
    if (!set.has_moments() || set.factors().size() != 1)
        throw std::invalid_argument(
            "boundary_points: supported for single box/ball factors only");
    const auto& f = set.factors().front();
    const std::size_t n = f.vars.size();
    std::mt19937 rng(0x5eed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::uniform_real_distribution<double> unif(0.0, 1.0);

    for (std::size_t p = 0; p < count; ++p) {
        std::vector<double> x(nreg, 0.0);
        if (f.kind == SetFactor::Kind::ball) {
            if (n == 1) {
                x[f.vars[0]] =
                    f.center[0] + (p % 2 == 0 ? f.radius : -f.radius);
            } else {
                double norm = 0.0;
                std::vector<double> dir(n);
                do {
                    norm = 0.0;
                    for (auto& d : dir) {
                        d = gauss(rng);
                        norm += d * d;
                    }
                } while (norm < 1e-12);
                norm = std::sqrt(norm);
                for (std::size_t i = 0; i < n; ++i)
                    x[f.vars[i]] = f.center[i] + f.radius * dir[i] / norm;
            }
        } else {
            // pick a face, uniform point on it
            const std::size_t axis = p % (2 * n);
            for (std::size_t i = 0; i < n; ++i)
                x[f.vars[i]] = f.lower[i] + unif(rng) * (f.upper[i] - f.lower[i]);
            x[f.vars[axis / 2]] = (axis % 2 == 0) ? f.lower[axis / 2]
                                                  : f.upper[axis / 2];
        }
        pts.push_back(std::move(x));
    }
    return pts;
}

} // namespace obsyn
