#include "obsyn/observer.hpp"

#include "obsyn/util.hpp"

#include <algorithm>
#include <set>
#include <sstream>
#include <stdexcept>

namespace obsyn {

RegistryPtr ObserverProblem::make_registry(std::size_t n, std::size_t m) {
    std::vector<std::string> names;
    names.push_back("t");
    for (std::size_t i = 1; i <= n; ++i) names.push_back("x" + std::to_string(i));
    for (std::size_t i = 1; i <= n; ++i) names.push_back("e" + std::to_string(i));
    for (std::size_t i = 1; i <= n * m; ++i)
        names.push_back("l" + std::to_string(i));
    return VariableRegistry::create(std::move(names));
}

namespace {

void check_support(const Polynomial& p, const std::set<std::size_t>& allowed,
                   const std::string& what) {
    for (auto v : p.support_vars())
        if (!allowed.count(v))
            throw std::invalid_argument(what + " uses disallowed variable '" +
                                        p.registry()->name(v) + "'");
}

void check_set_vars(const SemialgebraicSet& s,
                    const std::vector<std::size_t>& expect,
                    const std::string& what) {
    if (s.vars() != expect)
        throw std::invalid_argument("set " + what +
                                    " is not over the expected variables");
}

} // namespace

ObserverProblem ObserverProblem::create(
    std::size_t n, std::size_t m, std::vector<std::string> f_text,
    std::vector<std::string> h_text, const SemialgebraicSet& X,
    const SemialgebraicSet& E, const SemialgebraicSet& E_T,
    const SemialgebraicSet& L, double horizon) {
    if (n == 0 || m == 0)
        throw std::invalid_argument("problem requires n >= 1 and m >= 1");
    if (f_text.size() != n)
        throw std::invalid_argument("expected n dynamics polynomials");
    if (h_text.size() != m)
        throw std::invalid_argument("expected m output polynomials");
    if (!(horizon > 0.0))
        throw std::invalid_argument("horizon must be positive");

    ObserverProblem p;
    p.n_ = n;
    p.m_ = m;
    // adopt the sets' shared registry; it must match the canonical layout
    p.reg_ = X.registry();
    if (!p.reg_)
        throw std::invalid_argument("problem sets carry no registry");
    if (E.registry() != p.reg_ || E_T.registry() != p.reg_ ||
        L.registry() != p.reg_)
        throw std::invalid_argument("problem sets use different registries");
    if (p.reg_->names() != make_registry(n, m)->names())
        throw std::invalid_argument(
            "registry does not follow the t, x1.., e1.., l1.. layout");
    p.horizon_ = horizon;

    std::set<std::size_t> tx, xonly;
    tx.insert(p.t_var());
    for (std::size_t i = 0; i < n; ++i) {
        tx.insert(p.x_var(i));
        xonly.insert(p.x_var(i));
    }
    for (auto& s : f_text) {
        p.f_.push_back(Polynomial::parse(s, p.reg_));
        check_support(p.f_.back(), tx, "f");
    }
    for (auto& s : h_text) {
        p.h_.push_back(Polynomial::parse(s, p.reg_));
        check_support(p.h_.back(), xonly, "h");
    }

    check_set_vars(X, p.x_vars(), "X");
    check_set_vars(E, p.e_vars(), "E");
    check_set_vars(E_T, p.e_vars(), "E_T");
    check_set_vars(L, p.l_vars(), "L");
    p.X_ = X;
    p.E_ = E;
    p.ET_ = E_T;
    p.L_ = L;

    // E_T must sit inside E; checked on sampled boundary points.
    for (const auto& pt : boundary_points(E_T, 1000))
        if (!E.contains(pt, 1e-9))
            throw std::invalid_argument("E_T is not contained in E");

    return p;
}

std::vector<std::size_t> ObserverProblem::x_vars() const {
    std::vector<std::size_t> v;
    for (std::size_t i = 0; i < n_; ++i) v.push_back(x_var(i));
    return v;
}
std::vector<std::size_t> ObserverProblem::e_vars() const {
    std::vector<std::size_t> v;
    for (std::size_t i = 0; i < n_; ++i) v.push_back(e_var(i));
    return v;
}
std::vector<std::size_t> ObserverProblem::l_vars() const {
    std::vector<std::size_t> v;
    for (std::size_t i = 0; i < n_ * m_; ++i) v.push_back(l_var(i));
    return v;
}
std::vector<std::size_t> ObserverProblem::z_vars() const {
    auto v = x_vars();
    auto e = e_vars();
    v.insert(v.end(), e.begin(), e.end());
    return v;
}

std::string set_description(const SemialgebraicSet& s) {
    std::ostringstream os;
    if (!s.has_moments()) {
        os << "generic{";
        for (const auto& h : s.inequalities()) os << h.to_string() << ";";
        os << "}";
        return os.str();
    }
    for (const auto& f : s.factors()) {
        if (f.kind == SetFactor::Kind::box) {
            os << "box[";
            for (std::size_t i = 0; i < f.vars.size(); ++i)
                os << f.vars[i] << ":" << format_double(f.lower[i]) << ","
                   << format_double(f.upper[i]) << ";";
            os << "]";
        } else {
            os << "ball[";
            for (std::size_t i = 0; i < f.vars.size(); ++i)
                os << f.vars[i] << ":" << format_double(f.center[i]) << ";";
            os << "r=" << format_double(f.radius) << "]";
        }
    }
    return os.str();
}

std::string ObserverProblem::canonical_description() const {
    std::ostringstream os;
    os << "n=" << n_ << ";m=" << m_ << ";T=" << format_double(horizon_) << ";";
    for (const auto& p : f_) os << "f:" << p.to_string() << ";";
    for (const auto& p : h_) os << "h:" << p.to_string() << ";";
    os << "X:" << set_description(X_) << ";E:" << set_description(E_)
       << ";ET:" << set_description(ET_) << ";L:" << set_description(L_);
    return os.str();
}

std::uint64_t ObserverProblem::fingerprint() const {
    return fnv1a64(canonical_description());
}

std::vector<Polynomial> error_dynamics(const ObserverProblem& p) {
    const auto& reg = p.registry();
    std::map<std::size_t, Polynomial> shift; // x_i -> x_i - e_i
    for (std::size_t i = 0; i < p.n(); ++i)
        shift.emplace(p.x_var(i), Polynomial::variable(reg, p.x_var(i)) -
                                      Polynomial::variable(reg, p.e_var(i)));

    std::vector<Polynomial> h_diff; // h_j(x) - h_j(x - e)
    for (const auto& hj : p.h())
        h_diff.push_back(hj - hj.substitute(shift));

    std::vector<Polynomial> g;
    for (std::size_t i = 0; i < p.n(); ++i) {
        Polynomial gi = p.f()[i] - p.f()[i].substitute(shift);
        for (std::size_t j = 0; j < p.m(); ++j)
            gi = gi - Polynomial::variable(reg, p.l_var(i, j)) * h_diff[j];
        g.push_back(std::move(gi));
    }
    return g;
}

AugmentedField augmented_field(const ObserverProblem& p) {
    AugmentedField a;
    a.n = p.n();
    const double T = p.horizon();
    const auto& reg = p.registry();
    std::map<std::size_t, Polynomial> time_scale; // t -> T * t
    time_scale.emplace(p.t_var(),
                       Polynomial::variable(reg, p.t_var()).scaled(T));

    auto rescale = [&](const Polynomial& q) {
        if (T == 1.0) return q;
        return q.substitute(time_scale).scaled(T);
    };

    for (const auto& fi : p.f()) a.phi.push_back(rescale(fi));
    for (const auto& gi : error_dynamics(p)) a.phi.push_back(rescale(gi));
    return a;
}

unsigned AugmentedField::degree() const {
    unsigned d = 0;
    for (const auto& c : phi) d = std::max(d, c.degree());
    return d;
}

unsigned AugmentedField::degree_in_z(const ObserverProblem& p) const {
    const auto z = p.z_vars();
    unsigned d = 0;
    for (const auto& c : phi) d = std::max(d, c.degree_in(z));
    return d;
}

} // namespace obsyn
