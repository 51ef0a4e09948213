#include "obsyn/poly.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <set>
#include <stdexcept>

namespace obsyn {

// ---------------------------------------------------------------- registry

VariableRegistry::VariableRegistry(std::vector<std::string> names)
    : names_(std::move(names)) {}

std::shared_ptr<const VariableRegistry>
VariableRegistry::create(std::vector<std::string> names) {
    std::set<std::string> seen;
    for (const auto& n : names) {
        if (n.empty())
            throw std::invalid_argument("registry: empty variable name");
        if (!seen.insert(n).second)
            throw std::invalid_argument("registry: duplicate variable '" + n +
                                        "'");
    }
    return std::shared_ptr<const VariableRegistry>(
        new VariableRegistry(std::move(names)));
}

std::optional<std::size_t> VariableRegistry::find(std::string_view n) const {
    for (std::size_t i = 0; i < names_.size(); ++i)
        if (names_[i] == n) return i;
    return std::nullopt;
}

std::size_t VariableRegistry::index_of(std::string_view n) const {
    if (auto i = find(n)) return *i;
    throw std::invalid_argument("unknown variable '" + std::string(n) + "'");
}

// -------------------------------------------------------------- polynomial

Polynomial::Polynomial(RegistryPtr reg, TermMap terms)
    : reg_(std::move(reg)), terms_(std::move(terms)) {
    for (auto it = terms_.begin(); it != terms_.end();) {
        if (std::abs(it->second) < kCoeffZeroTol)
            it = terms_.erase(it);
        else
            ++it;
    }
}

Polynomial Polynomial::zero(RegistryPtr reg) {
    return Polynomial(std::move(reg), {});
}

Polynomial Polynomial::constant(RegistryPtr reg, double c) {
    TermMap t;
    t.emplace(Monomial(reg->size()), c);
    return Polynomial(std::move(reg), std::move(t));
}

Polynomial Polynomial::variable(RegistryPtr reg, std::size_t var) {
    if (var >= reg->size())
        throw std::invalid_argument("variable index out of range");
    Monomial m(reg->size());
    m.exps[var] = 1;
    TermMap t;
    t.emplace(std::move(m), 1.0);
    return Polynomial(std::move(reg), std::move(t));
}

Polynomial Polynomial::monomial(RegistryPtr reg, Monomial m, double c) {
    if (m.exps.size() != reg->size())
        throw std::invalid_argument("monomial size does not match registry");
    TermMap t;
    t.emplace(std::move(m), c);
    return Polynomial(std::move(reg), std::move(t));
}

Polynomial Polynomial::from_terms(RegistryPtr reg, TermMap terms) {
    for (const auto& [m, c] : terms)
        if (m.exps.size() != reg->size())
            throw std::invalid_argument("term size does not match registry");
    return Polynomial(std::move(reg), std::move(terms));
}

unsigned Polynomial::degree() const {
    if (terms_.empty()) return 0;
    return std::prev(terms_.end())->first.degree();
}

unsigned Polynomial::degree_in(std::size_t var) const {
    unsigned d = 0;
    for (const auto& [m, c] : terms_) d = std::max(d, unsigned(m.exps.at(var)));
    return d;
}

unsigned Polynomial::degree_in(std::span<const std::size_t> vars) const {
    unsigned d = 0;
    for (const auto& [m, c] : terms_) {
        unsigned td = 0;
        for (auto v : vars) td += m.exps.at(v);
        d = std::max(d, td);
    }
    return d;
}

double Polynomial::coeff(const Monomial& m) const {
    auto it = terms_.find(m);
    return it == terms_.end() ? 0.0 : it->second;
}

double Polynomial::constant_term() const {
    if (!reg_) return 0.0;
    return coeff(Monomial(reg_->size()));
}

std::vector<std::size_t> Polynomial::support_vars() const {
    std::vector<std::size_t> out;
    if (!reg_) return out;
    for (std::size_t v = 0; v < reg_->size(); ++v)
        for (const auto& [m, c] : terms_)
            if (m.exps[v] > 0) {
                out.push_back(v);
                break;
            }
    return out;
}

void Polynomial::require_same_registry(const Polynomial& o) const {
    if (reg_ != o.reg_)
        throw std::invalid_argument("polynomial registry mismatch");
}

Polynomial Polynomial::operator-() const { return scaled(-1.0); }

Polynomial Polynomial::operator+(const Polynomial& o) const {
    require_same_registry(o);
    TermMap t = terms_;
    for (const auto& [m, c] : o.terms_) t[m] += c;
    return Polynomial(reg_, std::move(t));
}

Polynomial Polynomial::operator-(const Polynomial& o) const {
    require_same_registry(o);
    TermMap t = terms_;
    for (const auto& [m, c] : o.terms_) t[m] -= c;
    return Polynomial(reg_, std::move(t));
}

Polynomial Polynomial::operator*(const Polynomial& o) const {
    require_same_registry(o);
    TermMap t;
    const std::size_t n = reg_ ? reg_->size() : 0;
    Monomial prod(n);
    for (const auto& [ma, ca] : terms_) {
        for (const auto& [mb, cb] : o.terms_) {
            for (std::size_t i = 0; i < n; ++i)
                prod.exps[i] = ma.exps[i] + mb.exps[i];
            t[prod] += ca * cb;
        }
    }
    return Polynomial(reg_, std::move(t));
}

Polynomial Polynomial::scaled(double s) const {
    TermMap t = terms_;
    for (auto& [m, c] : t) c *= s;
    return Polynomial(reg_, std::move(t));
}

Polynomial Polynomial::pow(unsigned e) const {
    if (!reg_) throw std::invalid_argument("pow on empty polynomial");
    Polynomial result = Polynomial::constant(reg_, 1.0);
    Polynomial base = *this;
    while (e) {
        if (e & 1) result = result * base;
        e >>= 1;
        if (e) base = base * base;
    }
    return result;
}

Polynomial Polynomial::differentiate(std::size_t var) const {
    if (!reg_ || var >= reg_->size())
        throw std::invalid_argument("differentiate: unknown variable");
    TermMap t;
    for (const auto& [m, c] : terms_) {
        if (m.exps[var] == 0) continue;
        Monomial d = m;
        const double k = d.exps[var];
        d.exps[var] -= 1;
        t[d] += c * k;
    }
    return Polynomial(reg_, std::move(t));
}

Polynomial
Polynomial::substitute(const std::map<std::size_t, Polynomial>& b) const {
    if (!reg_) throw std::invalid_argument("substitute on empty polynomial");
    for (const auto& [v, p] : b) {
        if (v >= reg_->size())
            throw std::invalid_argument("substitute: unknown variable");
        if (p.reg_ != reg_)
            throw std::invalid_argument("substitute: registry mismatch");
    }
    // power cache per substituted variable
    std::map<std::size_t, std::vector<Polynomial>> powers;
    for (const auto& [v, p] : b) powers[v] = {Polynomial::constant(reg_, 1.0)};

    auto power_of = [&](std::size_t v, unsigned e) -> const Polynomial& {
        auto& cache = powers[v];
        while (cache.size() <= e) cache.push_back(cache.back() * b.at(v));
        return cache[e];
    };

    Polynomial result = Polynomial::zero(reg_);
    for (const auto& [m, c] : terms_) {
        Monomial rest(reg_->size());
        Polynomial factor = Polynomial::constant(reg_, c);
        bool any = false;
        for (std::size_t v = 0; v < reg_->size(); ++v) {
            if (m.exps[v] == 0) continue;
            if (b.count(v)) {
                factor = factor * power_of(v, m.exps[v]);
                any = true;
            } else {
                rest.exps[v] = m.exps[v];
            }
        }
        Polynomial term = any || rest.degree() == 0
                              ? factor * Polynomial::monomial(reg_, rest, 1.0)
                              : Polynomial::monomial(reg_, rest, c);
        result = result + term;
    }
    return result;
}

Polynomial Polynomial::substitute_values(
    const std::map<std::size_t, double>& b) const {
    std::map<std::size_t, Polynomial> pb;
    for (const auto& [v, x] : b) pb.emplace(v, Polynomial::constant(reg_, x));
    return substitute(pb);
}

double Polynomial::evaluate(std::span<const double> point) const {
    if (!reg_) return 0.0;
    if (point.size() != reg_->size())
        throw std::invalid_argument("evaluate: point dimension mismatch");
    // cached integer powers per variable
    std::vector<std::vector<double>> pow_cache(reg_->size());
    auto power_of = [&](std::size_t v, unsigned e) {
        auto& cache = pow_cache[v];
        if (cache.empty()) cache.push_back(1.0);
        while (cache.size() <= e) cache.push_back(cache.back() * point[v]);
        return cache[e];
    };
    double sum = 0.0;
    for (const auto& [m, c] : terms_) {
        double t = c;
        for (std::size_t v = 0; v < m.exps.size(); ++v)
            if (m.exps[v]) t *= power_of(v, m.exps[v]);
        sum += t;
    }
    return sum;
}

bool operator==(const Polynomial& a, const Polynomial& b) {
    return a.reg_ == b.reg_ && a.terms_ == b.terms_;
}

// ------------------------------------------------------------------ parser

namespace {

class Parser {
public:
    Parser(std::string_view text, const RegistryPtr& reg)
        : text_(text), reg_(reg) {}

    Polynomial run() {
        Polynomial p = expr();
        skip_ws();
        if (pos_ != text_.size()) fail("unexpected trailing input");
        return p;
    }

private:
    [[noreturn]] void fail(const std::string& what) const {
        throw std::invalid_argument("parse error at position " +
                                    std::to_string(pos_) + ": " + what);
    }

    void skip_ws() {
        while (pos_ < text_.size() &&
               std::isspace(static_cast<unsigned char>(text_[pos_])))
            ++pos_;
    }

    bool eat(char c) {
        skip_ws();
        if (pos_ < text_.size() && text_[pos_] == c) {
            ++pos_;
            return true;
        }
        return false;
    }

    char peek() {
        skip_ws();
        return pos_ < text_.size() ? text_[pos_] : '\0';
    }

    Polynomial expr() {
        Polynomial p = term();
        for (;;) {
            if (eat('+'))
                p = p + term();
            else if (eat('-'))
                p = p - term();
            else
                return p;
        }
    }

    Polynomial term() {
        Polynomial p = unary();
        for (;;) {
            skip_ws();
            if (eat('*'))
                p = p * unary();
            else if (peek() == '/')
                fail("division is not part of the polynomial grammar");
            else
                return p;
        }
    }

    Polynomial unary() {
        if (eat('-')) return -unary();
        if (eat('+')) return unary();
        return power();
    }

    Polynomial power() {
        Polynomial base = atom();
        if (eat('^')) {
            skip_ws();
            if (pos_ < text_.size() && (text_[pos_] == '-' || text_[pos_] == '+'))
                fail("exponent must be a non-negative integer");
            std::size_t start = pos_;
            while (pos_ < text_.size() &&
                   std::isdigit(static_cast<unsigned char>(text_[pos_])))
                ++pos_;
            if (pos_ == start) fail("exponent must be a non-negative integer");
            if (pos_ < text_.size() && text_[pos_] == '.')
                fail("exponent must be an integer");
            unsigned e = 0;
            for (std::size_t i = start; i < pos_; ++i) {
                e = e * 10 + unsigned(text_[i] - '0');
                if (e > 1000) fail("exponent too large");
            }
            return base.pow(e);
        }
        return base;
    }

    Polynomial atom() {
        skip_ws();
        if (pos_ >= text_.size()) fail("unexpected end of input");
        const char c = text_[pos_];
        if (c == '(') {
            ++pos_;
            Polynomial p = expr();
            if (!eat(')')) fail("missing ')'");
            return p;
        }
        if (std::isdigit(static_cast<unsigned char>(c)) || c == '.')
            return number();
        if (std::isalpha(static_cast<unsigned char>(c)) || c == '_')
            return identifier();
        fail(std::string("unexpected character '") + c + "'");
    }

    Polynomial number() {
        std::size_t start = pos_;
        while (pos_ < text_.size() &&
               std::isdigit(static_cast<unsigned char>(text_[pos_])))
            ++pos_;
        if (pos_ < text_.size() && text_[pos_] == '.') {
            ++pos_;
            while (pos_ < text_.size() &&
                   std::isdigit(static_cast<unsigned char>(text_[pos_])))
                ++pos_;
        }
        if (pos_ < text_.size() && (text_[pos_] == 'e' || text_[pos_] == 'E')) {
            std::size_t mark = pos_;
            ++pos_;
            if (pos_ < text_.size() && (text_[pos_] == '+' || text_[pos_] == '-'))
                ++pos_;
            if (pos_ < text_.size() &&
                std::isdigit(static_cast<unsigned char>(text_[pos_]))) {
                while (pos_ < text_.size() &&
                       std::isdigit(static_cast<unsigned char>(text_[pos_])))
                    ++pos_;
            } else {
                pos_ = mark; // 'e' belongs to an identifier, not this literal
            }
        }
        const std::string lit(text_.substr(start, pos_ - start));
        try {
            return Polynomial::constant(reg_, std::stod(lit));
        } catch (const std::exception&) {
            fail("bad numeric literal '" + lit + "'");
        }
    }

    Polynomial identifier() {
        std::size_t start = pos_;
        while (pos_ < text_.size() &&
               (std::isalnum(static_cast<unsigned char>(text_[pos_])) ||
                text_[pos_] == '_'))
            ++pos_;
        const std::string name(text_.substr(start, pos_ - start));
        auto idx = reg_->find(name);
        if (!idx) fail("unknown identifier '" + name + "'");
        return Polynomial::variable(reg_, *idx);
    }

    std::string_view text_;
    const RegistryPtr& reg_;
    std::size_t pos_ = 0;
};

} // namespace

Polynomial Polynomial::parse(std::string_view text, const RegistryPtr& reg) {
    return Parser(text, reg).run();
}

// ------------------------------------------------------------------ output

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string Polynomial::to_string() const {
    if (terms_.empty()) return "0";
    std::string out;
    for (const auto& [m, c] : terms_) {
        const bool neg = c < 0.0;
        const double mag = std::abs(c);
        if (out.empty())
            out += neg ? "-" : "";
        else
            out += neg ? " - " : " + ";
        std::string mono;
        for (std::size_t v = 0; v < m.exps.size(); ++v) {
            if (m.exps[v] == 0) continue;
            if (!mono.empty()) mono += "*";
            mono += reg_->name(v);
            if (m.exps[v] > 1) mono += "^" + std::to_string(m.exps[v]);
        }
        if (mono.empty()) {
            out += format_double(mag);
        } else if (mag == 1.0) {
            out += mono;
        } else {
            out += format_double(mag) + "*" + mono;
        }
    }
    return out;
}

// ------------------------------------------------------------------- basis

namespace {

void enumerate_graded(const std::vector<std::size_t>& vars, std::size_t nvars,
                      unsigned target, std::size_t pos, Monomial& work,
                      std::vector<Monomial>& out) {
    if (pos + 1 == vars.size()) {
        work.exps[vars[pos]] = target;
        out.push_back(work);
        work.exps[vars[pos]] = 0;
        return;
    }
    for (unsigned e = target; e + 1 != 0; --e) {
        work.exps[vars[pos]] = e;
        enumerate_graded(vars, nvars, target - e, pos + 1, work, out);
    }
    work.exps[vars[pos]] = 0;
}

} // namespace

std::vector<Monomial> monomial_basis(const RegistryPtr& reg,
                                     std::span<const std::size_t> vars,
                                     unsigned d) {
    std::vector<std::size_t> vs(vars.begin(), vars.end());
    for (auto v : vs)
        if (v >= reg->size())
            throw std::invalid_argument("monomial_basis: variable out of range");
    std::vector<Monomial> out;
    Monomial work(reg->size());
    if (vs.empty()) {
        out.push_back(work);
        return out;
    }
    for (unsigned deg = 0; deg <= d; ++deg)
        enumerate_graded(vs, reg->size(), deg, 0, work, out);
    return out;
}

double binomial(unsigned n, unsigned k) {
    if (k > n) return 0.0;
    k = std::min(k, n - k);
    double r = 1.0;
    for (unsigned i = 1; i <= k; ++i) r = r * double(n - k + i) / double(i);
    return std::round(r);
}

} // namespace obsyn
