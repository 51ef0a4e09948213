#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace obsyn {

// Coefficients with absolute value below this are dropped when a
// polynomial is normalized; keeps float dust from inflating supports.
inline constexpr double kCoeffZeroTol = 1e-14;

/// Ordered set of variable names shared by a family of polynomials.
/// The order is fixed at creation and defines the monomial exponent slots.
class VariableRegistry {
public:
    static std::shared_ptr<const VariableRegistry>
    create(std::vector<std::string> names);

    std::size_t size() const { return names_.size(); }
    const std::string& name(std::size_t i) const { return names_.at(i); }
    const std::vector<std::string>& names() const { return names_; }
    std::optional<std::size_t> find(std::string_view n) const;
    /// Throws std::invalid_argument for unknown names.
    std::size_t index_of(std::string_view n) const;

private:
    explicit VariableRegistry(std::vector<std::string> names);
    std::vector<std::string> names_;
};

using RegistryPtr = std::shared_ptr<const VariableRegistry>;

/// Exponent vector with one slot per registry variable.
struct Monomial {
    std::vector<std::uint32_t> exps;

    Monomial() = default;
    explicit Monomial(std::size_t nvars) : exps(nvars, 0) {}

    unsigned degree() const {
        unsigned d = 0;
        for (auto e : exps) d += e;
        return d;
    }
    bool is_constant() const { return degree() == 0; }
    friend bool operator==(const Monomial& a, const Monomial& b) {
        return a.exps == b.exps;
    }
};

/// Graded lexicographic order: total degree first, then earlier-variable
/// powers rank first within a degree (1 < x1 < x2 < x1^2 < x1*x2 < x2^2).
struct GradedLexLess {
    bool operator()(const Monomial& a, const Monomial& b) const {
        const unsigned da = a.degree(), db = b.degree();
        if (da != db) return da < db;
        for (std::size_t i = 0; i < a.exps.size(); ++i)
            if (a.exps[i] != b.exps[i]) return a.exps[i] > b.exps[i];
        return false;
    }
};

/// Immutable sparse multivariate polynomial with real coefficients over a
/// shared registry. All operations return new values.
class Polynomial {
public:
    using TermMap = std::map<Monomial, double, GradedLexLess>;

    Polynomial() = default;

    static Polynomial zero(RegistryPtr reg);
    static Polynomial constant(RegistryPtr reg, double c);
    static Polynomial variable(RegistryPtr reg, std::size_t var);
    static Polynomial monomial(RegistryPtr reg, Monomial m, double c);
    static Polynomial from_terms(RegistryPtr reg, TermMap terms);

    /// Parses an infix expression over registered names with + - * ^ and
    /// parentheses; ^ takes non-negative integer exponents only.
    static Polynomial parse(std::string_view text, const RegistryPtr& reg);

    const RegistryPtr& registry() const { return reg_; }
    const TermMap& terms() const { return terms_; }
    bool is_zero() const { return terms_.empty(); }
    /// Max total degree over stored terms; 0 for the zero polynomial.
    unsigned degree() const;
    unsigned degree_in(std::size_t var) const;
    unsigned degree_in(std::span<const std::size_t> vars) const;
    double coeff(const Monomial& m) const;
    double constant_term() const;
    /// Indices of variables that appear with a positive exponent.
    std::vector<std::size_t> support_vars() const;
    std::size_t term_count() const { return terms_.size(); }

    Polynomial operator-() const;
    Polynomial operator+(const Polynomial& o) const;
    Polynomial operator-(const Polynomial& o) const;
    Polynomial operator*(const Polynomial& o) const;
    Polynomial scaled(double s) const;
    Polynomial pow(unsigned e) const;

    Polynomial differentiate(std::size_t var) const;
    /// Simultaneous substitution of variables by polynomials over the
    /// same registry.
    Polynomial substitute(const std::map<std::size_t, Polynomial>& b) const;
    Polynomial substitute_values(const std::map<std::size_t, double>& b) const;
    double evaluate(std::span<const double> point) const;

    /// Canonical display form: graded-lex term order, 17 significant
    /// digits; parse(to_string()) reproduces the polynomial exactly.
    std::string to_string() const;

    friend bool operator==(const Polynomial& a, const Polynomial& b);

private:
    Polynomial(RegistryPtr reg, TermMap terms);
    void require_same_registry(const Polynomial& o) const;

    RegistryPtr reg_;
    TermMap terms_;
};

inline Polynomial operator*(const Polynomial& p, double s) { return p.scaled(s); }
inline Polynomial operator*(double s, const Polynomial& p) { return p.scaled(s); }

/// All monomials in the chosen variables with total degree <= d, graded-lex
/// ordered. Size is C(|vars| + d, d).
std::vector<Monomial> monomial_basis(const RegistryPtr& reg,
                                     std::span<const std::size_t> vars,
                                     unsigned d);

/// Binomial coefficient as double (exact for the sizes used here).
double binomial(unsigned n, unsigned k);

/// Formats a double with 17 significant digits (round-trip exact).
std::string format_double(double v);

} // namespace obsyn
