#pragma once

#include "obsyn/poly.hpp"

#include <span>
#include <vector>

namespace obsyn {

enum class ShapeHint { box, ball, interval_time, generic };

/// Moment-capable building block of a set: an axis-aligned box or a
/// Euclidean ball over a subset of registry variables.
struct SetFactor {
    enum class Kind { box, ball } kind;
    std::vector<std::size_t> vars; // ascending registry indices
    std::vector<double> lower, upper; // box bounds
    std::vector<double> center;       // ball center
    double radius = 0.0;              // ball radius
};

/// Compact basic semialgebraic set {x | h_i(x) >= 0}. Every constructed
/// set carries a defining polynomial of the form R - |x|^2 so the SOS
/// hierarchy applied to it has the Archimedean property. Lebesgue moments
/// are available whenever the set is a product of boxes and balls.
class SemialgebraicSet {
public:
    SemialgebraicSet() = default; // empty set placeholder

    static SemialgebraicSet make_box(RegistryPtr reg,
                                     std::vector<std::size_t> vars,
                                     std::vector<double> lower,
                                     std::vector<double> upper);
    static SemialgebraicSet make_ball(RegistryPtr reg,
                                      std::vector<std::size_t> vars,
                                      std::vector<double> center,
                                      double radius);
    static SemialgebraicSet time_interval(RegistryPtr reg, std::size_t tvar,
                                          double t0 = 0.0, double t1 = 1.0);
    /// Generic set from raw inequalities; no moments available.
    static SemialgebraicSet from_inequalities(RegistryPtr reg,
                                              std::vector<std::size_t> vars,
                                              std::vector<Polynomial> ineqs);
    /// Product of sets over disjoint variables of the same registry.
    static SemialgebraicSet product(const SemialgebraicSet& a,
                                    const SemialgebraicSet& b);

    const RegistryPtr& registry() const { return reg_; }
    const std::vector<std::size_t>& vars() const { return vars_; }
    const std::vector<Polynomial>& inequalities() const { return ineqs_; }
    ShapeHint shape() const { return shape_; }
    const std::vector<SetFactor>& factors() const { return factors_; }

    bool has_moments() const { return !factors_.empty(); }
    std::size_t dim() const { return vars_.size(); }

    /// Exact integral of x^alpha over the set; alpha indexes vars() in
    /// order. Throws for sets without closed-form moments.
    double lebesgue_moment(std::span<const std::uint32_t> alpha) const;
    /// Same, with alpha given as a registry-wide monomial whose exponents
    /// outside vars() must be zero.
    double lebesgue_moment(const Monomial& m) const;
    double volume() const;

    /// Bounding interval of a set variable (factor-derived).
    double lower_bound(std::size_t var) const;
    double upper_bound(std::size_t var) const;

    /// Membership test: all inequalities >= -tol at the given registry-wide
    /// point (non-set coordinates are ignored by construction).
    bool contains(std::span<const double> point, double tol = 1e-9) const;

private:
    void add_archimedean();

    RegistryPtr reg_;
    std::vector<std::size_t> vars_;
    std::vector<Polynomial> ineqs_;
    ShapeHint shape_ = ShapeHint::generic;
    std::vector<SetFactor> factors_;
    std::vector<double> bbox_lo_, bbox_hi_; // per vars_ entry
};

/// Rewrites a set in affinely rescaled coordinates x_old = c + s * x_new
/// (per registry variable). Boxes stay boxes; balls stay balls when the
/// scale is uniform over their variables; anything else becomes a generic
/// set with substituted inequalities plus a fresh Archimedean bound.
SemialgebraicSet affine_rescale(const SemialgebraicSet& set,
                                std::span<const double> centers,
                                std::span<const double> scales);

/// Deterministic points on the boundary of a box/ball set (used for the
/// target-set containment check).
std::vector<std::vector<double>> boundary_points(const SemialgebraicSet& set,
                                                 std::size_t count);

} // namespace obsyn
