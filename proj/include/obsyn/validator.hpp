#pragma once

#include "obsyn/certificate.hpp"
#include "obsyn/observer.hpp"

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace obsyn {

struct ValidatorSettings {
    int steps = 1000;      // RK4 steps over the scaled horizon [0, 1]
    int x0_per_dim = 25;   // lattice resolution inside X
    int e_count = 41;      // error-grid size (per dim for boxes, total for
                           // polar-sampled balls)
    int l_count = 41;      // gain-grid size, same convention
    std::uint64_t seed = 1;
    unsigned threads = 1;
};

/// Deterministic sample cloud with per-point measure weights.
struct SamplePoints {
    std::vector<std::size_t> vars;            // registry indices
    std::vector<std::vector<double>> coords;  // per point, vars order
    std::vector<double> weights;              // quadrature weights
    std::string scheme;                       // "cartesian" or "polar"
};

/// Sampled ground truth: admissible(e0, l) bits under the exact
/// quantifier (a gain is admissible at e0 when EVERY sampled initial
/// system state is driven into E_T at the horizon), plus per-gain
/// feasible-error counts and Lebesgue measure estimates.
struct ValidationReport {
    SamplePoints e0, gains, x0;
    std::vector<std::uint8_t> admissible; // [li * |e0| + ei]
    std::vector<int> feasible_counts;     // per gain
    std::vector<double> measure_estimates;
    std::vector<std::size_t> best_gains;  // gains maximizing feasible count
    int blowups = 0;
    bool x_independent_error = false;     // g has no x terms: one x0 suffices
    std::size_t x0_used = 0;
    ValidatorSettings settings;
    std::uint64_t problem_fingerprint = 0;

    bool admissible_at(std::size_t li, std::size_t ei) const {
        return admissible[li * e0.coords.size() + ei] != 0;
    }
};

/// Classical fixed-step RK4 over the scaled time interval [0, 1].
/// z0 = (x, e) stacked (2n), gains flattened row-major. Throws when the
/// state becomes non-finite (message carries the step index).
std::vector<double> integrate(const AugmentedField& phi,
                              std::span<const double> z0,
                              std::span<const double> gains, int steps);

/// True when every provided x0 drives the terminal error into E_T
/// (boundary tolerance 1e-9). Trajectories leaving a 10x inflated
/// bounding box of X x E abort early and count as not admissible.
bool admissible(const ObserverProblem& p, std::span<const double> gains,
                std::span<const double> e0,
                const std::vector<std::vector<double>>& x0_samples, int steps,
                int* blowups = nullptr);

/// Full deterministic sweep over the configured grids.
ValidationReport ground_truth(const ObserverProblem& p,
                              const ValidatorSettings& s);

/// Sampled admissible pairs whose certificate value falls below
/// 1 - 1e-6; empty means the outer approximation holds on the samples.
struct ContainmentViolation {
    std::size_t gain_index, e0_index;
    double w_value;
};
std::vector<ContainmentViolation>
containment_check(const Certificate& cert, const ObserverProblem& p,
                  const ValidationReport& report);

void export_report_csv(const std::string& path, const ValidationReport& r);
std::string report_summary_json(const ValidationReport& r);

/// Deterministic sample clouds (exposed for tests and the CLI).
SamplePoints cartesian_samples(const SemialgebraicSet& set, int per_dim);
SamplePoints polar_samples(const SemialgebraicSet& ball, int total);
SamplePoints x0_lattice(const SemialgebraicSet& X, int per_dim);

} // namespace obsyn
