#pragma once

#include "obsyn/certificate.hpp"
#include "obsyn/semialg.hpp"

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace obsyn {

/// Uniform tensor grid over a set's bounding box, endpoints included,
/// with a membership mask from the set inequalities. Axis j has
/// counts[j] >= 2 nodes and spacing deltas[j] = span_j / (counts[j]-1)
/// (a single-node axis is allowed for degenerate exports and carries
/// spacing 0).
struct GridSpec {
    RegistryPtr registry;
    std::vector<std::size_t> vars;
    std::vector<int> counts;
    std::vector<double> lo, hi, deltas;
    std::vector<std::uint8_t> mask; // 1 = inside the set

    static GridSpec cartesian(const SemialgebraicSet& set,
                              std::span<const int> counts);
    static GridSpec cartesian(const SemialgebraicSet& set, int per_dim);

    std::size_t size() const;
    std::size_t masked_count() const;
    /// Coordinates of a flat index (first axis slowest).
    std::vector<double> coords(std::size_t flat) const;
    /// Registry-wide point (non-grid variables zero).
    std::vector<double> point(std::size_t flat) const;
    double cell_volume() const;
    /// Conservative measure slack of one grid layer:
    /// sum_j delta_j * 2 * prod_{i != j} span_i.
    double layer_slack() const;
};

struct GainRanking {
    GridSpec lgrid;
    unsigned k = 0;
    std::vector<int> egrid_counts;
    std::vector<double> beta;            // per l-grid flat index; NaN if masked out
    double max_beta = 0.0;
    std::vector<std::size_t> argmax;     // flat indices within the tie tolerance
    std::size_t selected_index = 0;
    std::vector<double> selected;        // l* coordinates
    std::string tie_break;               // how l* was chosen among ties
    std::string warning;                 // set when certificate residuals are high
};

/// w_d >= threshold mask over an arbitrary grid (typically E x L).
std::vector<std::uint8_t> superlevel_set(const Certificate& cert,
                                         const GridSpec& grid,
                                         double threshold = 1.0);

/// Grid quadrature of clamp(w_d, 0, 1)^k over E at a fixed gain:
///   beta(l) = prod_j delta_j * sum_{masked e} min(1, max(0, w(e,l)))^k
double beta(const Certificate& cert, std::span<const double> gain,
            const GridSpec& egrid, unsigned k);

/// Evaluates beta on every masked gain-grid point and selects the argmax;
/// ties within 1e-9*(1+max) are broken by smallest gain norm, then by
/// lexicographic coordinates.
GainRanking select_gains(const Certificate& cert, const GridSpec& lgrid,
                         const GridSpec& egrid, unsigned k,
                         unsigned threads = 1);

/// CSV writers (17 significant digits, header row).
/// Level-set schema: coordinates..., w, mask.  Gain schema:
/// coordinates..., mask, beta, argmax. A non-empty `gain` binds the gain
/// variables before evaluating w over an error-only grid.
void export_levelset_csv(const std::string& path, const Certificate& cert,
                         const GridSpec& grid,
                         std::span<const double> gain = {});
void export_gain_csv(const std::string& path, const GainRanking& ranking);

} // namespace obsyn
