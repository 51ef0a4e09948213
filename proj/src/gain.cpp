#include "obsyn/gain.hpp"

#include "obsyn/kernels.hpp"
#include "obsyn/util.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <stdexcept>

namespace obsyn {

namespace {

double pow_int(double x, unsigned k) {
    double r = 1.0;
    while (k) {
        if (k & 1) r *= x;
        x *= x;
        k >>= 1;
    }
    return r;
}

} // namespace

GridSpec GridSpec::cartesian(const SemialgebraicSet& set,
                             std::span<const int> counts) {
    if (counts.size() != set.vars().size())
        throw std::invalid_argument("grid: counts per set dimension required");
    GridSpec g;
    g.registry = set.registry();
    g.vars = set.vars();
    g.counts.assign(counts.begin(), counts.end());
    for (std::size_t j = 0; j < g.vars.size(); ++j) {
        if (g.counts[j] < 1) throw std::invalid_argument("grid: counts >= 1");
        g.lo.push_back(set.lower_bound(g.vars[j]));
        g.hi.push_back(set.upper_bound(g.vars[j]));
        g.deltas.push_back(g.counts[j] > 1
                               ? (g.hi[j] - g.lo[j]) / double(g.counts[j] - 1)
                               : 0.0);
    }
    g.mask.assign(g.size(), 0);
    std::vector<double> pt(g.registry->size(), 0.0);
    for (std::size_t f = 0; f < g.size(); ++f) {
        auto c = g.coords(f);
        for (std::size_t j = 0; j < g.vars.size(); ++j) pt[g.vars[j]] = c[j];
        g.mask[f] = set.contains(pt, 1e-9) ? 1 : 0;
    }
    return g;
}

GridSpec GridSpec::cartesian(const SemialgebraicSet& set, int per_dim) {
    std::vector<int> counts(set.vars().size(), per_dim);
    return cartesian(set, counts);
}

std::size_t GridSpec::size() const {
    std::size_t s = 1;
    for (int c : counts) s *= std::size_t(c);
    return s;
}

std::size_t GridSpec::masked_count() const {
    std::size_t s = 0;
    for (auto b : mask) s += b;
    return s;
}

std::vector<double> GridSpec::coords(std::size_t flat) const {
    std::vector<double> c(vars.size());
    for (std::size_t j = vars.size(); j-- > 0;) {
        const std::size_t idx = flat % std::size_t(counts[j]);
        flat /= std::size_t(counts[j]);
        c[j] = counts[j] > 1 ? lo[j] + deltas[j] * double(idx)
                             : 0.5 * (lo[j] + hi[j]);
    }
    return c;
}

std::vector<double> GridSpec::point(std::size_t flat) const {
    std::vector<double> p(registry->size(), 0.0);
    const auto c = coords(flat);
    for (std::size_t j = 0; j < vars.size(); ++j) p[vars[j]] = c[j];
    return p;
}

double GridSpec::cell_volume() const {
    double v = 1.0;
    for (double d : deltas) v *= d;
    return v;
}

double GridSpec::layer_slack() const {
    double s = 0.0;
    for (std::size_t j = 0; j < vars.size(); ++j) {
        double per = 2.0;
        for (std::size_t i = 0; i < vars.size(); ++i)
            if (i != j) per *= hi[i] - lo[i];
        s += deltas[j] * per;
    }
    return s;
}

namespace {

// Flattened term data of a polynomial restricted to grid variables, for
// the batched kernel evaluator.
struct TermData {
    std::vector<double> coefs;
    std::vector<std::uint8_t> exps; // nterms x nvars
    std::size_t nterms = 0, nvars = 0;
};

TermData flatten(const Polynomial& p, const std::vector<std::size_t>& vars) {
    TermData td;
    td.nvars = vars.size();
    for (const auto& [m, c] : p.terms()) {
        // polynomial must be supported on the grid variables
        for (std::size_t v = 0; v < m.exps.size(); ++v) {
            if (m.exps[v] == 0) continue;
            if (std::find(vars.begin(), vars.end(), v) == vars.end())
                throw std::invalid_argument(
                    "grid evaluation: polynomial uses variable '" +
                    p.registry()->name(v) + "' outside the grid");
        }
        td.coefs.push_back(c);
        for (auto v : vars) {
            if (m.exps[v] > 255)
                throw std::invalid_argument("grid evaluation: exponent > 255");
            td.exps.push_back(std::uint8_t(m.exps[v]));
        }
        ++td.nterms;
    }
    return td;
}

// coordinate arrays vals[v][p] over all grid points (or a subset)
std::vector<std::vector<double>> grid_coord_arrays(
    const GridSpec& g, const std::vector<std::size_t>& subset) {
    std::vector<std::vector<double>> vals(g.vars.size());
    for (auto& v : vals) v.resize(subset.size());
    for (std::size_t i = 0; i < subset.size(); ++i) {
        const auto c = g.coords(subset[i]);
        for (std::size_t j = 0; j < g.vars.size(); ++j) vals[j][i] = c[j];
    }
    return vals;
}

std::vector<std::size_t> all_indices(const GridSpec& g) {
    std::vector<std::size_t> idx(g.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    return idx;
}

std::vector<std::size_t> masked_indices(const GridSpec& g) {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < g.size(); ++i)
        if (g.mask[i]) idx.push_back(i);
    return idx;
}

void eval_on(const TermData& td,
             const std::vector<std::vector<double>>& vals,
             std::vector<double>& out) {
    const std::size_t width = vals.empty() ? 0 : vals[0].size();
    out.assign(width, 0.0);
    if (td.nterms == 0 || width == 0) return;
    std::vector<const double*> ptrs;
    for (const auto& v : vals) ptrs.push_back(v.data());
    kern::eval_terms(td.coefs.data(), td.exps.data(), td.nterms, td.nvars,
                     ptrs.data(), out.data(), width);
}

} // namespace

std::vector<std::uint8_t> superlevel_set(const Certificate& cert,
                                         const GridSpec& grid,
                                         double threshold) {
    const auto idx = all_indices(grid);
    const auto vals = grid_coord_arrays(grid, idx);
    const TermData td = flatten(cert.w, grid.vars);
    std::vector<double> w;
    eval_on(td, vals, w);
    std::vector<std::uint8_t> out(grid.size(), 0);
    for (std::size_t i = 0; i < out.size(); ++i)
        out[i] = w[i] >= threshold ? 1 : 0;
    return out;
}

namespace {

// w with the gain variables bound to numbers; returns the term data of the
// resulting polynomial in the e-grid variables. Gain variables are the
// registry slots after the last error variable (fixed registry layout
// t, x.., e.., l..).
TermData bind_gains(const Certificate& cert, const GridSpec& egrid,
                    std::span<const double> gain) {
    const auto& reg = cert.w.registry();
    std::size_t first_gain = 0;
    for (auto v : egrid.vars) first_gain = std::max(first_gain, v + 1);
    if (reg->size() - first_gain != gain.size())
        throw std::invalid_argument("beta: gain dimension mismatch");
    std::map<std::size_t, double> binding;
    for (std::size_t i = 0; i < gain.size(); ++i)
        binding[first_gain + i] = gain[i];
    Polynomial bound = cert.w.substitute_values(binding);
    return flatten(bound, egrid.vars);
}

} // namespace

double beta(const Certificate& cert, std::span<const double> gain,
            const GridSpec& egrid, unsigned k) {
    if (k < 1) throw std::invalid_argument("beta: k must be >= 1");
    for (int c : egrid.counts)
        if (c < 2)
            throw std::invalid_argument("beta: grid needs >= 2 nodes per axis");
    const auto idx = masked_indices(egrid);
    const auto vals = grid_coord_arrays(egrid, idx);
    const TermData td = bind_gains(cert, egrid, gain);
    std::vector<double> w;
    eval_on(td, vals, w);
    double sum = 0.0;
    for (double v : w) {
        if (v >= 1.0)
            sum += 1.0;
        else if (v > 0.0)
            sum += pow_int(v, k);
    }
    return egrid.cell_volume() * sum;
}

GainRanking select_gains(const Certificate& cert, const GridSpec& lgrid,
                         const GridSpec& egrid, unsigned k, unsigned threads) {
    GainRanking r;
    r.lgrid = lgrid;
    r.k = k;
    r.egrid_counts = egrid.counts;
    r.beta.assign(lgrid.size(), std::numeric_limits<double>::quiet_NaN());

    double max_res = 0.0;
    for (double v : cert.reconstruction_residuals)
        max_res = std::max(max_res, std::abs(v));
    if (max_res > 1e-6)
        r.warning = "certificate reconstruction residual " +
                    format_double(max_res) + " exceeds 1e-6";

    const auto lidx = masked_indices(lgrid);
    if (lidx.empty())
        throw std::invalid_argument(
            "select_gains: gain grid is empty after masking");

    // shared read-only evaluation inputs per gain point
    const auto eidx = masked_indices(egrid);
    const auto evals = grid_coord_arrays(egrid, eidx);
    const double cellvol = egrid.cell_volume();
    for (int c : egrid.counts)
        if (c < 2)
            throw std::invalid_argument(
                "select_gains: e-grid needs >= 2 nodes per axis");

    parallel_for(lidx.size(), threads, [&](std::size_t i) {
        const auto gain = lgrid.coords(lidx[i]);
        const TermData td = bind_gains(cert, egrid, gain);
        std::vector<double> w;
        eval_on(td, evals, w);
        double sum = 0.0;
        for (double v : w) {
            if (v >= 1.0)
                sum += 1.0;
            else if (v > 0.0)
                sum += pow_int(v, k);
        }
        r.beta[lidx[i]] = cellvol * sum;
    });

    r.max_beta = 0.0;
    for (auto f : lidx) r.max_beta = std::max(r.max_beta, r.beta[f]);
    const double tie = 1e-9 * (1.0 + r.max_beta);
    for (auto f : lidx)
        if (r.beta[f] >= r.max_beta - tie) r.argmax.push_back(f);

    // tie-break: smallest Euclidean norm, then lexicographic coordinates
    auto norm2 = [&](std::size_t f) {
        double s = 0.0;
        for (double c : lgrid.coords(f)) s += c * c;
        return s;
    };
    std::size_t best = r.argmax.front();
    for (auto f : r.argmax) {
        const double nf = norm2(f), nb = norm2(best);
        if (nf < nb - 1e-15) {
            best = f;
        } else if (std::abs(nf - nb) <= 1e-15 &&
                   lgrid.coords(f) < lgrid.coords(best)) {
            best = f;
        }
    }
    r.selected_index = best;
    r.selected = lgrid.coords(best);
    r.tie_break = r.argmax.size() > 1
                      ? "smallest gain norm, then lexicographic coordinates"
                      : "unique maximizer";
    return r;
}

void export_levelset_csv(const std::string& path, const Certificate& cert,
                         const GridSpec& grid,
                         std::span<const double> gain) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path);
    const auto idx = all_indices(grid);
    const auto vals = grid_coord_arrays(grid, idx);
    const TermData td = gain.empty() ? flatten(cert.w, grid.vars)
                                     : bind_gains(cert, grid, gain);
    std::vector<double> w;
    eval_on(td, vals, w);
    for (std::size_t j = 0; j < grid.vars.size(); ++j)
        out << grid.registry->name(grid.vars[j]) << ",";
    out << "w,mask\n";
    for (std::size_t i = 0; i < grid.size(); ++i) {
        for (std::size_t j = 0; j < grid.vars.size(); ++j)
            out << format_double(vals[j][i]) << ",";
        out << format_double(w[i]) << "," << int(grid.mask[i]) << "\n";
    }
}

void export_gain_csv(const std::string& path, const GainRanking& r) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path);
    const auto& g = r.lgrid;
    std::vector<std::uint8_t> is_arg(g.size(), 0);
    for (auto f : r.argmax) is_arg[f] = 1;
    for (std::size_t j = 0; j < g.vars.size(); ++j)
        out << g.registry->name(g.vars[j]) << ",";
    out << "mask,beta,argmax\n";
    for (std::size_t i = 0; i < g.size(); ++i) {
        const auto c = g.coords(i);
        for (double v : c) out << format_double(v) << ",";
        out << int(g.mask[i]) << "," << format_double(r.beta[i]) << ","
            << int(is_arg[i]) << "\n";
    }
}

} // namespace obsyn
