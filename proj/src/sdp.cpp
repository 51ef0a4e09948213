#include "obsyn/sdp.hpp"

#include "obsyn/kernels.hpp"
#include "obsyn/poly.hpp" // format_double

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <numeric>
#include <set>
#include <sstream>
#include <stdexcept>

namespace obsyn {

const char* status_name(SolveStatus s) {
    switch (s) {
        case SolveStatus::optimal: return "optimal";
        case SolveStatus::infeasible: return "infeasible";
        case SolveStatus::unbounded: return "unbounded";
        case SolveStatus::max_iter: return "max_iter";
        case SolveStatus::numerical_failure: return "numerical_failure";
    }
    return "unknown";
}

void SdpProblem::validate() const {
    auto check_entry = [&](const BlockEntry& e, const char* where) {
        if (e.block < 0 || e.block >= int(psd_blocks.size()))
            throw std::invalid_argument(std::string(where) +
                                        ": block index out of range");
        const int d = psd_blocks[e.block];
        if (e.i < 0 || e.j < e.i || e.j >= d)
            throw std::invalid_argument(std::string(where) +
                                        ": bad entry indices (need 0<=i<=j<dim)");
        if (!std::isfinite(e.value))
            throw std::invalid_argument(std::string(where) +
                                        ": non-finite value");
    };
    for (int d : psd_blocks)
        if (d <= 0) throw std::invalid_argument("non-positive block dimension");
    if (num_free < 0) throw std::invalid_argument("negative free count");
    for (const auto& r : rows) {
        if (!std::isfinite(r.rhs))
            throw std::invalid_argument("non-finite right-hand side");
        for (const auto& e : r.mat_terms) check_entry(e, "equality");
        for (const auto& [j, c] : r.free_terms) {
            if (j < 0 || j >= num_free)
                throw std::invalid_argument("equality: free index out of range");
            if (!std::isfinite(c))
                throw std::invalid_argument("equality: non-finite coefficient");
        }
    }
    for (const auto& e : obj_mat) check_entry(e, "objective");
    for (const auto& [j, c] : obj_free) {
        if (j < 0 || j >= num_free)
            throw std::invalid_argument("objective: free index out of range");
        if (!std::isfinite(c))
            throw std::invalid_argument("objective: non-finite coefficient");
    }
}

namespace {

using la::Mat;

double inner_sym(const std::vector<BlockEntry>& es, const Mat& x, int block) {
    double s = 0.0;
    for (const auto& e : es) {
        if (e.block != block) continue;
        s += e.value * (e.i == e.j ? x(e.i, e.i) : 2.0 * x(e.i, e.j));
    }
    return s;
}

// <A, W> for a possibly non-symmetric W
double inner_asym(const std::vector<BlockEntry>& es, const Mat& w) {
    double s = 0.0;
    for (const auto& e : es)
        s += e.value *
             (e.i == e.j ? w(e.i, e.i) : w(e.i, e.j) + w(e.j, e.i));
    return s;
}

void add_sym(Mat& a, const std::vector<BlockEntry>& es, double c) {
    for (const auto& e : es) {
        a(e.i, e.j) += c * e.value;
        if (e.i != e.j) a(e.j, e.i) += c * e.value;
    }
}

double frob_norm(const std::vector<BlockEntry>& es) {
    double s = 0.0;
    for (const auto& e : es)
        s += e.value * e.value * (e.i == e.j ? 1.0 : 2.0);
    return std::sqrt(s);
}

struct Structure {
    int m = 0, nf = 0, nblocks = 0;
    std::vector<int> dims;
    // entries grouped per (row, block)
    std::vector<std::vector<std::vector<BlockEntry>>> row_block; // [row][k]=list
    std::vector<std::vector<int>> block_rows;                    // [k]=rows
    std::vector<std::vector<std::pair<int, double>>> free_cols;  // [col]=(row,c)
    // connected components of rows linked through shared blocks
    int ncomp = 0;
    std::vector<int> row_comp, row_local;
    std::vector<std::vector<int>> comp_rows, comp_blocks, comp_cols;
    std::vector<int> col_comp_pos; // scratch: position of col in comp_cols
};

Structure build_structure(const SdpProblem& p) {
    Structure st;
    st.m = int(p.rows.size());
    st.nf = p.num_free;
    st.nblocks = int(p.psd_blocks.size());
    st.dims = p.psd_blocks;

    st.row_block.assign(st.m, {});
    st.block_rows.assign(st.nblocks, {});
    for (int r = 0; r < st.m; ++r) {
        st.row_block[r].assign(st.nblocks, {});
        for (const auto& e : p.rows[r].mat_terms)
            st.row_block[r][e.block].push_back(e);
        for (int k = 0; k < st.nblocks; ++k)
            if (!st.row_block[r][k].empty()) st.block_rows[k].push_back(r);
    }

    st.free_cols.assign(st.nf, {});
    for (int r = 0; r < st.m; ++r)
        for (const auto& [j, c] : p.rows[r].free_terms)
            st.free_cols[j].emplace_back(r, c);
    for (int j = 0; j < st.nf; ++j)
        if (st.free_cols[j].empty())
            throw std::invalid_argument(
                "solve: free variable " + std::to_string(j) +
                " appears in no equality (problem is ill-posed)");
    for (int r = 0; r < st.m; ++r) {
        bool any = !p.rows[r].mat_terms.empty();
        if (!any)
            throw std::invalid_argument(
                "solve: equality row " + std::to_string(r) +
                " touches no PSD block (unsupported problem class)");
    }

    // union-find over rows
    std::vector<int> parent(st.m);
    std::iota(parent.begin(), parent.end(), 0);
    std::function<int(int)> find = [&](int a) {
        while (parent[a] != a) a = parent[a] = parent[parent[a]];
        return a;
    };
    for (int k = 0; k < st.nblocks; ++k) {
        const auto& rows = st.block_rows[k];
        for (std::size_t i = 1; i < rows.size(); ++i) {
            int a = find(rows[0]), b = find(rows[i]);
            if (a != b) parent[std::max(a, b)] = std::min(a, b);
        }
    }
    std::map<int, int> root_to_comp;
    st.row_comp.assign(st.m, -1);
    for (int r = 0; r < st.m; ++r) {
        const int root = find(r);
        auto [it, fresh] = root_to_comp.emplace(root, int(root_to_comp.size()));
        st.row_comp[r] = it->second;
    }
    st.ncomp = int(root_to_comp.size());
    st.comp_rows.assign(st.ncomp, {});
    st.row_local.assign(st.m, -1);
    for (int r = 0; r < st.m; ++r) {
        st.row_local[r] = int(st.comp_rows[st.row_comp[r]].size());
        st.comp_rows[st.row_comp[r]].push_back(r);
    }
    st.comp_blocks.assign(st.ncomp, {});
    for (int k = 0; k < st.nblocks; ++k)
        if (!st.block_rows[k].empty())
            st.comp_blocks[st.row_comp[st.block_rows[k][0]]].push_back(k);
    st.comp_cols.assign(st.ncomp, {});
    for (int j = 0; j < st.nf; ++j) {
        std::set<int> comps;
        for (const auto& [r, c] : st.free_cols[j]) comps.insert(st.row_comp[r]);
        for (int c : comps) st.comp_cols[c].push_back(j);
    }
    return st;
}

struct Iterate {
    std::vector<Mat> X, S;
    std::vector<double> y, lam;
};

struct Residual {
    std::vector<double> rp;  // primal
    std::vector<Mat> Rd;     // dual per block
    std::vector<double> rf;  // free dual
    double pinf = 0, dinf = 0, relgap = 0, pobj = 0, dobj = 0, mu = 0;
};

Residual compute_residuals(const SdpProblem& p, const Structure& st,
                           const Iterate& it) {
    Residual rs;
    rs.rp.assign(st.m, 0.0);
    for (int r = 0; r < st.m; ++r) {
        double ax = 0.0;
        for (int k = 0; k < st.nblocks; ++k)
            if (!st.row_block[r][k].empty())
                ax += inner_sym(st.row_block[r][k], it.X[k], k);
        for (const auto& [j, c] : p.rows[r].free_terms) ax += c * it.y[j];
        rs.rp[r] = p.rows[r].rhs - ax;
        rs.pinf = std::max(rs.pinf, std::abs(rs.rp[r]));
    }
    rs.Rd.clear();
    for (int k = 0; k < st.nblocks; ++k)
        rs.Rd.emplace_back(st.dims[k], st.dims[k]);
    for (const auto& e : p.obj_mat) {
        rs.Rd[e.block](e.i, e.j) += e.value;
        if (e.i != e.j) rs.Rd[e.block](e.j, e.i) += e.value;
    }
    for (int k = 0; k < st.nblocks; ++k) {
        Mat& rd = rs.Rd[k];
        for (int a = 0; a < st.dims[k]; ++a)
            for (int b = 0; b < st.dims[k]; ++b) rd(a, b) -= it.S[k](a, b);
        for (int r : st.block_rows[k]) add_sym(rd, st.row_block[r][k], -it.lam[r]);
        rs.dinf = std::max(rs.dinf, la::max_abs(rd));
    }
    rs.rf.assign(st.nf, 0.0);
    for (int j = 0; j < st.nf; ++j) {
        double s = 0.0;
        for (const auto& [r, c] : st.free_cols[j]) s += c * it.lam[r];
        rs.rf[j] = -s;
    }
    for (const auto& [j, c] : p.obj_free) rs.rf[j] += c;
    for (double v : rs.rf) rs.dinf = std::max(rs.dinf, std::abs(v));

    rs.pobj = 0.0;
    for (const auto& e : p.obj_mat)
        rs.pobj += e.value * (e.i == e.j ? it.X[e.block](e.i, e.i)
                                         : 2.0 * it.X[e.block](e.i, e.j));
    for (const auto& [j, c] : p.obj_free) rs.pobj += c * it.y[j];
    rs.dobj = 0.0;
    for (int r = 0; r < st.m; ++r) rs.dobj += p.rows[r].rhs * it.lam[r];
    rs.relgap = std::abs(rs.pobj - rs.dobj) /
                (1.0 + std::abs(rs.pobj) + std::abs(rs.dobj));

    double trace = 0.0;
    int dimsum = 0;
    for (int k = 0; k < st.nblocks; ++k) {
        trace += kern::dot(it.X[k].data(), it.S[k].data(),
                           std::size_t(st.dims[k]) * st.dims[k]);
        dimsum += st.dims[k];
    }
    rs.mu = dimsum > 0 ? trace / dimsum : 0.0;
    return rs;
}

// largest alpha in (0, 1] with M + alpha*D staying PSD, given chol(M) = L
double step_to_boundary(const Mat& l, const Mat& d) {
    const std::size_t n = l.rows;
    Mat t1 = d;
    kern::trsm_lower(l.data(), n, t1.data(), n);
    // transpose and forward-solve again: B = L^{-1} D L^{-T}
    Mat t1t(n, n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) t1t(i, j) = t1(j, i);
    kern::trsm_lower(l.data(), n, t1t.data(), n);
    // symmetrize against roundoff
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) {
            const double v = 0.5 * (t1t(i, j) + t1t(j, i));
            t1t(i, j) = t1t(j, i) = v;
        }
    const double lmin = la::sym_min_eig(t1t);
    if (lmin >= -1e-14) return 1.0;
    return std::min(1.0, -1.0 / lmin);
}

std::string iter_line(int it, double mu, double ap, double ad, double pinf,
                      double dinf, double gap, bool accepted) {
    char buf[192];
    std::snprintf(buf, sizeof buf,
                  "it %3d  mu %.6e  ap %.3f ad %.3f  pinf %.3e dinf %.3e "
                  "gap %.3e  %s\n",
                  it, mu, ap, ad, pinf, dinf, gap,
                  accepted ? "accepted" : "rejected");
    return buf;
}

} // namespace

SdpSolution solve(const SdpProblem& p, const SdpSolveOptions& opts) {
    p.validate();
    SdpSolution sol;
    const int m = int(p.rows.size());

    // trivial no-equality case: X = 0 is optimal iff every C_k is PSD
    if (m == 0) {
        if (p.num_free > 0)
            throw std::invalid_argument(
                "solve: free variables without equalities");
        sol.iterations = 0;
        bool psd = true;
        for (std::size_t k = 0; k < p.psd_blocks.size(); ++k) {
            Mat c(p.psd_blocks[k], p.psd_blocks[k]);
            for (const auto& e : p.obj_mat)
                if (int(k) == e.block) {
                    c(e.i, e.j) += e.value;
                    if (e.i != e.j) c(e.j, e.i) += e.value;
                }
            if (la::sym_min_eig(c) < -1e-12) psd = false;
            sol.block_matrices.emplace_back(p.psd_blocks[k], p.psd_blocks[k]);
            sol.dual_blocks.push_back(std::move(c));
        }
        sol.status = psd ? SolveStatus::optimal : SolveStatus::unbounded;
        return sol;
    }

    // row equilibration: scale each equality to unit max coefficient; the
    // duals are mapped back when the solution is assembled
    SdpProblem ps = p;
    std::vector<double> row_scale(ps.rows.size(), 1.0);
    for (std::size_t r = 0; r < ps.rows.size(); ++r) {
        double mx = 0.0;
        for (const auto& e : ps.rows[r].mat_terms)
            mx = std::max(mx, std::abs(e.value));
        for (const auto& [j, c] : ps.rows[r].free_terms)
            mx = std::max(mx, std::abs(c));
        if (mx < 1e-8) mx = 1.0;
        row_scale[r] = mx;
        const double inv = 1.0 / mx;
        for (auto& e : ps.rows[r].mat_terms) e.value *= inv;
        for (auto& [j, c] : ps.rows[r].free_terms) c *= inv;
        ps.rows[r].rhs *= inv;
    }

    const Structure st = build_structure(ps);
    const int nf = st.nf;

    // ------------------------------------------------------ starting point
    Iterate it;
    double bmax = 0.0;
    for (const auto& r : ps.rows) bmax = std::max(bmax, std::abs(r.rhs));
    std::vector<double> cfrob(st.nblocks, 0.0); // per-block objective norm
    for (const auto& e : ps.obj_mat)
        cfrob[e.block] += e.value * e.value * (e.i == e.j ? 1.0 : 2.0);
    for (int k = 0; k < st.nblocks; ++k) {
        const int n = st.dims[k];
        double amax = 0.0;
        double xi = std::max(10.0, std::sqrt(double(n)));
        for (int r : st.block_rows[k]) {
            const double af = frob_norm(st.row_block[r][k]);
            amax = std::max(amax, af);
            xi = std::max(xi, double(n) * (1.0 + std::abs(ps.rows[r].rhs)) /
                                  (1.0 + af));
        }
        const double eta = std::max(
            {10.0, std::sqrt(double(n)), std::sqrt(cfrob[k]), amax});
        Mat X(n, n), S(n, n);
        for (int d = 0; d < n; ++d) {
            X(d, d) = xi;
            S(d, d) = eta;
        }
        it.X.push_back(std::move(X));
        it.S.push_back(std::move(S));
    }
    it.y.assign(nf, 0.0);
    it.lam.assign(m, 0.0);

    // per-component Schur workspaces (allocated once)
    std::vector<Mat> M(st.ncomp), Z(st.ncomp);
    for (int c = 0; c < st.ncomp; ++c) {
        const std::size_t mc = st.comp_rows[c].size();
        M[c] = Mat(mc, mc);
        Z[c] = Mat(mc, st.comp_cols[c].size());
    }
    Mat G(nf, nf);

    Residual rs = compute_residuals(ps, st, it);
    std::ostringstream log;
    if (opts.want_log)
        log << "obsyn sdp: m=" << m << " nf=" << nf
            << " blocks=" << st.nblocks << " comps=" << st.ncomp << "\n";

    const double tol = opts.tol;

    // best-iterate tracking: interior-point accuracy is not monotone once
    // the Schur system conditioning approaches 1/mu^2, so keep the iterate
    // with the best combined score and report that one
    auto score_of = [&](const Residual& r) {
        return std::max({r.pinf / tol, r.dinf / tol, r.relgap / (10.0 * tol)});
    };
    Iterate best_it = it;
    Residual best_rs = rs;
    double best_score = score_of(rs);

    auto finalize = [&](SolveStatus status, const std::string& detail) {
        sol.status = status;
        sol.failure_detail = detail;
        sol.free_values = best_it.y;
        sol.block_matrices = best_it.X;
        sol.dual_blocks = best_it.S;
        sol.equality_duals = best_it.lam;
        for (std::size_t r = 0; r < sol.equality_duals.size(); ++r)
            sol.equality_duals[r] /= row_scale[r];
        sol.primal_objective = best_rs.pobj;
        sol.dual_objective = best_rs.dobj;
        sol.residuals = residuals(p, sol);
        sol.log = log.str();
        return sol;
    };
    auto settle = [&](int iters) {
        sol.iterations = iters;
        finalize(SolveStatus::max_iter, "");
        if (sol.residuals.primal_eq <= tol && sol.residuals.dual <= tol &&
            sol.residuals.gap <= 10.0 * tol) {
            sol.status = SolveStatus::optimal;
            sol.failure_detail.clear();
        } else {
            sol.failure_detail = "tolerances not met";
        }
        return sol;
    };

    int stall = 0;
    double prev_mu = rs.mu;

    int iter = 0;
    for (; iter < opts.max_iter; ++iter) {
        // convergence check: stop on a very tight iterate, or once the
        // iterates degrade well past the best one seen
        if (best_score <= 1e-2) break;
        if (score_of(rs) > 1e4 * (best_score + 1e-3)) break;
        if (rs.mu < 1e-30) break;

        // divergence heuristics
        double lam_max = 0.0;
        for (double v : it.lam) lam_max = std::max(lam_max, std::abs(v));
        if (lam_max > 1e9 * (1.0 + bmax) && rs.pinf > 10.0 * tol) {
            sol.iterations = iter;
            return finalize(SolveStatus::infeasible,
                            "dual variables diverged with primal residual "
                            "bounded away from zero");
        }
        if (rs.pobj < -1e10 * (1.0 + bmax) && rs.dinf > 10.0 * tol) {
            sol.iterations = iter;
            return finalize(SolveStatus::unbounded,
                            "primal objective diverging to -inf");
        }

        // ------------------------------------------------ factorizations
        std::vector<Mat> LX = it.X, LS = it.S, Sinv(st.nblocks);
        bool fact_ok = true;
        for (int k = 0; k < st.nblocks && fact_ok; ++k) {
            if (kern::potrf(LX[k].data(), LX[k].rows) >= 0) fact_ok = false;
            if (kern::potrf(LS[k].data(), LS[k].rows) >= 0) fact_ok = false;
            if (!fact_ok) break;
            Sinv[k] = Mat::identity(st.dims[k]);
            la::chol_solve(LS[k], Sinv[k].data(), st.dims[k]);
        }
        if (!fact_ok) {
            if (best_rs.pinf <= tol && best_rs.dinf <= tol &&
                best_rs.relgap <= 10.0 * tol)
                return settle(iter);
            sol.iterations = iter;
            return finalize(SolveStatus::numerical_failure,
                            "iterate factorization failed at iteration " +
                                std::to_string(iter));
        }

        // ------------------------------------------------ Schur complement
        // M_rs = sum_k tr(A_rk X_k A_sk Sinv_k), block diagonal over comps
        for (int c = 0; c < st.ncomp; ++c)
            std::fill(M[c].a.begin(), M[c].a.end(), 0.0);
        for (int k = 0; k < st.nblocks; ++k) {
            const auto& rows = st.block_rows[k];
            if (rows.empty()) continue;
            const int c = st.row_comp[rows[0]];
            const int n = st.dims[k];
            Mat T(n, n);
            std::vector<double> scratchY, scratchB;
            for (std::size_t ri = 0; ri < rows.size(); ++ri) {
                const int r = rows[ri];
                const auto& es = st.row_block[r][k];
                // gather active columns of U = A_rk
                std::vector<int> cols;
                for (const auto& e : es) {
                    cols.push_back(e.i);
                    if (e.j != e.i) cols.push_back(e.j);
                }
                std::sort(cols.begin(), cols.end());
                cols.erase(std::unique(cols.begin(), cols.end()), cols.end());
                const int nc = int(cols.size());
                std::vector<int> pos(n, -1);
                for (int q = 0; q < nc; ++q) pos[cols[q]] = q;
                // Y = X * U restricted to active columns
                scratchY.assign(std::size_t(n) * nc, 0.0);
                for (const auto& e : es) {
                    const double v = e.value;
                    for (int a = 0; a < n; ++a)
                        scratchY[std::size_t(a) * nc + pos[e.j]] +=
                            v * it.X[k](a, e.i);
                    if (e.i != e.j)
                        for (int a = 0; a < n; ++a)
                            scratchY[std::size_t(a) * nc + pos[e.i]] +=
                                v * it.X[k](a, e.j);
                }
                // B = rows of Sinv for the active columns
                scratchB.assign(std::size_t(nc) * n, 0.0);
                for (int q = 0; q < nc; ++q)
                    std::copy_n(Sinv[k].data() + std::size_t(cols[q]) * n, n,
                                scratchB.begin() + std::size_t(q) * n);
                std::fill(T.a.begin(), T.a.end(), 0.0);
                kern::gemm_acc(scratchY.data(), nc, scratchB.data(), n,
                               T.data(), n, n, nc, n, 1.0);
                // lower-triangle M entries for s >= r
                const int rl = st.row_local[r];
                for (std::size_t si = ri; si < rows.size(); ++si) {
                    const int slo = st.row_local[rows[si]];
                    M[c](slo, rl) += inner_asym(st.row_block[rows[si]][k], T);
                }
            }
        }
        // factor each component (lower triangle filled)
        bool schur_ok = true;
        for (int c = 0; c < st.ncomp && schur_ok; ++c) {
            Mat Mcopy = M[c];
            if (kern::potrf(M[c].data(), M[c].rows) >= 0) {
                // one deterministic ridge retry
                M[c] = Mcopy;
                double dmax = 0.0;
                for (std::size_t d = 0; d < M[c].rows; ++d)
                    dmax = std::max(dmax, M[c](d, d));
                for (std::size_t d = 0; d < M[c].rows; ++d)
                    M[c](d, d) += 1e-12 * (1.0 + dmax);
                if (kern::potrf(M[c].data(), M[c].rows) >= 0) schur_ok = false;
            }
        }
        if (!schur_ok) {
            if (best_rs.pinf <= tol && best_rs.dinf <= tol &&
                best_rs.relgap <= 10.0 * tol)
                return settle(iter);
            sol.iterations = iter;
            return finalize(SolveStatus::numerical_failure,
                            "Schur factorization failed at iteration " +
                                std::to_string(iter));
        }

        // ------------------------------------------- free-variable system
        // Z = M^{-1} F per component, G = F^T Z accumulated
        if (nf > 0) {
            std::fill(G.a.begin(), G.a.end(), 0.0);
            for (int c = 0; c < st.ncomp; ++c) {
                const auto& cols = st.comp_cols[c];
                const std::size_t mc = st.comp_rows[c].size();
                if (cols.empty()) continue;
                std::fill(Z[c].a.begin(), Z[c].a.end(), 0.0);
                for (std::size_t q = 0; q < cols.size(); ++q)
                    for (const auto& [r, coef] : st.free_cols[cols[q]])
                        if (st.row_comp[r] == c)
                            Z[c](st.row_local[r], q) = coef;
                la::chol_solve(M[c], Z[c].data(), cols.size());
                // G += F_c^T Z_c using the sparse columns of F
                for (std::size_t q = 0; q < cols.size(); ++q) {
                    for (const auto& [r, coef] : st.free_cols[cols[q]]) {
                        if (st.row_comp[r] != c) continue;
                        const double* zrow =
                            Z[c].data() + std::size_t(st.row_local[r]) * Z[c].cols;
                        double* grow = G.data() + std::size_t(cols[q]) * nf;
                        for (std::size_t t = 0; t < cols.size(); ++t)
                            grow[cols[t]] += coef * zrow[t];
                    }
                }
            }
            // symmetrize and factor
            for (int a = 0; a < nf; ++a)
                for (int b = a + 1; b < nf; ++b) {
                    const double v = 0.5 * (G(a, b) + G(b, a));
                    G(a, b) = G(b, a) = v;
                }
            if (kern::potrf(G.data(), nf) >= 0) {
                if (best_rs.pinf <= tol && best_rs.dinf <= tol &&
                    best_rs.relgap <= 10.0 * tol)
                    return settle(iter);
                sol.iterations = iter;
                return finalize(
                    SolveStatus::numerical_failure,
                    "reduced free-variable system factorization failed at "
                    "iteration " +
                        std::to_string(iter));
            }
        }

        // base W_k = X_k Rd_k Sinv_k (iteration-constant part of rhs)
        std::vector<Mat> Wbase(st.nblocks);
        for (int k = 0; k < st.nblocks; ++k) {
            const int n = st.dims[k];
            Mat XR(n, n);
            kern::gemm_acc(it.X[k].data(), n, rs.Rd[k].data(), n, XR.data(), n,
                           n, n, n, 1.0);
            Wbase[k] = Mat(n, n);
            kern::gemm_acc(XR.data(), n, Sinv[k].data(), n, Wbase[k].data(), n,
                           n, n, n, 1.0);
        }

        // core reduced-KKT solve: (M dlam + F dy = rhs1, F^T dlam = rf)
        auto core_solve = [&](const std::vector<double>& rhs1,
                              const std::vector<double>& rf,
                              std::vector<double>& dlam,
                              std::vector<double>& dy) {
            std::vector<double> u(m, 0.0);
            for (int c = 0; c < st.ncomp; ++c) {
                const auto& rows = st.comp_rows[c];
                std::vector<double> loc(rows.size());
                for (std::size_t i = 0; i < rows.size(); ++i)
                    loc[i] = rhs1[rows[i]];
                la::chol_solve(M[c], loc.data(), 1);
                for (std::size_t i = 0; i < rows.size(); ++i) u[rows[i]] = loc[i];
            }
            dy.assign(nf, 0.0);
            if (nf > 0) {
                for (int j = 0; j < nf; ++j) {
                    double s = 0.0;
                    for (const auto& [r, c] : st.free_cols[j]) s += c * u[r];
                    dy[j] = s - rf[j];
                }
                la::chol_solve(G, dy.data(), 1);
            }
            dlam = u;
            for (int c = 0; c < st.ncomp; ++c) {
                const auto& cols = st.comp_cols[c];
                if (cols.empty()) continue;
                const auto& rows = st.comp_rows[c];
                for (std::size_t i = 0; i < rows.size(); ++i) {
                    const double* zrow = Z[c].data() + i * Z[c].cols;
                    double s = 0.0;
                    for (std::size_t q = 0; q < cols.size(); ++q)
                        s += zrow[q] * dy[cols[q]];
                    dlam[rows[i]] -= s;
                }
            }
        };

        // KKT solve for a given complementarity target, with iterative
        // refinement against the true direction residual (the factorized
        // Schur system loses digits once its conditioning approaches
        // 1/mu^2, which would otherwise leak primal infeasibility)
        auto solve_direction = [&](double sigma_mu,
                                   const std::vector<Mat>* second,
                                   std::vector<Mat>& dX, std::vector<Mat>& dS,
                                   std::vector<double>& dy,
                                   std::vector<double>& dlam) {
            std::vector<double> rhs1(m, 0.0);
            std::vector<Mat> Wfull(st.nblocks);
            for (int k = 0; k < st.nblocks; ++k) {
                if (second) {
                    const int n = st.dims[k];
                    Wfull[k] = Wbase[k];
                    kern::gemm_acc((*second)[k].data(), n, Sinv[k].data(), n,
                                   Wfull[k].data(), n, n, n, n, 1.0);
                } else {
                    Wfull[k] = Wbase[k];
                }
            }
            for (int r = 0; r < m; ++r) {
                double v = rs.rp[r];
                for (int k = 0; k < st.nblocks; ++k) {
                    const auto& es = st.row_block[r][k];
                    if (es.empty()) continue;
                    v += inner_asym(es, Wfull[k]);
                    v += inner_sym(es, it.X[k], k); // d2
                    if (sigma_mu != 0.0) {
                        double d1 = 0.0;
                        for (const auto& e : es)
                            d1 += e.value * (e.i == e.j
                                                 ? Sinv[k](e.i, e.i)
                                                 : 2.0 * Sinv[k](e.i, e.j));
                        v -= sigma_mu * d1;
                    }
                }
                rhs1[r] = v;
            }
            core_solve(rhs1, rs.rf, dlam, dy);

            // dS = Rd - sum dlam A ; dX from the complementarity equation
            auto build_dxds = [&]() {
                dX.assign(st.nblocks, Mat());
                dS.assign(st.nblocks, Mat());
                for (int k = 0; k < st.nblocks; ++k) {
                    const int n = st.dims[k];
                    dS[k] = rs.Rd[k];
                    for (int r : st.block_rows[k])
                        add_sym(dS[k], st.row_block[r][k], -dlam[r]);
                    Mat P(n, n);
                    if (second) P = (*second)[k];
                    kern::gemm_acc(it.X[k].data(), n, dS[k].data(), n,
                                   P.data(), n, n, n, n, 1.0);
                    Mat Q(n, n);
                    kern::gemm_acc(P.data(), n, Sinv[k].data(), n, Q.data(), n,
                                   n, n, n, 1.0);
                    dX[k] = Mat(n, n);
                    for (int a = 0; a < n; ++a)
                        for (int b = 0; b < n; ++b)
                            dX[k](a, b) = sigma_mu * Sinv[k](a, b) -
                                          it.X[k](a, b) -
                                          0.5 * (Q(a, b) + Q(b, a));
                }
            };
            build_dxds();

            std::vector<double> err(m, 0.0), zero_f(nf, 0.0);
            std::vector<double> clam(m), cy(nf);
            for (int pass = 0; pass < 3; ++pass) {
                // true primal-equation residual of the direction
                double emax = 0.0, scale = 0.0;
                for (int r = 0; r < m; ++r) {
                    double ax = 0.0;
                    for (int k = 0; k < st.nblocks; ++k)
                        if (!st.row_block[r][k].empty())
                            ax += inner_sym(st.row_block[r][k], dX[k], k);
                    for (const auto& [j, c] : ps.rows[r].free_terms)
                        ax += c * dy[j];
                    err[r] = rs.rp[r] - ax;
                    emax = std::max(emax, std::abs(err[r]));
                    scale = std::max(scale, std::abs(rs.rp[r]));
                }
                if (emax <= 1e-11 * (1.0 + scale) + 1e-13) break;
                // homogeneous correction: complementarity target zero
                core_solve(err, zero_f, clam, cy);
                for (int r = 0; r < m; ++r) dlam[r] += clam[r];
                for (int j = 0; j < nf; ++j) dy[j] += cy[j];
                build_dxds();
            }
        };

        auto max_steps = [&](const std::vector<Mat>& dX,
                             const std::vector<Mat>& dS) {
            double ap = 1.0, ad = 1.0;
            for (int k = 0; k < st.nblocks; ++k) {
                ap = std::min(ap, step_to_boundary(LX[k], dX[k]));
                ad = std::min(ad, step_to_boundary(LS[k], dS[k]));
            }
            return std::pair<double, double>(ap, ad);
        };

        // predictor
        std::vector<Mat> dXa, dSa;
        std::vector<double> dya, dla;
        solve_direction(0.0, nullptr, dXa, dSa, dya, dla);
        auto [apa, ada] = max_steps(dXa, dSa);
        // push closer to the boundary once the iterate is nearly converged
        const double tau =
            rs.mu < 1e-4 ? 0.995 : (rs.mu < 1e-2 ? 0.99 : 0.98);
        double mu_aff = 0.0;
        {
            int dimsum = 0;
            for (int k = 0; k < st.nblocks; ++k) {
                const int n = st.dims[k];
                Mat Xt = it.X[k], Stl = it.S[k];
                kern::axpy(std::min(1.0, tau * apa), dXa[k].data(), Xt.data(),
                           std::size_t(n) * n);
                kern::axpy(std::min(1.0, tau * ada), dSa[k].data(), Stl.data(),
                           std::size_t(n) * n);
                mu_aff += kern::dot(Xt.data(), Stl.data(), std::size_t(n) * n);
                dimsum += n;
            }
            mu_aff /= dimsum;
        }
        double sigma = std::pow(std::max(0.0, mu_aff) / rs.mu, 3.0);
        sigma = std::min(1.0, std::max(sigma, 1e-10));

        // corrector with second-order term dXa * dSa
        std::vector<Mat> second(st.nblocks);
        for (int k = 0; k < st.nblocks; ++k) {
            const int n = st.dims[k];
            second[k] = Mat(n, n);
            kern::gemm_acc(dXa[k].data(), n, dSa[k].data(), n,
                           second[k].data(), n, n, n, n, 1.0);
        }
        std::vector<Mat> dX, dS;
        std::vector<double> dy, dlam;
        solve_direction(sigma * rs.mu, &second, dX, dS, dy, dlam);

        // accept with a monotone-mu backtracking safeguard; when the
        // corrector direction cannot make progress (its second-order term
        // can point uphill on badly conditioned iterates) retry with a
        // plain centering direction
        Iterate trial;
        Residual trial_rs;
        bool accepted = false;
        double ap = 0.0, ad = 0.0;
        for (int attempt = 0; attempt < 2 && !accepted; ++attempt) {
            if (attempt == 1)
                solve_direction(0.8 * rs.mu, nullptr, dX, dS, dy, dlam);
            auto [ap0, ad0] = max_steps(dX, dS);
            ap = std::min(1.0, tau * ap0);
            ad = std::min(1.0, tau * ad0);
            for (int bt = 0; bt < 28; ++bt) {
                trial = it;
                for (int k = 0; k < st.nblocks; ++k) {
                    const std::size_t nn = std::size_t(st.dims[k]) * st.dims[k];
                    kern::axpy(ap, dX[k].data(), trial.X[k].data(), nn);
                    kern::axpy(ad, dS[k].data(), trial.S[k].data(), nn);
                }
                kern::axpy(ap, dy.data(), trial.y.data(), nf);
                kern::axpy(ad, dlam.data(), trial.lam.data(), m);
                trial_rs = compute_residuals(ps, st, trial);
                if (trial_rs.mu <= rs.mu * (1.0 + 1e-9) || rs.mu < 1e-14) {
                    accepted = true;
                    break;
                }
                if (bt == 0) {
                    // unequal steps can point uphill in mu even when the
                    // direction is centering; equal steps guarantee a
                    // first-order decrease, so backtrack on those
                    ap = ad = std::min(ap, ad);
                }
                ap *= 0.7;
                ad *= 0.7;
            }
        }
        if (opts.want_log)
            log << iter_line(iter, rs.mu, ap, ad, rs.pinf, rs.dinf, rs.relgap,
                             accepted);
        if (!accepted) {
            ++iter;
            break; // no productive step available
        }
        it = std::move(trial);
        rs = trial_rs;
        if (score_of(rs) < best_score) {
            best_score = score_of(rs);
            best_it = it;
            best_rs = rs;
        }

        if (rs.mu > 0.995 * prev_mu)
            ++stall;
        else
            stall = 0;
        prev_mu = rs.mu;
        if (stall >= 12) {
            ++iter;
            break;
        }
    }

    return settle(iter);
}

SdpResiduals residuals(const SdpProblem& p, const SdpSolution& s) {
    const Structure st = build_structure(p);
    if (int(s.block_matrices.size()) != st.nblocks ||
        int(s.equality_duals.size()) != st.m ||
        int(s.free_values.size()) != st.nf)
        throw std::invalid_argument("residuals: shape mismatch");
    Iterate it;
    it.X = s.block_matrices;
    it.S = s.dual_blocks;
    if (it.S.empty())
        for (int k = 0; k < st.nblocks; ++k)
            it.S.emplace_back(st.dims[k], st.dims[k]);
    it.y = s.free_values;
    it.lam = s.equality_duals;
    const Residual rs = compute_residuals(p, st, it);
    SdpResiduals out;
    out.primal_eq = rs.pinf;
    out.dual = rs.dinf;
    out.gap = rs.relgap;
    out.min_eig = 0.0;
    for (int k = 0; k < st.nblocks; ++k) {
        const double e = la::sym_min_eig(it.X[k]);
        out.min_eig = k == 0 ? e : std::min(out.min_eig, e);
    }
    return out;
}

// --------------------------------------------------------------- SDPA io
//
// The file encodes our problem as the SDPA dual:
//   max tr(F0 Y) s.t. tr(Fi Y) = c_i, Y >= 0
// with Y = diag(X_1..X_K, diag(y)), F0 = -objective, c = b. Free variables
// occupy a trailing diagonal block declared with a negative size.

namespace {

struct SdpaKey {
    int mat, blk, i, j;
    bool operator<(const SdpaKey& o) const {
        return std::tie(mat, blk, i, j) < std::tie(o.mat, o.blk, o.i, o.j);
    }
};

} // namespace

std::string export_sdpa(const SdpProblem& p) {
    p.validate();
    const int m = int(p.rows.size());
    const int npsd = int(p.psd_blocks.size());
    const int nblocks = npsd + (p.num_free > 0 ? 1 : 0);

    std::map<SdpaKey, double> entries;
    auto put = [&](int mat, int blk, int i, int j, double v) {
        if (v == 0.0) return;
        entries[{mat, blk, i, j}] += v;
    };
    // matrix 0: negated objective
    for (const auto& e : p.obj_mat)
        put(0, e.block + 1, e.i + 1, e.j + 1, -e.value);
    for (const auto& [jf, c] : p.obj_free) put(0, npsd + 1, jf + 1, jf + 1, -c);
    // constraint matrices
    for (int r = 0; r < m; ++r) {
        for (const auto& e : p.rows[r].mat_terms)
            put(r + 1, e.block + 1, e.i + 1, e.j + 1, e.value);
        for (const auto& [jf, c] : p.rows[r].free_terms)
            put(r + 1, npsd + 1, jf + 1, jf + 1, c);
    }

    std::ostringstream os;
    os << "\"obsyn sdpa sparse export\n";
    os << m << "\n";
    os << nblocks << "\n";
    for (int k = 0; k < npsd; ++k) os << (k ? " " : "") << p.psd_blocks[k];
    if (p.num_free > 0) os << (npsd ? " " : "") << -p.num_free;
    os << "\n";
    for (int r = 0; r < m; ++r)
        os << (r ? " " : "") << format_double(p.rows[r].rhs);
    os << "\n";
    for (const auto& [k, v] : entries) {
        if (std::abs(v) == 0.0) continue;
        os << k.mat << " " << k.blk << " " << k.i << " " << k.j << " "
           << format_double(v) << "\n";
    }
    return os.str();
}

namespace {

[[noreturn]] void sdpa_fail(std::size_t line, const std::string& what) {
    throw std::invalid_argument("sdpa parse error at line " +
                                std::to_string(line) + ": " + what);
}

} // namespace

SdpProblem import_sdpa(std::string_view text) {
    // split into lines, track numbers for diagnostics
    std::vector<std::pair<std::size_t, std::string>> lines;
    {
        std::size_t lineno = 1;
        std::string cur;
        for (char c : text) {
            if (c == '\n') {
                lines.emplace_back(lineno++, cur);
                cur.clear();
            } else {
                cur += c;
            }
        }
        if (!cur.empty()) lines.emplace_back(lineno, cur);
    }
    auto is_comment = [](const std::string& s) {
        for (char c : s) {
            if (std::isspace(static_cast<unsigned char>(c))) continue;
            return c == '"' || c == '*';
        }
        return true; // blank
    };
    auto tokenize = [](const std::string& s) {
        std::vector<std::string> toks;
        std::string cur;
        for (char c : s) {
            if (std::isspace(static_cast<unsigned char>(c)) || c == ',' ||
                c == '{' || c == '}' || c == '(' || c == ')') {
                if (!cur.empty()) {
                    toks.push_back(cur);
                    cur.clear();
                }
            } else {
                cur += c;
            }
        }
        if (!cur.empty()) toks.push_back(cur);
        return toks;
    };

    std::size_t pos = 0;
    auto next_data_line =
        [&](const char* what) -> std::pair<std::size_t, std::vector<std::string>> {
        while (pos < lines.size() && is_comment(lines[pos].second)) ++pos;
        if (pos >= lines.size())
            sdpa_fail(lines.empty() ? 1 : lines.back().first,
                      std::string("unexpected end of file, expected ") + what);
        auto toks = tokenize(lines[pos].second);
        return {lines[pos++].first, std::move(toks)};
    };
    auto to_int = [](const std::string& s, std::size_t ln, const char* what) {
        try {
            std::size_t used = 0;
            const long v = std::stol(s, &used);
            if (used != s.size()) throw std::invalid_argument(s);
            return v;
        } catch (const std::exception&) {
            sdpa_fail(ln, std::string("bad integer for ") + what + ": '" + s +
                              "'");
        }
    };
    auto to_double = [](const std::string& s, std::size_t ln, const char* what) {
        try {
            std::size_t used = 0;
            const double v = std::stod(s, &used);
            if (used != s.size()) throw std::invalid_argument(s);
            return v;
        } catch (const std::exception&) {
            sdpa_fail(ln, std::string("bad number for ") + what + ": '" + s +
                              "'");
        }
    };

    auto [ln_m, toks_m] = next_data_line("constraint count");
    if (toks_m.size() != 1) sdpa_fail(ln_m, "expected a single integer (m)");
    const long m = to_int(toks_m[0], ln_m, "m");
    if (m < 0) sdpa_fail(ln_m, "negative constraint count");

    auto [ln_nb, toks_nb] = next_data_line("block count");
    if (toks_nb.size() != 1)
        sdpa_fail(ln_nb, "expected a single integer (nblocks)");
    const long nblocks = to_int(toks_nb[0], ln_nb, "nblocks");
    if (nblocks < 0) sdpa_fail(ln_nb, "negative block count");

    SdpProblem p;
    int free_block = -1; // 1-based block index of the free diagonal block
    std::vector<int> decl(nblocks, 0);
    std::vector<int> psd_index(nblocks, -1);
    if (nblocks > 0) {
        auto [ln_bs, toks_bs] = next_data_line("block sizes");
        if (long(toks_bs.size()) != nblocks)
            sdpa_fail(ln_bs, "block size list length " +
                                 std::to_string(toks_bs.size()) +
                                 " does not match declared block count " +
                                 std::to_string(nblocks));
        for (long k = 0; k < nblocks; ++k) {
            const long d = to_int(toks_bs[std::size_t(k)], ln_bs, "block size");
            if (d == 0) sdpa_fail(ln_bs, "zero block size");
            decl[std::size_t(k)] = int(d);
            if (d < 0) {
                if (free_block >= 0)
                    sdpa_fail(ln_bs, "multiple negative (diagonal) blocks");
                free_block = int(k) + 1;
                p.num_free = int(-d);
            } else {
                psd_index[std::size_t(k)] = int(p.psd_blocks.size());
                p.psd_blocks.push_back(int(d));
            }
        }
    }

    p.rows.resize(std::size_t(m));
    if (m > 0) {
        auto [ln_c, toks_c] = next_data_line("objective (rhs) vector");
        if (long(toks_c.size()) != m)
            sdpa_fail(ln_c, "rhs vector length " +
                                std::to_string(toks_c.size()) +
                                " does not match m = " + std::to_string(m));
        for (long r = 0; r < m; ++r)
            p.rows[std::size_t(r)].rhs =
                to_double(toks_c[std::size_t(r)], ln_c, "rhs");
    }

    while (true) {
        while (pos < lines.size() && is_comment(lines[pos].second)) ++pos;
        if (pos >= lines.size()) break;
        const auto ln = lines[pos].first;
        auto toks = tokenize(lines[pos].second);
        ++pos;
        if (toks.size() != 5)
            sdpa_fail(ln, "entry lines need 5 fields: matno blkno i j value");
        const long mat = to_int(toks[0], ln, "matno");
        const long blk = to_int(toks[1], ln, "blkno");
        long i = to_int(toks[2], ln, "i");
        long j = to_int(toks[3], ln, "j");
        const double v = to_double(toks[4], ln, "value");
        if (mat < 0 || mat > m) sdpa_fail(ln, "matno out of range");
        if (blk < 1 || blk > nblocks) sdpa_fail(ln, "blkno out of range");
        const int d = std::abs(decl[std::size_t(blk - 1)]);
        if (i < 1 || j < 1 || i > d || j > d)
            sdpa_fail(ln, "entry indices out of range for block");
        if (i > j) std::swap(i, j);
        if (int(blk) == free_block) {
            if (i != j)
                sdpa_fail(ln, "off-diagonal entry in the diagonal free block");
            if (mat == 0) {
                p.obj_free.emplace_back(int(i - 1), -v);
            } else {
                p.rows[std::size_t(mat - 1)].free_terms.emplace_back(
                    int(i - 1), v);
            }
        } else {
            BlockEntry e;
            e.block = psd_index[std::size_t(blk - 1)];
            e.i = int(i - 1);
            e.j = int(j - 1);
            e.value = mat == 0 ? -v : v;
            if (mat == 0)
                p.obj_mat.push_back(e);
            else
                p.rows[std::size_t(mat - 1)].mat_terms.push_back(e);
        }
    }
    p.validate();
    return p;
}

} // namespace obsyn
