// obsyn: observer gain synthesis via moment-SOS relaxations.
//
// Subcommands mirror the pipeline stages:
//   compile   config -> SDPA problem + layout manifest + resolved config
//   solve     manifest + problem -> certificate + solver log
//   select    certificate + config -> gain ranking CSV + chosen gain
//   validate  config [+ certificate] -> sampled report + containment verdict
//
// Exit codes: 0 success, 2 config error, 3 solver non-optimal,
// 4 containment violations, 1 anything else.

#include <CLI11.hpp>
#include <json.hpp>

#include "obsyn/config.hpp"
#include "obsyn/gain.hpp"
#include "obsyn/kernels.hpp"
#include "obsyn/sos.hpp"
#include "obsyn/util.hpp"
#include "obsyn/validator.hpp"

#include <filesystem>
#include <fstream>
#include <iostream>

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitError = 1;
constexpr int kExitConfig = 2;
constexpr int kExitSolver = 3;
constexpr int kExitContainment = 4;

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read '" + path + "'");
    return std::string((std::istreambuf_iterator<char>(in)),
                       std::istreambuf_iterator<char>());
}

void spit(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write '" + path + "'");
    out << text;
}

struct CommonOpts {
    std::string out_dir;
    unsigned threads = 1;
};

fs::path ensure_out(const std::string& dir) {
    fs::path p(dir);
    fs::create_directories(p);
    return p;
}

unsigned effective_degree(unsigned requested) {
    if (requested % 2 == 1) {
        std::cout << "warning: degree " << requested << " rounded to "
                  << requested + 1 << " (relaxation degrees are even)\n";
        return requested + 1;
    }
    return requested;
}

int cmd_compile(const std::string& config_path, int degree_override,
                const CommonOpts& common) {
    const obsyn::ProblemConfig cfg = obsyn::ProblemConfig::load(config_path);
    const fs::path out =
        ensure_out(common.out_dir.empty() ? cfg.output_dir : common.out_dir);
    const unsigned d = effective_degree(
        degree_override > 0 ? unsigned(degree_override) : cfg.degree);

    const obsyn::ObserverProblem problem = cfg.to_problem();
    auto [sdp, layout] = obsyn::compile_dual(problem, d);

    const std::string sdpa = obsyn::export_sdpa(sdp);
    spit((out / "problem.dat-s").string(), sdpa);
    spit((out / "resolved_config.json").string(), cfg.resolved_json());

    ordered_json manifest;
    manifest["kind"] = "obsyn-manifest";
    manifest["degree"] = d;
    manifest["sdpa_fnv"] = obsyn::to_hex(obsyn::fnv1a64(sdpa));
    manifest["layout"] =
        ordered_json::parse(obsyn::layout_to_json(layout));
    spit((out / "manifest.json").string(), manifest.dump(1) + "\n");

    std::size_t nrows = sdp.rows.size();
    std::cout << "compiled degree-" << d << " relaxation: " << nrows
              << " equality rows, " << sdp.psd_blocks.size()
              << " PSD blocks, " << sdp.num_free << " free coefficients\n";
    std::cout << "  blocks:";
    for (int b : sdp.psd_blocks) std::cout << " " << b;
    std::cout << "\n  wrote " << (out / "problem.dat-s").string() << ", "
              << (out / "manifest.json").string() << ", "
              << (out / "resolved_config.json").string() << "\n";
    return kExitOk;
}

int cmd_solve(const std::string& dir_in, const CommonOpts& common) {
    const fs::path in(dir_in);
    const fs::path out =
        common.out_dir.empty() ? in : ensure_out(common.out_dir);

    const ordered_json manifest =
        ordered_json::parse(slurp((in / "manifest.json").string()));
    if (manifest.at("kind") != "obsyn-manifest")
        throw std::runtime_error("not a manifest: " +
                                 (in / "manifest.json").string());
    const std::string sdpa = slurp((in / "problem.dat-s").string());
    if (obsyn::to_hex(obsyn::fnv1a64(sdpa)) !=
        manifest.at("sdpa_fnv").get<std::string>())
        throw std::runtime_error(
            "checksum error: problem.dat-s does not match the manifest");

    const obsyn::SdpProblem sdp = obsyn::import_sdpa(sdpa);
    const obsyn::DualProgramLayout layout =
        obsyn::layout_from_json(manifest.at("layout").dump());

    obsyn::SdpSolveOptions opts;
    const obsyn::SdpSolution sol = obsyn::solve(sdp, opts);
    spit((out / "solve.log").string(), sol.log);
    std::cout << "solver status: " << obsyn::status_name(sol.status) << " in "
              << sol.iterations << " iterations (pinf "
              << sol.residuals.primal_eq << ", dinf " << sol.residuals.dual
              << ", gap " << sol.residuals.gap << ")\n";

    if (sol.status == obsyn::SolveStatus::infeasible ||
        sol.status == obsyn::SolveStatus::unbounded ||
        sol.status == obsyn::SolveStatus::numerical_failure) {
        std::cout << "no certificate written: " << sol.failure_detail << "\n";
        return kExitSolver;
    }
    const obsyn::Certificate cert = obsyn::recover_certificate(layout, sol);
    obsyn::save_certificate(cert, (out / "certificate.json").string());
    std::cout << "objective (volume upper bound): " << cert.objective << "\n";
    std::cout << "reconstruction residuals:";
    for (double r : cert.reconstruction_residuals) std::cout << " " << r;
    std::cout << "\n  wrote " << (out / "certificate.json").string() << ", "
              << (out / "solve.log").string() << "\n";
    return sol.status == obsyn::SolveStatus::optimal ? kExitOk : kExitSolver;
}

int cmd_select(const std::string& cert_path, const std::string& config_path,
               int k_override, int grid_e, int grid_l,
               const CommonOpts& common) {
    const obsyn::ProblemConfig cfg = obsyn::ProblemConfig::load(config_path);
    const fs::path out =
        ensure_out(common.out_dir.empty() ? cfg.output_dir : common.out_dir);
    const obsyn::Certificate cert = obsyn::load_certificate(cert_path);
    const obsyn::ObserverProblem problem = cfg.to_problem();
    if (cert.problem_fingerprint != problem.fingerprint())
        throw std::invalid_argument(
            "config error: certificate fingerprint does not match the "
            "problem configuration");

    const unsigned k = k_override > 0 ? unsigned(k_override) : cfg.selector_k;
    const int ne = grid_e > 0 ? grid_e : cfg.selector_grid_e;
    const int nl = grid_l > 0 ? grid_l : cfg.selector_grid_l;
    const auto egrid = obsyn::GridSpec::cartesian(problem.E(), ne);
    const auto lgrid = obsyn::GridSpec::cartesian(problem.L(), nl);

    const obsyn::GainRanking ranking =
        obsyn::select_gains(cert, lgrid, egrid, k, common.threads);
    if (!ranking.warning.empty())
        std::cout << "warning: " << ranking.warning << "\n";

    obsyn::export_gain_csv((out / "gain_ranking.csv").string(), ranking);

    // w over E at the selected gain, for plotting
    obsyn::export_levelset_csv((out / "levelset_e.csv").string(), cert, egrid,
                               ranking.selected);

    ordered_json j;
    j["kind"] = "obsyn-selected-gain";
    j["fingerprint"] = obsyn::to_hex(cert.problem_fingerprint);
    j["k"] = k;
    j["egrid"] = ne;
    j["lgrid"] = nl;
    ordered_json sel = ordered_json::array();
    for (double v : ranking.selected) sel.push_back(obsyn::format_double(v));
    j["selected_gain"] = sel;
    j["max_beta"] = obsyn::format_double(ranking.max_beta);
    j["argmax_count"] = ranking.argmax.size();
    j["tie_break"] = ranking.tie_break;
    if (!ranking.warning.empty()) j["warning"] = ranking.warning;
    spit((out / "selected_gain.json").string(), j.dump(1) + "\n");

    std::cout << "selected gain l* = (";
    for (std::size_t i = 0; i < ranking.selected.size(); ++i)
        std::cout << (i ? ", " : "") << ranking.selected[i];
    std::cout << ") with beta = " << ranking.max_beta << " ("
              << ranking.argmax.size() << " gains tie)\n";
    std::cout << "  wrote " << (out / "gain_ranking.csv").string() << ", "
              << (out / "selected_gain.json").string() << "\n";
    return kExitOk;
}

int cmd_validate(const std::string& config_path, const std::string& cert_path,
                 int steps, long long seed, int grid_e, int grid_l,
                 const CommonOpts& common) {
    const obsyn::ProblemConfig cfg = obsyn::ProblemConfig::load(config_path);
    const fs::path out =
        ensure_out(common.out_dir.empty() ? cfg.output_dir : common.out_dir);
    const obsyn::ObserverProblem problem = cfg.to_problem();

    obsyn::ValidatorSettings vs = cfg.validator;
    if (steps > 0) vs.steps = steps;
    if (seed >= 0) vs.seed = std::uint64_t(seed);
    if (grid_e > 0) vs.e_count = grid_e;
    if (grid_l > 0) vs.l_count = grid_l;
    vs.threads = common.threads;

    const obsyn::ValidationReport report = obsyn::ground_truth(problem, vs);
    obsyn::export_report_csv((out / "validation_report.csv").string(), report);

    ordered_json summary = ordered_json::parse(report_summary_json(report));
    int rc = kExitOk;
    if (!cert_path.empty()) {
        const obsyn::Certificate cert = obsyn::load_certificate(cert_path);
        const auto violations =
            obsyn::containment_check(cert, problem, report);
        summary["containment"] = {
            {"checked", true},
            {"violations", violations.size()},
        };
        if (!violations.empty()) {
            ordered_json worst = ordered_json::array();
            for (std::size_t i = 0; i < std::min<std::size_t>(10, violations.size());
                 ++i)
                worst.push_back({{"gain_index", violations[i].gain_index},
                                 {"e0_index", violations[i].e0_index},
                                 {"w", obsyn::format_double(violations[i].w_value)}});
            summary["containment"]["examples"] = worst;
            rc = kExitContainment;
        }
        std::cout << "containment: " << violations.size()
                  << " violation(s) among admissible samples\n";
    }
    spit((out / "validation_summary.json").string(), summary.dump(1) + "\n");

    int best = 0;
    for (int c : report.feasible_counts) best = std::max(best, c);
    std::cout << "validated " << report.gains.coords.size() << " gains x "
              << report.e0.coords.size() << " initial errors ("
              << report.x0_used << " initial state(s) each";
    if (report.x_independent_error)
        std::cout << "; error dynamics independent of the system state";
    std::cout << ")\n  best feasible count: " << best << ", blowups: "
              << report.blowups << "\n  wrote "
              << (out / "validation_report.csv").string() << ", "
              << (out / "validation_summary.json").string() << "\n";
    return rc;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"observer gain synthesis via moment-SOS relaxations"};
    app.require_subcommand(1);
    app.fallthrough(); // parent flags (--out, --threads) after subcommands

    CommonOpts common;
    app.add_option("--out", common.out_dir,
                   "output directory (default from config)");
    app.add_option("--threads", common.threads, "worker threads for sweeps");

    std::string config_path, cert_path, run_dir;
    int degree = 0, k = 0, grid_e = 0, grid_l = 0, steps = 0;
    long long seed = -1;

    auto* compile =
        app.add_subcommand("compile", "compile a config to an SDP + manifest");
    compile->add_option("config", config_path, "problem config (JSON)")
        ->required();
    compile->add_option("--degree", degree, "relaxation degree override");

    auto* solve = app.add_subcommand(
        "solve", "solve a compiled problem and recover the certificate");
    solve->add_option("dir", run_dir,
                      "directory holding manifest.json and problem.dat-s")
        ->required();

    auto* select = app.add_subcommand(
        "select", "rank gains by the beta quadrature of the certificate");
    select->add_option("certificate", cert_path, "certificate.json")
        ->required();
    select->add_option("config", config_path, "problem config (JSON)")
        ->required();
    select->add_option("--k", k, "clamp exponent in beta");
    select->add_option("--grid-e", grid_e, "error grid nodes per dimension");
    select->add_option("--grid-l", grid_l, "gain grid nodes per dimension");

    auto* validate = app.add_subcommand(
        "validate", "sampled ground truth and containment check");
    validate->add_option("config", config_path, "problem config (JSON)")
        ->required();
    validate->add_option("--certificate", cert_path,
                         "certificate.json to containment-check");
    validate->add_option("--steps", steps, "RK4 steps");
    validate->add_option("--seed", seed, "report seed tag");
    validate->add_option("--grid-e", grid_e, "error samples");
    validate->add_option("--grid-l", grid_l, "gain samples");

    CLI11_PARSE(app, argc, argv);

    try {
        if (compile->parsed()) return cmd_compile(config_path, degree, common);
        if (solve->parsed()) return cmd_solve(run_dir, common);
        if (select->parsed())
            return cmd_select(cert_path, config_path, k, grid_e, grid_l,
                              common);
        if (validate->parsed())
            return cmd_validate(config_path, cert_path, steps, seed, grid_e,
                                grid_l, common);
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitError;
    }
    return kExitError;
}
