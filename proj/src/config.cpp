#include "obsyn/config.hpp"

#include "obsyn/poly.hpp"

#include <json.hpp>

#include <fstream>
#include <set>
#include <stdexcept>

namespace obsyn {

using json = nlohmann::ordered_json;

namespace {

[[noreturn]] void cfg_fail(const std::string& where, const std::string& what) {
    throw std::invalid_argument("config error in section '" + where +
                                "': " + what);
}

void reject_unknown(const json& j, const std::set<std::string>& allowed,
                    const std::string& where) {
    for (const auto& [key, val] : j.items())
        if (!allowed.count(key))
            cfg_fail(where, "unknown key '" + key + "'");
}

ProblemConfig::SetRecord parse_set(const json& j, const std::string& where) {
    if (!j.is_object()) cfg_fail(where, "expected an object");
    ProblemConfig::SetRecord r;
    if (!j.contains("type")) cfg_fail(where, "missing 'type'");
    r.type = j.at("type").get<std::string>();
    if (r.type == "box") {
        reject_unknown(j, {"type", "lower", "upper"}, where);
        if (!j.contains("lower") || !j.contains("upper"))
            cfg_fail(where, "box needs 'lower' and 'upper'");
        r.lower = j.at("lower").get<std::vector<double>>();
        r.upper = j.at("upper").get<std::vector<double>>();
    } else if (r.type == "ball") {
        reject_unknown(j, {"type", "center", "radius"}, where);
        if (!j.contains("center") || !j.contains("radius"))
            cfg_fail(where, "ball needs 'center' and 'radius'");
        r.center = j.at("center").get<std::vector<double>>();
        r.radius = j.at("radius").get<double>();
    } else {
        cfg_fail(where, "type must be 'box' or 'ball'");
    }
    return r;
}

json set_to_json(const ProblemConfig::SetRecord& r) {
    json j;
    j["type"] = r.type;
    if (r.type == "box") {
        j["lower"] = r.lower;
        j["upper"] = r.upper;
    } else {
        j["center"] = r.center;
        j["radius"] = r.radius;
    }
    return j;
}

SemialgebraicSet build_set(const ProblemConfig::SetRecord& r,
                           const RegistryPtr& reg,
                           const std::vector<std::size_t>& vars,
                           const std::string& where) {
    try {
        if (r.type == "box") {
            if (r.lower.size() != vars.size() || r.upper.size() != vars.size())
                cfg_fail(where, "bounds dimension mismatch");
            return SemialgebraicSet::make_box(reg, vars, r.lower, r.upper);
        }
        if (r.center.size() != vars.size())
            cfg_fail(where, "center dimension mismatch");
        return SemialgebraicSet::make_ball(reg, vars, r.center, r.radius);
    } catch (const std::invalid_argument& e) {
        cfg_fail(where, e.what());
    }
}

} // namespace

ProblemConfig ProblemConfig::parse(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const std::exception& e) {
        throw std::invalid_argument(std::string("config is not valid JSON: ") +
                                    e.what());
    }
    reject_unknown(j,
                   {"variables", "dynamics", "sets", "horizon", "degree",
                    "selector", "validator", "output_dir"},
                   "top level");
    ProblemConfig c;

    if (!j.contains("variables")) cfg_fail("variables", "section missing");
    const auto& vars = j.at("variables");
    reject_unknown(vars, {"n", "m"}, "variables");
    if (!vars.contains("n") || !vars.contains("m"))
        cfg_fail("variables", "need 'n' and 'm'");
    c.n = vars.at("n").get<std::size_t>();
    c.m = vars.at("m").get<std::size_t>();

    if (!j.contains("dynamics")) cfg_fail("dynamics", "section missing");
    const auto& dyn = j.at("dynamics");
    reject_unknown(dyn, {"f", "h"}, "dynamics");
    if (!dyn.contains("f") || !dyn.contains("h"))
        cfg_fail("dynamics", "need 'f' and 'h'");
    c.f_text = dyn.at("f").get<std::vector<std::string>>();
    c.h_text = dyn.at("h").get<std::vector<std::string>>();

    if (!j.contains("sets")) cfg_fail("sets", "section missing");
    const auto& sets = j.at("sets");
    reject_unknown(sets, {"X", "E", "E_T", "L"}, "sets");
    for (const char* name : {"X", "E", "E_T", "L"})
        if (!sets.contains(name))
            cfg_fail("sets", std::string("missing set '") + name + "'");
    c.X = parse_set(sets.at("X"), "sets.X");
    c.E = parse_set(sets.at("E"), "sets.E");
    c.E_T = parse_set(sets.at("E_T"), "sets.E_T");
    c.L = parse_set(sets.at("L"), "sets.L");

    if (j.contains("horizon")) c.horizon = j.at("horizon").get<double>();
    if (j.contains("degree")) c.degree = j.at("degree").get<unsigned>();

    if (j.contains("selector")) {
        const auto& sel = j.at("selector");
        reject_unknown(sel, {"k", "grid_e", "grid_l"}, "selector");
        if (sel.contains("k")) c.selector_k = sel.at("k").get<unsigned>();
        if (sel.contains("grid_e"))
            c.selector_grid_e = sel.at("grid_e").get<int>();
        if (sel.contains("grid_l"))
            c.selector_grid_l = sel.at("grid_l").get<int>();
    }
    if (j.contains("validator")) {
        const auto& val = j.at("validator");
        reject_unknown(val,
                       {"steps", "x0_per_dim", "grid_e", "grid_l", "seed",
                        "threads"},
                       "validator");
        if (val.contains("steps"))
            c.validator.steps = val.at("steps").get<int>();
        if (val.contains("x0_per_dim"))
            c.validator.x0_per_dim = val.at("x0_per_dim").get<int>();
        if (val.contains("grid_e"))
            c.validator.e_count = val.at("grid_e").get<int>();
        if (val.contains("grid_l"))
            c.validator.l_count = val.at("grid_l").get<int>();
        if (val.contains("seed"))
            c.validator.seed = val.at("seed").get<std::uint64_t>();
        if (val.contains("threads"))
            c.validator.threads = val.at("threads").get<unsigned>();
    }
    if (j.contains("output_dir"))
        c.output_dir = j.at("output_dir").get<std::string>();
    return c;
}

ProblemConfig ProblemConfig::load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw std::invalid_argument("config error: cannot read '" + path + "'");
    std::string text((std::istreambuf_iterator<char>(in)),
                     std::istreambuf_iterator<char>());
    return parse(text);
}

ObserverProblem ProblemConfig::to_problem() const {
    const auto reg = ObserverProblem::make_registry(n, m);
    std::vector<std::size_t> xv, ev, lv;
    for (std::size_t i = 0; i < n; ++i) xv.push_back(1 + i);
    for (std::size_t i = 0; i < n; ++i) ev.push_back(1 + n + i);
    for (std::size_t i = 0; i < n * m; ++i) lv.push_back(1 + 2 * n + i);
    return ObserverProblem::create(
        n, m, f_text, h_text, build_set(X, reg, xv, "sets.X"),
        build_set(E, reg, ev, "sets.E"), build_set(E_T, reg, ev, "sets.E_T"),
        build_set(L, reg, lv, "sets.L"), horizon);
}

std::string ProblemConfig::resolved_json() const {
    json j;
    j["variables"] = {{"n", n}, {"m", m}};
    j["dynamics"] = {{"f", f_text}, {"h", h_text}};
    j["sets"] = {{"X", set_to_json(X)},
                 {"E", set_to_json(E)},
                 {"E_T", set_to_json(E_T)},
                 {"L", set_to_json(L)}};
    j["horizon"] = horizon;
    j["degree"] = degree;
    j["selector"] = {{"k", selector_k},
                     {"grid_e", selector_grid_e},
                     {"grid_l", selector_grid_l}};
    j["validator"] = {{"steps", validator.steps},
                      {"x0_per_dim", validator.x0_per_dim},
                      {"grid_e", validator.e_count},
                      {"grid_l", validator.l_count},
                      {"seed", validator.seed},
                      {"threads", validator.threads}};
    j["output_dir"] = output_dir;
    return j.dump(1) + "\n";
}

} // namespace obsyn
