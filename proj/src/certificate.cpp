#include "obsyn/certificate.hpp"

#include "obsyn/semialg.hpp"
#include "obsyn/sos.hpp"
#include "obsyn/util.hpp"

#include <json.hpp>

#include <fstream>
#include <stdexcept>

namespace obsyn {

using json = nlohmann::ordered_json;

namespace {

json poly_to_json(const Polynomial& p) {
    json terms = json::array();
    for (const auto& [m, c] : p.terms()) {
        json term = json::array();
        json exps = json::array();
        for (auto e : m.exps) exps.push_back(e);
        term.push_back(exps);
        term.push_back(format_double(c));
        terms.push_back(term);
    }
    return terms;
}

Polynomial poly_from_json(const json& j, const RegistryPtr& reg) {
    Polynomial::TermMap terms;
    for (const auto& t : j) {
        Monomial m(reg->size());
        const auto& exps = t.at(0);
        if (exps.size() != reg->size())
            throw std::invalid_argument("polynomial term arity mismatch");
        for (std::size_t i = 0; i < reg->size(); ++i)
            m.exps[i] = exps.at(i).get<std::uint32_t>();
        terms[m] += std::stod(t.at(1).get<std::string>());
    }
    return Polynomial::from_terms(reg, std::move(terms));
}

json monomial_to_json(const Monomial& m) {
    json exps = json::array();
    for (auto e : m.exps) exps.push_back(e);
    return exps;
}

Monomial monomial_from_json(const json& j, std::size_t nreg) {
    Monomial m(nreg);
    if (j.size() != nreg)
        throw std::invalid_argument("monomial arity mismatch");
    for (std::size_t i = 0; i < nreg; ++i)
        m.exps[i] = j.at(i).get<std::uint32_t>();
    return m;
}

json set_to_json(const SemialgebraicSet& s) {
    json factors = json::array();
    for (const auto& f : s.factors()) {
        json jf;
        jf["kind"] = f.kind == SetFactor::Kind::box ? "box" : "ball";
        jf["vars"] = f.vars;
        if (f.kind == SetFactor::Kind::box) {
            json lo = json::array(), hi = json::array();
            for (double v : f.lower) lo.push_back(format_double(v));
            for (double v : f.upper) hi.push_back(format_double(v));
            jf["lower"] = lo;
            jf["upper"] = hi;
        } else {
            json c = json::array();
            for (double v : f.center) c.push_back(format_double(v));
            jf["center"] = c;
            jf["radius"] = format_double(f.radius);
        }
        factors.push_back(jf);
    }
    return factors;
}

SemialgebraicSet set_from_json(const json& j, const RegistryPtr& reg) {
    SemialgebraicSet out;
    bool first = true;
    for (const auto& jf : j) {
        std::vector<std::size_t> vars =
            jf.at("vars").get<std::vector<std::size_t>>();
        SemialgebraicSet part;
        if (jf.at("kind") == "box") {
            std::vector<double> lo, hi;
            for (const auto& v : jf.at("lower"))
                lo.push_back(std::stod(v.get<std::string>()));
            for (const auto& v : jf.at("upper"))
                hi.push_back(std::stod(v.get<std::string>()));
            part = SemialgebraicSet::make_box(reg, vars, lo, hi);
        } else {
            std::vector<double> c;
            for (const auto& v : jf.at("center"))
                c.push_back(std::stod(v.get<std::string>()));
            part = SemialgebraicSet::make_ball(
                reg, vars, c, std::stod(jf.at("radius").get<std::string>()));
        }
        out = first ? part : SemialgebraicSet::product(out, part);
        first = false;
    }
    return out;
}

const char* status_token(SolveStatus s) { return status_name(s); }

SolveStatus status_from_token(const std::string& s) {
    for (auto st : {SolveStatus::optimal, SolveStatus::infeasible,
                    SolveStatus::unbounded, SolveStatus::max_iter,
                    SolveStatus::numerical_failure})
        if (s == status_name(st)) return st;
    throw std::invalid_argument("unknown solver status '" + s + "'");
}

} // namespace

std::string certificate_to_json(const Certificate& c) {
    json j;
    j["kind"] = "obsyn-certificate";
    j["fingerprint"] = to_hex(c.problem_fingerprint);
    j["degree"] = c.degree;
    j["objective"] = format_double(c.objective);
    json res = json::array();
    for (double r : c.reconstruction_residuals) res.push_back(format_double(r));
    j["reconstruction_residuals"] = res;
    j["solver"] = {
        {"status", status_token(c.solver_status)},
        {"iterations", c.solver_iterations},
        {"primal_eq", format_double(c.solver_residuals.primal_eq)},
        {"dual", format_double(c.solver_residuals.dual)},
        {"gap", format_double(c.solver_residuals.gap)},
        {"min_eig", format_double(c.solver_residuals.min_eig)},
    };
    j["registry"] = c.v.registry() ? c.v.registry()->names()
                                   : std::vector<std::string>{};
    j["v"] = poly_to_json(c.v);
    j["w"] = poly_to_json(c.w);
    return j.dump(1) + "\n";
}

Certificate certificate_from_json(const std::string& text) {
    const json j = json::parse(text);
    if (j.at("kind") != "obsyn-certificate")
        throw std::invalid_argument("not a certificate file");
    Certificate c;
    c.problem_fingerprint =
        std::stoull(j.at("fingerprint").get<std::string>(), nullptr, 16);
    c.degree = j.at("degree").get<unsigned>();
    c.objective = std::stod(j.at("objective").get<std::string>());
    for (std::size_t i = 0; i < 4; ++i)
        c.reconstruction_residuals[i] = std::stod(
            j.at("reconstruction_residuals").at(i).get<std::string>());
    const auto& s = j.at("solver");
    c.solver_status = status_from_token(s.at("status").get<std::string>());
    c.solver_iterations = s.at("iterations").get<int>();
    c.solver_residuals.primal_eq = std::stod(s.at("primal_eq").get<std::string>());
    c.solver_residuals.dual = std::stod(s.at("dual").get<std::string>());
    c.solver_residuals.gap = std::stod(s.at("gap").get<std::string>());
    c.solver_residuals.min_eig = std::stod(s.at("min_eig").get<std::string>());
    auto reg = VariableRegistry::create(
        j.at("registry").get<std::vector<std::string>>());
    c.v = poly_from_json(j.at("v"), reg);
    c.w = poly_from_json(j.at("w"), reg);
    return c;
}

void save_certificate(const Certificate& c, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << certificate_to_json(c);
}

Certificate load_certificate(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read " + path);
    std::string text((std::istreambuf_iterator<char>(in)),
                     std::istreambuf_iterator<char>());
    return certificate_from_json(text);
}

// ------------------------------------------------------- layout manifest

std::string layout_to_json(const DualProgramLayout& l) {
    json j;
    j["kind"] = "obsyn-layout";
    j["fingerprint"] = to_hex(l.problem_fingerprint);
    j["degree"] = l.degree;
    j["lie_budget"] = l.lie_budget;
    j["n"] = l.n;
    j["m"] = l.m;
    j["registry"] = l.registry->names();
    json centers = json::array(), scales = json::array();
    for (double v : l.centers) centers.push_back(format_double(v));
    for (double v : l.scales) scales.push_back(format_double(v));
    j["centers"] = centers;
    j["scales"] = scales;
    j["jacobian"] = format_double(l.jacobian);
    json vb = json::array(), wb = json::array();
    for (const auto& m : l.v_basis) vb.push_back(monomial_to_json(m));
    for (const auto& m : l.w_basis) wb.push_back(monomial_to_json(m));
    j["v_basis"] = vb;
    j["w_basis"] = wb;
    json phi = json::array();
    for (const auto& c : l.phi_scaled) phi.push_back(poly_to_json(c));
    j["phi_scaled"] = phi;
    j["x_scaled"] = set_to_json(l.x_scaled);
    json mom = json::array();
    for (double v : l.objective_moments) mom.push_back(format_double(v));
    j["objective_moments"] = mom;
    json cons = json::array();
    for (const auto& c : l.constraints) {
        json jc;
        jc["name"] = c.name;
        jc["vars"] = c.module.vars;
        jc["budget"] = c.module.budget;
        jc["row_offset"] = c.row_offset;
        jc["block_ids"] = c.block_ids;
        json hs = json::array(), bases = json::array();
        for (const auto& h : c.module.multiplier_h) hs.push_back(poly_to_json(h));
        for (const auto& b : c.module.bases) {
            json jb = json::array();
            for (const auto& m : b) jb.push_back(monomial_to_json(m));
            bases.push_back(jb);
        }
        jc["multiplier_h"] = hs;
        jc["bases"] = bases;
        json sup = json::array();
        for (const auto& m : c.support) sup.push_back(monomial_to_json(m));
        jc["support"] = sup;
        cons.push_back(jc);
    }
    j["constraints"] = cons;
    return j.dump(1) + "\n";
}

DualProgramLayout layout_from_json(const std::string& text) {
    const json j = json::parse(text);
    if (j.at("kind") != "obsyn-layout")
        throw std::invalid_argument("not a layout manifest");
    DualProgramLayout l;
    l.problem_fingerprint =
        std::stoull(j.at("fingerprint").get<std::string>(), nullptr, 16);
    l.degree = j.at("degree").get<unsigned>();
    l.lie_budget = j.at("lie_budget").get<unsigned>();
    l.n = j.at("n").get<std::size_t>();
    l.m = j.at("m").get<std::size_t>();
    l.registry = VariableRegistry::create(
        j.at("registry").get<std::vector<std::string>>());
    const std::size_t nreg = l.registry->size();
    for (const auto& v : j.at("centers"))
        l.centers.push_back(std::stod(v.get<std::string>()));
    for (const auto& v : j.at("scales"))
        l.scales.push_back(std::stod(v.get<std::string>()));
    l.jacobian = std::stod(j.at("jacobian").get<std::string>());
    for (const auto& m : j.at("v_basis"))
        l.v_basis.push_back(monomial_from_json(m, nreg));
    for (const auto& m : j.at("w_basis"))
        l.w_basis.push_back(monomial_from_json(m, nreg));
    for (const auto& c : j.at("phi_scaled"))
        l.phi_scaled.push_back(poly_from_json(c, l.registry));
    l.x_scaled = set_from_json(j.at("x_scaled"), l.registry);
    for (const auto& v : j.at("objective_moments"))
        l.objective_moments.push_back(std::stod(v.get<std::string>()));
    const auto& cons = j.at("constraints");
    if (cons.size() != 4)
        throw std::invalid_argument("layout must carry four constraints");
    for (std::size_t ci = 0; ci < 4; ++ci) {
        const auto& jc = cons.at(ci);
        ConstraintLayout& c = l.constraints[ci];
        c.name = jc.at("name").get<std::string>();
        c.module.vars = jc.at("vars").get<std::vector<std::size_t>>();
        c.module.budget = jc.at("budget").get<unsigned>();
        c.row_offset = jc.at("row_offset").get<int>();
        c.block_ids = jc.at("block_ids").get<std::vector<int>>();
        for (const auto& h : jc.at("multiplier_h"))
            c.module.multiplier_h.push_back(poly_from_json(h, l.registry));
        for (const auto& jb : jc.at("bases")) {
            std::vector<Monomial> b;
            for (const auto& m : jb) b.push_back(monomial_from_json(m, nreg));
            c.module.bases.push_back(std::move(b));
        }
        for (const auto& m : jc.at("support"))
            c.support.push_back(monomial_from_json(m, nreg));
    }
    return l;
}

void save_layout(const DualProgramLayout& l, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << layout_to_json(l);
}

DualProgramLayout load_layout(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read " + path);
    std::string text((std::istreambuf_iterator<char>(in)),
                     std::istreambuf_iterator<char>());
    return layout_from_json(text);
}

} // namespace obsyn
