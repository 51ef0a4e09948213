#pragma once

#include "obsyn/poly.hpp"
#include "obsyn/sdp.hpp"

#include <array>
#include <cstdint>
#include <string>

namespace obsyn {

/// Solved dual pair (v, w) in the problem's original coordinates, plus the
/// data needed to audit it: the relaxation degree, the objective value
/// (an upper bound on the Lebesgue volume of the feasible error/gain set),
/// per-constraint reconstruction residuals, and the problem fingerprint.
struct Certificate {
    Polynomial v, w;
    unsigned degree = 0;
    double objective = 0.0;
    std::array<double, 4> reconstruction_residuals{};
    std::uint64_t problem_fingerprint = 0;
    SolveStatus solver_status = SolveStatus::optimal;
    int solver_iterations = 0;
    SdpResiduals solver_residuals;
};

std::string certificate_to_json(const Certificate& c);
Certificate certificate_from_json(const std::string& text);
void save_certificate(const Certificate& c, const std::string& path);
Certificate load_certificate(const std::string& path);

} // namespace obsyn
