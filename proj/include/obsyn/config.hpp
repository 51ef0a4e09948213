#pragma once

#include "obsyn/observer.hpp"
#include "obsyn/validator.hpp"

#include <string>

namespace obsyn {

/// Parsed and fully-resolved problem configuration. Unknown keys are
/// rejected; every default that was applied appears in the resolved echo.
struct ProblemConfig {
    std::size_t n = 0, m = 0;
    std::vector<std::string> f_text, h_text;
    struct SetRecord {
        std::string type; // "box" or "ball"
        std::vector<double> lower, upper, center;
        double radius = 0.0;
    };
    SetRecord X, E, E_T, L;
    double horizon = 1.0;
    unsigned degree = 6;
    unsigned selector_k = 1000;
    int selector_grid_e = 201;
    int selector_grid_l = 101;
    ValidatorSettings validator;
    std::string output_dir = "out";

    static ProblemConfig load(const std::string& path);
    static ProblemConfig parse(const std::string& json_text);

    ObserverProblem to_problem() const;
    /// Full configuration echo including every applied default.
    std::string resolved_json() const;
};

} // namespace obsyn
