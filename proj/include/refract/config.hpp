#pragma once

#include <optional>
#include <string>

#include "refract/model.hpp"

namespace refract {

// One problem per document:
//   { "model": { "premium" | "drift": x, "sigma": s, "jumps": [ {"family": ..., ...}, ... ] },
//     "delta": d, "alpha": a, "allow_barrier": false }
// Families: exp_mixture {terms: [{weight, rate}], intensity}, gamma {shape, scale, intensity},
// pareto {index, intensity}, weibull {scale, shape, intensity},
// tempered_stable {intensity, stability, tilt}, tabulated {x, density}; each may carry "cutoff".
struct ProblemConfig {
    LevyModel model;
    std::optional<double> delta;
    std::optional<double> alpha;
    bool allow_barrier = false;
};

ProblemConfig parse_config(const std::string& text);
ProblemConfig load_config(const std::string& path);

/// Needs delta and alpha.
DividendProblem make_problem(const ProblemConfig& config);

/// Config text for a model (written with the triplet drift), reusable by every command.
std::string write_config(const LevyModel& model, std::optional<double> delta = std::nullopt,
                         std::optional<double> alpha = std::nullopt, bool allow_barrier = false);

} // namespace refract
