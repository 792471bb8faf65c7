#pragma once

#include <cstdint>
#include <limits>
#include <vector>

#include "refract/model.hpp"

namespace refract {

struct SimConfig {
    int n_paths = 10000;
    std::uint64_t seed = 1;
    // Horizon; 0 selects ln(1000)/δ.
    double t_max = 0.0;
    // Euler step, used only when a Gaussian part is simulated.
    double dt = 1e-3;
    // Jumps below this size are dropped; required for infinite activity, 0 means none.
    double truncation_eps = 0.0;
    // Add the variance of the dropped jumps to σ².
    bool gaussian_compensation = false;
    // When positive, σB(t) is replaced by its compound Poisson substitute of jump size ε.
    double gaussian_substitute_eps = 0.0;
    int workers = 1;
};

struct PathRecord {
    double discounted_dividends = 0.0;
    double ruin_time = std::numeric_limits<double>::infinity();
    bool horizon_truncated = false;
};

struct McEstimate {
    double mean = 0.0;
    double std_error = 0.0;
    int n_paths = 0;
    double ruin_fraction = 0.0;
    std::uint64_t seed = 0;
    SimConfig config;
};

double default_horizon(double delta);

/// One path of U_b started at x0. b = +inf means no dividends are ever paid.
PathRecord simulate_path(const DividendProblem& problem, double b, double x0, std::uint64_t seed,
                         const SimConfig& config = {});

/// Paths use the streams (seed, 0), ..., (seed, n-1); the result is independent of the worker count.
McEstimate estimate_value(const DividendProblem& problem, double b, double x0, const SimConfig& config = {});

/// Same paths as estimate_value, returned individually.
std::vector<PathRecord> simulate_paths(const DividendProblem& problem, double b, double x0,
                                       const SimConfig& config = {});

} // namespace refract
