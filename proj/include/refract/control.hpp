#pragma once

#include <optional>
#include <span>
#include <vector>

#include "refract/value.hpp"

namespace refract {

struct ControlOptions {
    ValueOptions value;
    int scan_points = 512;
    // The scan covers [0, bracket_factor / Φ(δ)].
    double bracket_factor = 30.0;
    // Grid points closer than this to the threshold are skipped by the HJB check.
    double exclusion_band = 1e-6;
    // Threads used for grid residuals; results do not depend on it.
    int workers = 1;
};

struct ThresholdSearch {
    double b_star = 0.0;
    // Number of strict local minima of h on the scan grid; more than one voids the CM certificate.
    int local_minima = 0;
    bool unimodal() const { return local_minima <= 1; }
};

/// Minimises h(b) = Ψ ∫_0^∞ e^{-Ψu} W'(b+u) du, which maximises V(x, b) for every x ≤ b.
/// At an interior minimum W'(b*) = h(b*), i.e. V'(b*-, b*) = 1.
ThresholdSearch locate_threshold(const DividendProblem& problem, const ScaleFunction& w,
                                 const ControlOptions& options = {});
double optimal_threshold(const DividendProblem& problem, const ControlOptions& options = {});

struct PolicySolution {
    double b_star = 0.0;
    ThresholdValueFunction value_fn;
    std::vector<double> grid;
    std::vector<double> hjb;     // HJB residual per grid point (NaN inside the exclusion band)
    std::vector<double> vprime;  // V'(x) per grid point
    double hjb_sup_residual = 0.0;
    bool concave_on_grid = false;
    double pasting_gap = 0.0;
    double continuity_gap = 0.0;
    bool cm_certified = false;
    bool unimodal = true;
};

/// max_{r ∈ {0, α}} (1 - V'(x)) r + ΓV(x) - δV(x).
double hjb_residual(const ThresholdValueFunction& value_fn, double x);
/// 0 where V' > 1, α otherwise (ties go to α).
double bang_bang_rate(const ThresholdValueFunction& value_fn, double x);
/// V' nonincreasing along the grid within 1e-8 (1 + |V'|).
bool concavity_report(const ThresholdValueFunction& value_fn, std::span<const double> grid);

/// 200 points on (0, b + 30/Ψ(δ)].
std::vector<double> default_grid(const DividendProblem& problem, double b);

/// Diagnostics of the threshold strategy at an arbitrary b.
PolicySolution assess(const DividendProblem& problem, double b, std::span<const double> grid,
                      const ControlOptions& options = {});
/// Locates b* and assesses it; an empty grid selects default_grid.
PolicySolution solve(const DividendProblem& problem, std::span<const double> grid = {},
                     const ControlOptions& options = {});

} // namespace refract
