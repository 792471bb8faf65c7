#pragma once

#include "refract/model.hpp"

namespace refract {

struct ApproxReport {
    int n_terms = 0;
    double epsilon = 0.0;
    // max |π_n - π| / π on the probe grid (0 when not applicable).
    double sup_rel_error = 0.0;
    // max over θ in [0, 10] of |ψ_n(θ) - ψ(θ)| / (1 + |ψ(θ)|).
    double laplace_exponent_gap = 0.0;
};

struct FitOptions {
    double probe_lo = 0.01;
    double probe_hi = 100.0;
    int probe_points = 400;
};

struct FittedMixture {
    ExpMixtureJumps mixture;
    ApproxReport report;
};

struct ApproxModel {
    LevyModel model;
    ApproxReport report;
};

/// n-term exponential mixture from a log-spaced discretisation of the Bernstein measure of π.
FittedMixture fit_hyperexponential(const JumpFamily& family, int n, const FitOptions& options = {});

/// Replaces every jump component by its fit; the triplet drift a is kept.
ApproxModel fit_model(const LevyModel& model, int n, const FitOptions& options = {});

// Drift c_ε and rate λ_ε of downward jumps of size ε that replace σB(t).
struct CompoundPoissonSubstitute {
    double drift = 0.0;
    double rate = 0.0;
    double size = 0.0;
};

CompoundPoissonSubstitute gaussian_to_compound_poisson(double sigma, double eps);

/// (a_n, 0, Π_n) with Π_n(x, ∞) = Π(x, ∞) + ½σ²n²e^{-nx} and a_n = a + ½σ²n(n+1)e^{-n}.
ApproxModel gaussian_exponential_approx(const LevyModel& model, int n);

/// π(x) 1{x > ε} with the same a.
ApproxModel truncate_small_jumps(const LevyModel& model, double eps);

/// max over θ in [0, 10] of |ψ_1(θ) - ψ_2(θ)| / (1 + |ψ_2(θ)|).
double laplace_exponent_gap(const LevyModel& approx, const LevyModel& target);

} // namespace refract
