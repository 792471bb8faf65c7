#pragma once

#include <complex>
#include <optional>
#include <string>
#include <vector>

#include "refract/jumps.hpp"

namespace refract {

// How the user-supplied drift number is to be read.
enum class DriftKind {
    Triplet,  // a in ψ(θ) = aθ + ½σ²θ² - ∫(1 - e^{-θx} - θx 1{x<1}) π(x) dx
    Premium,  // c = a + ∫_0^1 x π(x) dx, the slope between jumps
};

struct DriftSpec {
    DriftKind kind = DriftKind::Triplet;
    double value = 0.0;
};

/// Spectrally negative Lévy process given by its triplet (a, σ, π). Immutable.
class LevyModel {
public:
    LevyModel(DriftSpec drift, double sigma, JumpMeasure jumps);

    double a() const { return a_; }
    double sigma() const { return sigma_; }
    const JumpMeasure& jumps() const { return jumps_; }

    bool bounded_variation() const { return bounded_variation_; }
    /// Premium rate a + ∫_0^1 xπ; DomainError for unbounded variation.
    double c() const;
    /// ψ'(0+) = E X(1); -inf when the jump mean diverges.
    double mean_slope() const { return mean_slope_; }

    double psi(double theta) const;
    cplx psi(cplx theta) const;
    double psi_prime(double theta) const;

    /// Φ(q) = sup{θ ≥ 0 : ψ(θ) = q}.
    double phi(double q) const { return right_inverse(q, 0.0); }
    /// sup{θ ≥ 0 : ψ(θ) - αθ = q}.
    double right_inverse(double q, double alpha) const;

    /// The model of X(t) - αt.
    LevyModel shifted(double alpha) const;

    Monotonicity monotonicity() const { return jumps_.monotonicity(); }
    /// True when 1/(ψ - q) is a rational function of θ.
    bool rational() const { return jumps_.empty() || jumps_.exponential_poles().has_value(); }

    std::string describe() const;

private:
    struct Unchecked {};
    LevyModel(Unchecked, double a, double sigma, JumpMeasure jumps);
    void classify();

    double a_ = 0.0;
    double sigma_ = 0.0;
    JumpMeasure jumps_;
    bool bounded_variation_ = false;
    bool finite_small_mean_ = false;
    double small_mean_ = 0.0;  // ∫_0^1 xπ when finite
    double mean_slope_ = 0.0;
};

/// Laplace exponent in triplet form; the named wrappers mirror the model methods.
LevyModel build_model(double a, double sigma, JumpMeasure jumps);
double laplace_exponent(const LevyModel& model, double theta);
double right_inverse_phi(const LevyModel& model, double q);
Monotonicity is_completely_monotone(const JumpMeasure& jumps);

/// Model, discount rate δ and dividend cap α.
class DividendProblem {
public:
    DividendProblem(LevyModel model, double delta, double alpha, bool allow_barrier = false);

    const LevyModel& model() const { return model_; }
    /// Y = X - αt.
    const LevyModel& refracted() const { return refracted_; }
    double delta() const { return delta_; }
    double alpha() const { return alpha_; }
    double phi_delta() const { return phi_delta_; }
    double psi_delta() const { return psi_delta_; }
    bool barrier_limit() const { return barrier_; }

private:
    LevyModel model_;
    LevyModel refracted_;
    double delta_;
    double alpha_;
    double phi_delta_;
    double psi_delta_;
    bool barrier_ = false;
};

double refracted_right_inverse(const DividendProblem& problem);

} // namespace refract
