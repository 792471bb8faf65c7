#pragma once

#include <complex>
#include <memory>
#include <optional>
#include <span>
#include <variant>
#include <vector>

#include "refract/rng.hpp"

namespace refract {

using cplx = std::complex<double>;

struct ExpTerm {
    double weight = 0.0;
    double rate = 0.0;
};

// Density λ Σ A_i β_i e^{-β_i x}; the weights need not sum to one.
struct ExpMixtureJumps {
    std::vector<ExpTerm> terms;
    double intensity = 1.0;
};

// λ x^{c-1} e^{-x/β} / (Γ(c) β^c), c in (0, 1].
struct GammaJumps {
    double shape = 1.0;
    double scale = 1.0;
    double intensity = 1.0;
};

// λ α (1+x)^{-α-1}.
struct ParetoJumps {
    double index = 1.0;
    double intensity = 1.0;
};

// λ c r x^{r-1} e^{-c x^r}, r in (0, 1).
struct WeibullJumps {
    double scale = 1.0;
    double shape = 0.5;
    double intensity = 1.0;
};

// λ x^{-1-α} e^{-βx}, α in [-1, 2).
struct TemperedStableJumps {
    double intensity = 1.0;
    double stability = 0.5;
    double tilt = 1.0;
};

// Log-linear interpolation between grid points, constant on [0, x_0], zero past the last point.
struct TabulatedJumps {
    std::vector<double> x;
    std::vector<double> density;
};

using JumpFamily = std::variant<ExpMixtureJumps, GammaJumps, ParetoJumps, WeibullJumps,
                                TemperedStableJumps, TabulatedJumps>;

// A family restricted to (cutoff, ∞).
struct JumpComponent {
    JumpFamily family;
    double cutoff = 0.0;
};

enum class Monotonicity { CompletelyMonotone, NotCompletelyMonotone, Unknown };

const char* to_string(Monotonicity m);

// Total mass and rate of one exponential pole of a rational jump transform.
struct ExpPole {
    double mass = 0.0;
    double rate = 0.0;
};

namespace detail {
class Family;
}

/// Sum of jump density components. Immutable; all queries are thread safe.
class JumpMeasure {
public:
    JumpMeasure() = default;
    explicit JumpMeasure(std::vector<JumpComponent> components);

    std::span<const JumpComponent> components() const { return components_; }
    bool empty() const { return components_.empty(); }

    double density(double x) const;
    /// Π(x, ∞) for x > 0; infinite at 0 for infinite-activity components.
    double tail(double x) const;
    double mass() const;
    bool finite_activity() const;
    /// ∫_lo^hi y^k π(y) dy; hi may be infinite. Returns +inf when divergent.
    double moment(int k, double lo, double hi) const;
    /// ∫_0^1 y π(y) dy (possibly infinite).
    double small_jump_mean() const;
    /// ∫_1^∞ y π(y) dy (possibly infinite).
    double large_jump_mean() const;
    /// ∫ (1 ∧ y²) π(y) dy.
    double integrability() const;

    /// ∫(1 - e^{-θx}) π(x) dx; requires a finite small-jump mean.
    double laplace(double theta) const;
    cplx laplace(cplx theta) const;
    /// ∫ x e^{-θx} π(x) dx for θ > 0 (θ = 0 gives the mean, possibly infinite).
    double laplace_slope(double theta) const;
    /// ∫(1 - e^{-θx} - θx 1{x<1}) π(x) dx; always finite for Re θ ≥ 0.
    double compensated(double theta) const;
    cplx compensated(cplx theta) const;
    /// d/dθ of compensated(θ) with the sign flipped: ∫ x(e^{-θx} - 1{x<1}) π(x) dx.
    double compensated_slope(double theta) const;

    Monotonicity monotonicity() const;
    /// Exponential poles when every component is an uncut exponential mixture.
    std::optional<std::vector<ExpPole>> exponential_poles() const;

    /// Draws a jump size from π / mass(); requires finite activity.
    double sample(Rng& rng) const;
    std::span<const double> component_masses() const { return masses_; }

    JumpMeasure truncated(double eps) const;
    JumpMeasure plus(const JumpMeasure& other) const;

private:
    std::vector<JumpComponent> components_;
    std::vector<std::shared_ptr<const detail::Family>> impl_;
    std::vector<double> masses_;
};

/// Classification of a single uncut family.
Monotonicity classify(const JumpFamily& family);

} // namespace refract
