#pragma once

#include <memory>
#include <optional>
#include <span>
#include <vector>

#include "refract/model.hpp"

namespace refract {

enum class ScaleBackend { Rational, NumericInversion };

const char* to_string(ScaleBackend b);

struct ScaleOptions {
    // Force a backend; NumericInversion is always available, Rational only for rational transforms.
    std::optional<ScaleBackend> backend;
    // Spacing of the numeric backend's interpolation grid near the origin. Nodes sit at equal
    // steps of 16 asinh(x/16), so the spacing grows like x/16 times this far out.
    double cache_step = 1.0 / 128.0;
    // Below this x the numeric backend interpolates in log x, with this step in log x.
    double log_grid_below = 0.125;
    double log_step = 1.0 / 128.0;
    // Relative agreement required between the two Talbot orders.
    double agreement = 1e-8;
};

// W(x) = Σ coef · e^{rate x} on x ≥ 0.
struct ExpComponent {
    double rate = 0.0;
    double coef = 0.0;
};

/// q-scale function W^(q) of a spectrally negative Lévy model, with W', W'', Z and ∫W.
/// Immutable apart from an internal, idempotent interpolation cache; safe to share across threads.
class ScaleFunction {
public:
    ScaleFunction(const LevyModel& model, double q, ScaleOptions options = {});

    double q() const;
    double phi() const;
    ScaleBackend backend() const;
    const LevyModel& model() const;

    double w(double x) const;
    double w_prime(double x) const;
    /// NotDifferentiable unless the backend is rational or σ > 0.
    double w_second(double x) const;
    bool has_second() const;
    /// ∫_0^x W(y) dy.
    double w_bar(double x) const;
    double z(double x) const;

    /// W(0+): 1/c for bounded variation, 0 otherwise.
    double w_zero() const;
    /// W'(0+), possibly +inf.
    double w_prime_zero() const;

    /// Rough relative accuracy of the values: roundoff for the rational backend, the
    /// inversion noise floor otherwise (much larger for compactly supported jumps).
    double accuracy() const;

    /// Exponential terms of W (rational backend only; empty otherwise).
    std::span<const ExpComponent> components() const;

    /// ψ'(Φ(q)), so that W(x) e^{-Φx} → 1/ψ'(Φ).
    double phi_slope() const;
    /// R(x) = e^{Φx}/ψ'(Φ) - W(x), what is left of W after its growing exponential, with R' and
    /// ∫_0^x R. The numeric backend inverts R's own transform, so R keeps its absolute accuracy
    /// where W is huge. For x < 0, R(x) = e^{Φx}/ψ'(Φ).
    double remainder(double x) const;
    double remainder_prime(double x) const;
    double remainder_bar(double x) const;

private:
    struct Impl;
    std::shared_ptr<const Impl> impl_;
};

ScaleFunction make_scale(const LevyModel& model, double q, ScaleOptions options = {});

/// W(x)/W(a) for 0 ≤ x ≤ a.
double exit_probability(const ScaleFunction& w, double x, double a);

/// Largest relative error of ∫_0^∞ e^{-θx} W(x) dx against 1/(ψ(θ) - q) over the grid.
double laplace_roundtrip_error(const ScaleFunction& w, std::span<const double> thetas);

} // namespace refract
