#pragma once

#include <memory>

#include "refract/model.hpp"
#include "refract/scale.hpp"

namespace refract {

// Which representation of V above the threshold to use.
enum class AboveFormula {
    Auto,      // the closed form; the kernel form agrees with it and is much slower
    Closed,    // -α∫W* + [W(x) + α∫_b^x W*(x-y)W'(y)dy] / h(b)
    Integral,  // kernel form with u*(x, y) = W*(x)e^{-Ψy} - W*(x-y)
};

enum class Side { Left, Right };

struct ValueOptions {
    ScaleOptions scale;
    AboveFormula above = AboveFormula::Auto;
    // Construction fails when |V(b+) - V(b,b)| exceeds this fraction of V(b,b).
    double continuity_tolerance = 1e-3;
};

struct PastingReport {
    double continuity_gap = 0.0;
    double pasting_gap = 0.0;
};

/// V(x, b) for the strategy paying at rate α while the surplus exceeds b. Immutable.
class ThresholdValueFunction {
public:
    ThresholdValueFunction(const DividendProblem& problem, double b, ValueOptions options = {});
    /// Reuses scale functions of X and of Y = X - αt at q = δ.
    ThresholdValueFunction(const DividendProblem& problem, double b, ScaleFunction w, ScaleFunction w_star,
                           ValueOptions options = {});

    const DividendProblem& problem() const;
    const ScaleFunction& w() const;
    const ScaleFunction& w_star() const;
    double b() const;
    /// V(b, b).
    double v_at_b() const;
    /// h(b) = Ψ e^{Ψb} ∫_b^∞ e^{-Ψz} W'(z) dz, so that V(x) = W(x)/h(b) below b.
    double h() const;
    AboveFormula formula() const;

    double value(double x) const;
    /// V'(x); at x = b the side picks the one-sided derivative.
    double derivative(double x, Side side = Side::Left) const;
    double second_derivative(double x) const;

    /// ½σ²V'' + (a - drift_cut)V' + ∫[V(x-y) - V(x) + V'(x) y 1{y<1}]π(y)dy.
    double generator(double x, double drift_cut) const;
    double ide_residual(double x) const;
    PastingReport pasting() const;

private:
    struct Impl;
    std::shared_ptr<const Impl> impl_;
};

/// h(b) = Ψ ∫_0^∞ e^{-Ψu} W'(b+u) du for the scale function W of X at q = δ.
double threshold_normaliser(const ScaleFunction& w, double big_psi, double b);

double value_at_threshold(const DividendProblem& problem, double b);
double value(const DividendProblem& problem, double b, double x);
double value_derivative(const DividendProblem& problem, double b, double x, Side side = Side::Left);
double ide_residual(const DividendProblem& problem, double b, double x);
PastingReport pasting_report(const DividendProblem& problem, double b);

} // namespace refract
