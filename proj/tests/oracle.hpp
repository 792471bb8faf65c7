#pragma once

// Reference integrals computed with Boost's double-exponential rules, independent of the
// library's own Gauss-Kronrod code.

#include <boost/math/quadrature/exp_sinh.hpp>
#include <boost/math/quadrature/tanh_sinh.hpp>

#include <cmath>
#include <functional>

namespace oracle {

inline double integrate(const std::function<double(double)>& f, double a, double b) {
    boost::math::quadrature::tanh_sinh<double> rule;
    return rule.integrate(f, a, b, 1e-13);
}

inline double integrate_to_infinity(const std::function<double(double)>& f, double a) {
    boost::math::quadrature::exp_sinh<double> rule;
    return rule.integrate([&](double t) { return f(a + t); }, 0.0, std::numeric_limits<double>::infinity(), 1e-13);
}

// 1 - e^{-z} - z without cancellation for small z.
inline double compensated_kernel(double z) {
    if (std::abs(z) < 1e-3) return -z * z / 2 + z * z * z / 6 - z * z * z * z / 24;
    return -std::expm1(-z) - z;
}

// aθ + ½σ²θ² - ∫(1 - e^{-θx} - θx 1{x<1}) π(x) dx
inline double psi(double a, double sigma, const std::function<double(double)>& density, double theta) {
    // Near 0 the kernel underflows before the density overflows; the product tends to 0 there.
    const double small = integrate(
        [&](double x) {
            const double v = compensated_kernel(theta * x) * density(x);
            return std::isfinite(v) ? v : 0.0;
        },
        0.0, 1.0);
    const double large = integrate_to_infinity([&](double x) { return -std::expm1(-theta * x) * density(x); }, 1.0);
    return a * theta + 0.5 * sigma * sigma * theta * theta - small - large;
}

} // namespace oracle
