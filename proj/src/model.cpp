#include "refract/model.hpp"

#include "refract/error.hpp"

#include <cmath>
#include <cstdio>
#include <limits>

namespace refract {

namespace {
constexpr double inf = std::numeric_limits<double>::infinity();

std::string format_number(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.12g", v);
    return buf;
}
} // namespace

LevyModel::LevyModel(DriftSpec drift, double sigma, JumpMeasure jumps)
    : sigma_(sigma), jumps_(std::move(jumps)) {
    if (!std::isfinite(sigma) || sigma < 0.0) fail(ErrorCode::Validation, "sigma must be a finite number >= 0");
    if (!std::isfinite(drift.value)) fail(ErrorCode::Validation, "drift must be finite");
    small_mean_ = jumps_.small_jump_mean();
    finite_small_mean_ = std::isfinite(small_mean_);
    if (drift.kind == DriftKind::Premium) {
        if (!finite_small_mean_) {
            fail(ErrorCode::Validation, "a premium rate needs ∫_0^1 xπ(x)dx < ∞; give the triplet drift instead");
        }
        a_ = drift.value - small_mean_;
    } else {
        a_ = drift.value;
    }
    classify();
    if (sigma_ == 0.0 && jumps_.empty() && a_ <= 0.0) {
        fail(ErrorCode::DegenerateModel, "no jumps, no Gaussian part and nonpositive drift");
    }
    if (bounded_variation_ && c() <= 0.0) {
        fail(ErrorCode::DegenerateModel, "bounded-variation model needs a positive premium rate c");
    }
}

LevyModel::LevyModel(Unchecked, double a, double sigma, JumpMeasure jumps)
    : a_(a), sigma_(sigma), jumps_(std::move(jumps)) {
    small_mean_ = jumps_.small_jump_mean();
    finite_small_mean_ = std::isfinite(small_mean_);
    classify();
}

void LevyModel::classify() {
    bounded_variation_ = sigma_ == 0.0 && finite_small_mean_;
    if (finite_small_mean_) {
        mean_slope_ = a_ + small_mean_ - jumps_.laplace_slope(0.0);
    } else {
        mean_slope_ = a_ - jumps_.large_jump_mean();
    }
}

double LevyModel::c() const {
    if (!bounded_variation_) fail(ErrorCode::Domain, "premium rate c exists only for bounded variation");
    return a_ + small_mean_;
}

double LevyModel::psi(double theta) const {
    if (theta == 0.0) return 0.0;
    const double gauss = 0.5 * sigma_ * sigma_ * theta * theta;
    if (jumps_.empty()) return a_ * theta + gauss;
    if (finite_small_mean_) return (a_ + small_mean_) * theta + gauss - jumps_.laplace(theta);
    return a_ * theta + gauss - jumps_.compensated(theta);
}

cplx LevyModel::psi(cplx theta) const {
    if (theta == cplx(0.0)) return 0.0;
    const cplx gauss = 0.5 * sigma_ * sigma_ * theta * theta;
    if (jumps_.empty()) return a_ * theta + gauss;
    if (finite_small_mean_) return (a_ + small_mean_) * theta + gauss - jumps_.laplace(theta);
    return a_ * theta + gauss - jumps_.compensated(theta);
}

double LevyModel::psi_prime(double theta) const {
    if (theta == 0.0) return mean_slope_;
    const double gauss = sigma_ * sigma_ * theta;
    if (jumps_.empty()) return a_ + gauss;
    if (finite_small_mean_) return a_ + small_mean_ + gauss - jumps_.laplace_slope(theta);
    return a_ + gauss - jumps_.compensated_slope(theta);
}

double LevyModel::right_inverse(double q, double alpha) const {
    if (!(q >= 0.0)) fail(ErrorCode::Domain, "right inverse needs q >= 0");
    auto f = [&](double t) { return psi(t) - alpha * t - q; };
    auto fp = [&](double t) { return psi_prime(t) - alpha; };
    if (q == 0.0 && mean_slope_ - alpha >= 0.0) return 0.0;

    double hi = 1.0;
    while (f(hi) <= 0.0) {
        hi *= 2.0;
        if (hi > 1e15) fail(ErrorCode::Divergence, "Laplace exponent does not exceed the target level");
    }
    double lo = 0.0;
    // By convexity Newton iterates started where f > 0 decrease monotonically to the largest root.
    double t = hi;
    for (int iter = 0; iter < 200; ++iter) {
        const double ft = f(t);
        if (ft <= 0.0) {
            lo = std::max(lo, t);
            break;
        }
        hi = t;
        const double slope = fp(t);
        if (!(slope > 0.0)) break;
        const double next = t - ft / slope;
        if (!(next < t) || next <= lo) break;
        if (t - next <= 4e-16 * t) {
            t = next;
            break;
        }
        t = next;
    }
    // Bisection polish between the last point with f <= 0 and the best point with f > 0.
    if (f(t) > 0.0) {
        double left = lo;
        if (f(left) > 0.0) return left;
        double right = t;
        for (int iter = 0; iter < 200 && right - left > 2e-16 * right; ++iter) {
            const double mid = 0.5 * (left + right);
            if (mid <= left || mid >= right) break;
            if (f(mid) > 0.0) right = mid;
            else left = mid;
        }
        // Take whichever end has the smaller residual.
        return std::abs(f(left)) < std::abs(f(right)) ? left : right;
    }
    return t;
}

LevyModel LevyModel::shifted(double alpha) const { return LevyModel(Unchecked{}, a_ - alpha, sigma_, jumps_); }

std::string LevyModel::describe() const {
    std::string out = bounded_variation_ ? "bounded variation, c=" + format_number(c()) : "unbounded variation";
    out += ", CM: ";
    out += to_string(monotonicity());
    return out;
}

LevyModel build_model(double a, double sigma, JumpMeasure jumps) {
    return LevyModel({DriftKind::Triplet, a}, sigma, std::move(jumps));
}

double laplace_exponent(const LevyModel& model, double theta) {
    if (!(theta >= 0.0)) fail(ErrorCode::Domain, "Laplace exponent evaluated at negative θ");
    return model.psi(theta);
}

double right_inverse_phi(const LevyModel& model, double q) { return model.phi(q); }

Monotonicity is_completely_monotone(const JumpMeasure& jumps) { return jumps.monotonicity(); }

DividendProblem::DividendProblem(LevyModel model, double delta, double alpha, bool allow_barrier)
    : model_(std::move(model)), refracted_(model_.shifted(alpha)), delta_(delta), alpha_(alpha) {
    if (!std::isfinite(delta) || delta <= 0.0) fail(ErrorCode::Validation, "delta must be positive");
    if (!std::isfinite(alpha) || alpha <= 0.0) fail(ErrorCode::Validation, "alpha must be positive");
    if (model_.bounded_variation()) {
        const double c = model_.c();
        if (alpha > c) fail(ErrorCode::Validation, "alpha must be below the premium rate c");
        if (alpha == c) {
            if (!allow_barrier) {
                fail(ErrorCode::Validation, "alpha equal to c is the barrier limit; pass allow_barrier to accept it");
            }
            barrier_ = true;
        }
    }
    phi_delta_ = model_.phi(delta_);
    psi_delta_ = barrier_ ? inf : model_.right_inverse(delta_, alpha_);
}

double refracted_right_inverse(const DividendProblem& problem) { return problem.psi_delta(); }

} // namespace refract
