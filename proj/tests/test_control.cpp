#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "refract/control.hpp"
#include "refract/error.hpp"

#include <cmath>
#include <functional>
#include <vector>

using namespace refract;

namespace {

JumpMeasure exp_jumps() { return JumpMeasure({JumpComponent{ExpMixtureJumps{{{1.0, 1.0}}, 1.0}, 0.0}}); }
DividendProblem cl_problem(double delta = 0.1) {
    return DividendProblem(LevyModel({DriftKind::Premium, 2.0}, 0.0, exp_jumps()), delta, 0.5);
}

ErrorCode code_of(const std::function<void()>& f) {
    try {
        f();
    } catch (const Error& e) {
        return e.code();
    }
    return ErrorCode::Validation;
}

double grid_argmax(const DividendProblem& p, double x0) {
    double best_b = 0.0;
    double best = -1.0;
    for (int i = 0; i <= 200; ++i) {
        const double b = 0.05 * i;
        const double v = value(p, b, x0);
        if (v > best) {
            best = v;
            best_b = b;
        }
    }
    return best_b;
}

} // namespace

TEST_CASE("Brownian motion with drift: threshold from the two roots") {
    // ψ(θ) = θ + ½θ²; W = Σ e^{θᵢx}/(1 + θᵢ) over the roots of ½θ² + θ - 0.1 = 0.
    const DividendProblem p(LevyModel({DriftKind::Triplet, 1.0}, 1.0, JumpMeasure{}), 0.1, 0.5);
    const double t1 = -1.0 + std::sqrt(1.2);
    const double t2 = -1.0 - std::sqrt(1.2);
    const double c1 = 1.0 / (1.0 + t1);
    const double c2 = 1.0 / (1.0 + t2);
    // Ψ solves ½θ² + ½θ - 0.1 = 0.
    const double big_psi = -0.5 + std::sqrt(0.25 + 0.2);
    CHECK(p.psi_delta() == doctest::Approx(big_psi).epsilon(1e-12));
    // h(b) ∝ Σ cᵢθᵢe^{θᵢb}/(Ψ - θᵢ); h'(b*) = 0 in closed form.
    const double b_star = std::log(-c2 * t2 * t2 * (big_psi - t1) / (c1 * t1 * t1 * (big_psi - t2))) / (t1 - t2);
    CHECK(b_star > 0.0);
    const auto sol = solve(p);
    CHECK(sol.b_star == doctest::Approx(b_star).epsilon(1e-8));
    // The barrier optimum, argmin W', lies further out.
    const double barrier = std::log(-c2 * t2 * t2 / (c1 * t1 * t1)) / (t1 - t2);
    CHECK(sol.b_star < barrier);
    CHECK(sol.value_fn.derivative(sol.b_star, Side::Left) == doctest::Approx(1.0).epsilon(1e-8));
    CHECK(sol.pasting_gap <= 1e-4);
    CHECK(sol.hjb_sup_residual <= 1e-4 * 0.5);
}

TEST_CASE("grid search over b agrees with the located threshold") {
    const auto p = cl_problem();
    const double b_star = optimal_threshold(p);
    CHECK(b_star > 0.0);
    for (double x0 : {1.0, 2.0, 5.0}) CHECK(std::abs(grid_argmax(p, x0) - b_star) <= 0.05 + 1e-12);
}

TEST_CASE("solved CL problem") {
    const auto p = cl_problem();
    const auto sol = solve(p);
    CHECK(sol.hjb_sup_residual <= 1e-4 * 0.5);
    CHECK(sol.concave_on_grid);
    CHECK(sol.cm_certified);
    CHECK(sol.unimodal);
    CHECK(sol.grid.size() == 200);
    for (std::size_t i = 0; i < sol.grid.size(); ++i) {
        const double x = sol.grid[i];
        const double vp = sol.vprime[i];
        if (x < sol.b_star) CHECK(vp >= 1.0 - 1e-8);
        if (x > sol.b_star) CHECK(vp <= 1.0 + 1e-8);
    }
    CHECK(bang_bang_rate(sol.value_fn, 0.5 * sol.b_star) == 0.0);
    CHECK(bang_bang_rate(sol.value_fn, 2.0 * sol.b_star) == 0.5);
    CHECK(bang_bang_rate(sol.value_fn, sol.b_star) == 0.5);
    CHECK(std::abs(hjb_residual(sol.value_fn, 0.5 * sol.b_star)) <= 1e-4 * 0.5);
    CHECK(std::abs(hjb_residual(sol.value_fn, 2.0 * sol.b_star)) <= 1e-4 * 0.5);
}

TEST_CASE("a wrong threshold fails the HJB check") {
    const auto p = cl_problem();
    const double b_star = optimal_threshold(p);
    const auto off = assess(p, b_star + 1.0, {});
    CHECK(off.hjb_sup_residual > 10 * 1e-4 * 0.5);
    double top = -1.0;
    for (double r : off.hjb) {
        if (!std::isnan(r)) top = std::max(top, r);
    }
    CHECK(top > 10 * 1e-4 * 0.5);
    for (double x0 : {1.0, 2.0, 5.0}) CHECK(value(p, b_star + 1.0, x0) < value(p, b_star, x0));
}

TEST_CASE("threshold at zero for heavy discounting") {
    // 2θ² + (1 - q)θ - q = 0 gives W; b* = 0 exactly when h(0) ≥ W'(0+) = (1 + q)/4.
    const double q = 5.0;
    const double disc = std::sqrt((1.0 - q) * (1.0 - q) + 8.0 * q);
    const auto p = cl_problem(q);
    const double big_psi = p.psi_delta();
    double h0 = 0.0;
    for (double r : {(q - 1.0 + disc) / 4.0, (q - 1.0 - disc) / 4.0}) {
        const double slope = 2.0 - 1.0 / ((1.0 + r) * (1.0 + r));
        h0 += big_psi * r / slope / (big_psi - r);
    }
    REQUIRE(h0 >= (1.0 + q) / 4.0);
    CHECK(optimal_threshold(p) == 0.0);
}

TEST_CASE("concavity for a three-term mixture") {
    const JumpMeasure j({JumpComponent{ExpMixtureJumps{{{0.5, 0.5}, {0.3, 2.0}, {0.2, 6.0}}, 1.0}, 0.0}});
    const DividendProblem p(LevyModel({DriftKind::Premium, 2.0}, 0.0, j), 0.1, 0.5);
    const auto sol = solve(p);
    CHECK(sol.cm_certified);
    CHECK(sol.concave_on_grid);
    CHECK(concavity_report(sol.value_fn, default_grid(p, sol.b_star)));
}

TEST_CASE("a tabulated density is not certified") {
    // Flat, then a steep drop: decreasing but not convex.
    const TabulatedJumps tab{{0.0, 1.0, 1.5, 3.0}, {0.5, 0.5, 0.1, 0.05}};
    const DividendProblem p(LevyModel({DriftKind::Premium, 2.0}, 0.0, JumpMeasure({JumpComponent{tab, 0.0}})), 0.1,
                            0.5);
    std::vector<double> grid;
    for (int i = 1; i <= 12; ++i) grid.push_back(0.5 * i);
    const auto sol = solve(p, grid);
    CHECK_FALSE(sol.cm_certified);
    CHECK(sol.b_star > 0.0);
    // Inversion for compactly supported jumps is only good to about 1e-6, so the residual is coarse.
    CHECK(sol.hjb_sup_residual < 0.05);
}

TEST_CASE("errors") {
    const auto p = cl_problem();
    const ThresholdValueFunction v(p, 1.0);
    const double two[] = {0.5, 1.0};
    CHECK(code_of([&] { (void)concavity_report(v, two); }) == ErrorCode::Domain);
    CHECK(code_of([&] { (void)hjb_residual(v, 0.0); }) == ErrorCode::Domain);
    CHECK(code_of([&] { (void)bang_bang_rate(v, -1.0); }) == ErrorCode::Domain);
    const double unsorted[] = {1.0, 0.5, 2.0};
    CHECK(code_of([&] { (void)assess(p, 1.0, unsorted); }) == ErrorCode::Domain);
    const DividendProblem barrier(LevyModel({DriftKind::Premium, 2.0}, 0.0, exp_jumps()), 0.1, 2.0, true);
    CHECK(code_of([&] { (void)optimal_threshold(barrier); }) == ErrorCode::DegenerateModel);
}
