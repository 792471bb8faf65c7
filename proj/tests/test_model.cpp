#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "oracle.hpp"
#include "refract/error.hpp"
#include "refract/model.hpp"

#include <cmath>

using namespace refract;

namespace {

JumpMeasure exp_jumps(double rate = 1.0, double intensity = 1.0) {
    return JumpMeasure({JumpComponent{ExpMixtureJumps{{{1.0, rate}}, intensity}, 0.0}});
}

LevyModel cramer_lundberg() { return LevyModel({DriftKind::Premium, 2.0}, 0.0, exp_jumps()); }

ErrorCode code_of(const std::function<void()>& f) {
    try {
        f();
    } catch (const Error& e) {
        return e.code();
    }
    FAIL("no error raised");
    return ErrorCode::Validation;
}

} // namespace

TEST_CASE("compound Poisson exponent matches the hand-derived formula") {
    const auto m = cramer_lundberg();
    CHECK(m.bounded_variation());
    CHECK(m.c() == doctest::Approx(2.0).epsilon(1e-14));
    for (double th : {0.0, 0.3, 1.0, 4.0, 25.0}) {
        CHECK(m.psi(th) == doctest::Approx(2.0 * th - th / (1.0 + th)).epsilon(1e-13));
    }
    CHECK(m.psi(0.0) == 0.0);
    CHECK(m.mean_slope() == doctest::Approx(1.0));
    CHECK(m.describe() == "bounded variation, c=2, CM: yes");
}

TEST_CASE("premium and triplet drift differ by the small-jump mean") {
    const auto p = cramer_lundberg();
    const double m1 = 1.0 - 2.0 / std::exp(1.0);  // ∫_0^1 x e^{-x} dx
    CHECK(p.a() == doctest::Approx(2.0 - m1).epsilon(1e-13));
    const LevyModel t({DriftKind::Triplet, p.a()}, 0.0, exp_jumps());
    CHECK(t.c() == doctest::Approx(2.0).epsilon(1e-13));
}

TEST_CASE("pure Brownian motion") {
    const LevyModel m({DriftKind::Triplet, 0.0}, std::sqrt(2.0), JumpMeasure{});
    CHECK_FALSE(m.bounded_variation());
    for (double th : {0.5, 2.0, 7.0}) CHECK(m.psi(th) == doctest::Approx(th * th).epsilon(1e-14));
    CHECK(code_of([&] { (void)m.c(); }) == ErrorCode::Domain);
}

TEST_CASE("right inverse against the exact quadratic root") {
    const auto m = cramer_lundberg();
    for (double q : {0.0, 0.1, 1.0, 10.0}) {
        // 2θ² + (2 - 1 - q)θ - q = 0
        const double b = 1.0 - q;
        const double root = (-b + std::sqrt(b * b + 8.0 * q)) / 4.0;
        CHECK(m.phi(q) == doctest::Approx(root).epsilon(1e-12));
    }
}

TEST_CASE("exponents of the other families against reference quadrature") {
    struct Case {
        JumpFamily family;
        std::function<double(double)> density;
    };
    const double g = std::tgamma(0.5);
    std::vector<Case> cases = {
        {GammaJumps{0.5, 2.0, 1.5}, [&](double x) { return 1.5 * std::pow(x, -0.5) * std::exp(-x / 2.0) / (g * std::sqrt(2.0)); }},
        {ParetoJumps{1.5, 2.0}, [](double x) { return 2.0 * 1.5 * std::pow(1.0 + x, -2.5); }},
        {WeibullJumps{1.0, 0.5, 1.0}, [](double x) { return 0.5 * std::pow(x, -0.5) * std::exp(-std::sqrt(x)); }},
        {TemperedStableJumps{1.0, 0.5, 1.0}, [](double x) { return std::pow(x, -1.5) * std::exp(-x); }},
        {TemperedStableJumps{0.7, 1.5, 2.0}, [](double x) { return 0.7 * std::pow(x, -2.5) * std::exp(-2.0 * x); }},
        {TemperedStableJumps{1.0, 1.0, 1.0}, [](double x) { return std::pow(x, -2.0) * std::exp(-x); }},
        {TemperedStableJumps{1.0, -0.5, 1.0}, [](double x) { return std::pow(x, -0.5) * std::exp(-x); }},
    };
    for (const auto& c : cases) {
        const LevyModel m({DriftKind::Triplet, 1.0}, 0.3, JumpMeasure({JumpComponent{c.family, 0.0}}));
        for (double th : {0.1, 1.0, 5.0, 30.0}) {
            const double ref = oracle::psi(1.0, 0.3, c.density, th);
            CHECK(m.psi(th) == doctest::Approx(ref).epsilon(1e-8));
        }
    }
}

TEST_CASE("gamma Laplace transform has a closed form") {
    const JumpMeasure j({JumpComponent{GammaJumps{0.5, 2.0, 1.5}, 0.0}});
    for (double th : {0.2, 1.0, 9.0}) {
        CHECK(j.laplace(th) == doctest::Approx(1.5 * (1.0 - std::pow(1.0 + 2.0 * th, -0.5))).epsilon(1e-12));
    }
}

TEST_CASE("variation classification") {
    const auto ts = [](double a) { return JumpMeasure({JumpComponent{TemperedStableJumps{1.0, a, 1.0}, 0.0}}); };
    CHECK(LevyModel({DriftKind::Triplet, 1.0}, 0.0, ts(0.5)).bounded_variation());
    CHECK_FALSE(LevyModel({DriftKind::Triplet, 1.0}, 0.0, ts(1.5)).bounded_variation());
    CHECK_FALSE(LevyModel({DriftKind::Triplet, 1.0}, 0.0, ts(1.0)).bounded_variation());
    CHECK_FALSE(LevyModel({DriftKind::Triplet, 1.0}, 0.5, exp_jumps()).bounded_variation());
    // An unbounded-variation density cannot be given a premium.
    CHECK(code_of([&] { LevyModel({DriftKind::Premium, 1.0}, 0.0, ts(1.5)); }) == ErrorCode::Validation);
}

TEST_CASE("convexity and inverse consistency") {
    const LevyModel m({DriftKind::Triplet, 0.2}, 0.4, JumpMeasure({JumpComponent{ParetoJumps{2.5, 1.0}, 0.0}}));
    for (int i = 0; i + 2 <= 50; ++i) {
        const double lo = i, hi = i + 2.0;
        CHECK(m.psi(0.5 * (lo + hi)) <= 0.5 * (m.psi(lo) + m.psi(hi)) + 1e-12);
    }
    const double phi0 = m.phi(0.0);
    for (double th : {phi0 + 0.01, phi0 + 1.0, 10.0, 40.0}) {
        CHECK(right_inverse_phi(m, laplace_exponent(m, th)) == doctest::Approx(th).epsilon(1e-10));
    }
}

TEST_CASE("complete monotonicity tags") {
    CHECK(is_completely_monotone(exp_jumps()) == Monotonicity::CompletelyMonotone);
    const JumpMeasure tab({JumpComponent{TabulatedJumps{{0.0, 1.0, 2.0}, {1.0, 0.5, 0.1}}, 0.0}});
    CHECK(is_completely_monotone(tab) == Monotonicity::Unknown);
}

TEST_CASE("invalid models") {
    CHECK(code_of([] { LevyModel({DriftKind::Triplet, -1.0}, 0.0, JumpMeasure{}); }) == ErrorCode::DegenerateModel);
    CHECK(code_of([] { LevyModel({DriftKind::Triplet, 0.0}, 0.0, JumpMeasure{}); }) == ErrorCode::DegenerateModel);
    CHECK(code_of([] { JumpMeasure({JumpComponent{TemperedStableJumps{1.0, 2.0, 1.0}, 0.0}}); }) ==
          ErrorCode::Integrability);
    CHECK(code_of([] { JumpMeasure({JumpComponent{GammaJumps{1.5, 1.0, 1.0}, 0.0}}); }) == ErrorCode::Validation);
    CHECK(code_of([] { LevyModel({DriftKind::Premium, -0.5}, 0.0, exp_jumps()); }) == ErrorCode::DegenerateModel);
    CHECK(code_of([] { (void)laplace_exponent(cramer_lundberg(), -1.0); }) == ErrorCode::Domain);
}

TEST_CASE("dividend problem admissibility") {
    const auto m = cramer_lundberg();
    const DividendProblem p(m, 0.1, 0.5);
    CHECK(p.psi_delta() > p.phi_delta());
    CHECK(p.phi_delta() > 0.0);
    // Ψ solves ψ(θ) - αθ = δ: 1.5θ² + (1.5 - 1 - δ)θ - δ = 0.
    const double b = 0.5 - 0.1;
    CHECK(p.psi_delta() == doctest::Approx((-b + std::sqrt(b * b + 0.6)) / 3.0).epsilon(1e-12));
    CHECK(code_of([&] { DividendProblem(m, 0.1, 2.5); }) == ErrorCode::Validation);
    CHECK(code_of([&] { DividendProblem(m, 0.1, 2.0); }) == ErrorCode::Validation);
    const DividendProblem barrier(m, 0.1, 2.0, true);
    CHECK(barrier.barrier_limit());
    CHECK(code_of([&] { DividendProblem(m, 0.0, 0.5); }) == ErrorCode::Validation);
}
