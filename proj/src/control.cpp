#include "refract/control.hpp"

#include "refract/error.hpp"

#include <boost/math/tools/minima.hpp>
#include <boost/math/tools/roots.hpp>

#include <algorithm>
#include <cmath>
#include <exception>
#include <limits>
#include <thread>

namespace refract {

ThresholdSearch locate_threshold(const DividendProblem& problem, const ScaleFunction& w,
                                 const ControlOptions& options) {
    const double big_psi = problem.psi_delta();
    if (!std::isfinite(big_psi)) fail(ErrorCode::DegenerateModel, "no threshold problem in the barrier limit");
    auto h = [&](double b) { return threshold_normaliser(w, big_psi, b); };

    const int n = std::max(options.scan_points, 8);
    const double b_max = options.bracket_factor / problem.phi_delta();
    std::vector<double> grid(n);
    grid[0] = 0.0;
    for (int i = 1; i < n; ++i) grid[i] = b_max * std::pow(10.0, -6.0 * (1.0 - (i - 1.0) / (n - 2.0)));
    std::vector<double> hv(n);
    for (int i = 0; i < n; ++i) hv[i] = h(grid[i]);

    ThresholdSearch out;
    const auto best = static_cast<int>(std::min_element(hv.begin(), hv.end()) - hv.begin());
    for (int i = 0; i < n; ++i) {
        const double slack = 1e-12 * std::abs(hv[i]);
        const bool left_ok = i == 0 || hv[i] < hv[i - 1] - slack;
        const bool right_ok = i == n - 1 || hv[i] < hv[i + 1] - slack;
        if (left_ok && right_ok) ++out.local_minima;
    }
    if (best == 0) {
        out.b_star = 0.0;
        return out;
    }
    const double lo = grid[best - 1];
    const double hi = grid[std::min(best + 1, n - 1)];
    // Golden-section style refinement on h, then the first-order condition W' = h.
    const auto [bmin, hmin] = boost::math::tools::brent_find_minima(h, lo, hi, 40);
    (void)hmin;
    double b_star = bmin;
    auto foc = [&](double b) { return w.w_prime(b) - h(b); };
    const double flo = foc(lo);
    const double fhi = foc(hi);
    if (flo > 0.0 && fhi < 0.0) {
        boost::uintmax_t iters = 200;
        auto [a, c] = boost::math::tools::toms748_solve(foc, lo, hi, flo, fhi,
                                                        boost::math::tools::eps_tolerance<double>(50), iters);
        b_star = 0.5 * (a + c);
    }
    out.b_star = b_star;
    return out;
}

double optimal_threshold(const DividendProblem& problem, const ControlOptions& options) {
    const ScaleFunction w(problem.model(), problem.delta(), options.value.scale);
    return locate_threshold(problem, w, options).b_star;
}

double hjb_residual(const ThresholdValueFunction& value_fn, double x) {
    if (!(x > 0.0)) fail(ErrorCode::Domain, "HJB residual needs x > 0");
    const auto& p = value_fn.problem();
    const Side side = x < value_fn.b() ? Side::Left : Side::Right;
    const double vp = value_fn.derivative(x, side);
    const double control = std::max(0.0, (1.0 - vp) * p.alpha());
    return control + value_fn.generator(x, 0.0) - p.delta() * value_fn.value(x);
}

double bang_bang_rate(const ThresholdValueFunction& value_fn, double x) {
    if (!(x >= 0.0)) fail(ErrorCode::Domain, "dividend rate needs x >= 0");
    const Side side = x < value_fn.b() ? Side::Left : Side::Right;
    const double vp = value_fn.derivative(x, side);
    return vp > 1.0 + 1e-9 ? 0.0 : value_fn.problem().alpha();
}

namespace {

bool nonincreasing(std::span<const double> vprime) {
    for (std::size_t i = 0; i + 1 < vprime.size(); ++i) {
        if (vprime[i + 1] > vprime[i] + 1e-8 * (1.0 + std::abs(vprime[i]))) return false;
    }
    return true;
}

double vprime_at(const ThresholdValueFunction& v, double x) {
    return v.derivative(x, x <= v.b() ? Side::Left : Side::Right);
}

} // namespace

bool concavity_report(const ThresholdValueFunction& value_fn, std::span<const double> grid) {
    if (grid.size() < 3) fail(ErrorCode::Domain, "concavity check needs at least three grid points");
    std::vector<double> vp;
    for (double x : grid) vp.push_back(vprime_at(value_fn, x));
    return nonincreasing(vp);
}

std::vector<double> default_grid(const DividendProblem& problem, double b) {
    const double top = b + 30.0 / problem.psi_delta();
    std::vector<double> grid(200);
    for (int i = 0; i < 200; ++i) grid[i] = top * (i + 1) / 200.0;
    return grid;
}

namespace {

PolicySolution assess_value(const ThresholdValueFunction& vf, std::span<const double> grid,
                            const ControlOptions& options) {
    const auto& problem = vf.problem();
    const double b = vf.b();
    std::vector<double> pts(grid.begin(), grid.end());
    if (pts.empty()) pts = default_grid(problem, b);
    if (!std::is_sorted(pts.begin(), pts.end()) || pts.front() <= 0.0) {
        fail(ErrorCode::Domain, "grid must be sorted and lie in (0, ∞)");
    }
    const std::size_t n = pts.size();
    std::vector<double> hjb(n, std::numeric_limits<double>::quiet_NaN());
    std::vector<double> vp(n);
    std::vector<std::exception_ptr> errors(n);

    auto work = [&](std::size_t i) {
        try {
            const double x = pts[i];
            vp[i] = vprime_at(vf, x);
            if (std::abs(x - b) >= options.exclusion_band) hjb[i] = hjb_residual(vf, x);
        } catch (...) {
            errors[i] = std::current_exception();
        }
    };
    const int workers = std::max(1, options.workers);
    if (workers == 1) {
        for (std::size_t i = 0; i < n; ++i) work(i);
    } else {
        std::vector<std::thread> pool;
        for (int t = 0; t < workers; ++t) {
            pool.emplace_back([&, t] {
                for (std::size_t i = t; i < n; i += workers) work(i);
            });
        }
        for (auto& th : pool) th.join();
    }
    for (auto& e : errors) {
        if (e) std::rethrow_exception(e);
    }

    PolicySolution sol{b, vf, pts, hjb, vp};
    for (double r : hjb) {
        if (!std::isnan(r)) sol.hjb_sup_residual = std::max(sol.hjb_sup_residual, std::abs(r));
    }
    sol.concave_on_grid = n >= 3 && nonincreasing(vp);
    if (b > 0.0) {
        const auto paste = vf.pasting();
        sol.pasting_gap = paste.pasting_gap;
        sol.continuity_gap = paste.continuity_gap;
    }
    sol.cm_certified = false;
    return sol;
}

} // namespace

PolicySolution assess(const DividendProblem& problem, double b, std::span<const double> grid,
                      const ControlOptions& options) {
    return assess_value(ThresholdValueFunction(problem, b, options.value), grid, options);
}

PolicySolution solve(const DividendProblem& problem, std::span<const double> grid, const ControlOptions& options) {
    const ScaleFunction w(problem.model(), problem.delta(), options.value.scale);
    const ScaleFunction ws(problem.refracted(), problem.delta(), options.value.scale);
    const auto search = locate_threshold(problem, w, options);
    // The value function shares the scale functions, and their caches, with the search.
    PolicySolution sol = assess_value(ThresholdValueFunction(problem, search.b_star, w, ws, options.value), grid, options);
    sol.unimodal = search.unimodal();
    sol.cm_certified = problem.model().monotonicity() == Monotonicity::CompletelyMonotone && sol.unimodal;
    return sol;
}

} // namespace refract
