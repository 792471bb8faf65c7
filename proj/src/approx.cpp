#include "refract/approx.hpp"

#include "refract/error.hpp"
#include "refract/quadrature.hpp"

#include <boost/math/special_functions/gamma.hpp>

#include <algorithm>
#include <cmath>
#include <functional>
#include <numbers>
#include <string>

namespace refract {

namespace {

constexpr double pi = std::numbers::pi;

// π(x) = ∫ e^{-ux} μ(u) du with μ supported on (shift, ∞), or a single atom.
struct Bernstein {
    double shift = 0.0;
    std::function<double(double)> mu;  // as a function of v = u - shift
    double v_cap = 0.0;                // upper end of the usable support
    int oversample = 1;                // nodes per output term
    bool trim = false;                 // μ vanishes faster than any power at the left end
    bool atom = false;
    double atom_mass = 0.0;
};

double weibull_mu(const WeibullJumps& w, double u) {
    // Inverse Laplace transform of π along rays z = ρe^{±iφ}, π/2 < φ < π/(2r), on which both e^{zu}
    // and e^{-cz^r} decay. The substitution t = ρ^r removes the ρ^{r-1} singularity.
    const double r = w.shape;
    const double c = w.scale;
    const double phi = 0.5 * (0.5 * pi + std::min(pi, 0.5 * pi / r));
    const cplx turn = std::polar(1.0, phi);
    const cplx turn_r = std::polar(1.0, phi * r);
    auto f = [&](double t) {
        const cplx e = u * std::pow(t, 1.0 / r) * turn - c * t * turn_r;
        if (e.real() < -745.0) return 0.0;
        return (turn_r * std::exp(e)).imag();
    };
    const double scale = 1.0 / (c * std::cos(phi * r));
    const double v = quad::integrate_to_infinity(f, 0.0, scale, quad::Tolerance{1e-15, 1e-11, 4000});
    return std::max(0.0, w.intensity * c / pi * v);
}

Bernstein bernstein(const JumpFamily& family, double x_lo) {
    Bernstein out;
    const double wide = 10.0 / x_lo;
    if (const auto* p = std::get_if<ParetoJumps>(&family)) {
        const double a = p->index;
        const double norm = p->intensity / std::tgamma(a);
        out.mu = [a, norm](double u) { return norm * std::pow(u, a) * std::exp(-u); };
        out.v_cap = 60.0 + 4.0 * a;
    } else if (const auto* g = std::get_if<GammaJumps>(&family)) {
        out.shift = 1.0 / g->scale;
        if (g->shape == 1.0) {
            out.atom = true;
            out.atom_mass = g->intensity / g->scale;
            return out;
        }
        const double c = g->shape;
        const double norm = g->intensity / (std::tgamma(c) * std::tgamma(1.0 - c) * std::pow(g->scale, c));
        out.mu = [c, norm](double v) { return norm * std::pow(v, -c); };
        out.v_cap = wide;
        out.oversample = 2;
    } else if (const auto* t = std::get_if<TemperedStableJumps>(&family)) {
        out.shift = t->tilt;
        if (t->stability == -1.0) {
            out.atom = true;
            out.atom_mass = t->intensity;
            return out;
        }
        const double a = t->stability;
        const double norm = t->intensity / std::tgamma(1.0 + a);
        out.mu = [a, norm](double v) { return norm * std::pow(v, a); };
        out.v_cap = wide;
        out.oversample = 2;
    } else if (const auto* w = std::get_if<WeibullJumps>(&family)) {
        const WeibullJumps copy = *w;
        out.mu = [copy](double u) { return weibull_mu(copy, u); };
        out.trim = true;
        out.v_cap = wide;
        out.oversample = 2;
    } else {
        fail(ErrorCode::NotCompletelyMonotone, "no Bernstein representation for a tabulated density");
    }
    return out;
}

double sup_rel_error(const JumpMeasure& fit, const JumpMeasure& target, const FitOptions& o) {
    double worst = 0.0;
    const int m = std::max(o.probe_points, 2);
    for (int i = 0; i < m; ++i) {
        const double x = o.probe_lo * std::pow(o.probe_hi / o.probe_lo, i / (m - 1.0));
        const double ref = target.density(x);
        if (ref > 0.0) worst = std::max(worst, std::abs(fit.density(x) - ref) / ref);
    }
    return worst;
}

void check_order(int n) {
    if (n < 1) fail(ErrorCode::Validation, "number of terms must be at least 1");
}

} // namespace

FittedMixture fit_hyperexponential(const JumpFamily& family, int n, const FitOptions& options) {
    check_order(n);
    if (!(options.probe_lo > 0.0 && options.probe_hi > options.probe_lo)) {
        fail(ErrorCode::Validation, "probe range must satisfy 0 < lo < hi");
    }
    if (classify(family) != Monotonicity::CompletelyMonotone) {
        fail(ErrorCode::NotCompletelyMonotone, "density is not known to be completely monotone");
    }
    const JumpMeasure target({JumpComponent{family, 0.0}});
    FittedMixture out;
    if (const auto* mix = std::get_if<ExpMixtureJumps>(&family)) {
        out.mixture = *mix;
        out.report.n_terms = static_cast<int>(mix->terms.size());
        return out;
    }

    const Bernstein bern = bernstein(family, options.probe_lo);
    if (bern.atom) {
        out.mixture.terms = {ExpTerm{bern.atom_mass / bern.shift, bern.shift}};
    } else {
        // Midpoint rule in log v: nodes v_i, weights μ(v_i) v_i h. The range widens with n at both ends.
        const int m = n * bern.oversample;
        double v_lo = 0.1 / options.probe_hi * std::pow(10.0, -n / 20.0);
        const double grow = bern.oversample > 1 ? bern.v_cap * std::pow(2.0, n / 10.0) : 0.05 / options.probe_lo * std::pow(2.0, n / 10.0);
        const double v_hi = bern.oversample > 1 ? grow : std::min(bern.v_cap, grow);
        if (bern.trim) {
            // Skip the stretch where μ is negligible so that no node is wasted there.
            double peak = 0.0;
            std::vector<double> probe(64);
            for (int i = 0; i < 64; ++i) {
                const double v = v_lo * std::pow(v_hi / v_lo, i / 63.0);
                probe[i] = bern.mu(v) * v;
                peak = std::max(peak, probe[i]);
            }
            int first = 0;
            while (first < 63 && probe[first] < 1e-12 * peak) ++first;
            v_lo *= std::pow(v_hi / v_lo, std::max(first - 1, 0) / 63.0);
        }
        if (!(v_hi > v_lo)) fail(ErrorCode::DegenerateWeights, "empty node range");
        const double h = std::log(v_hi / v_lo) / m;
        std::vector<double> rate(m), mass(m);
        for (int i = 0; i < m; ++i) {
            const double v = v_lo * std::exp((i + 0.5) * h);
            rate[i] = bern.shift + v;
            mass[i] = bern.mu(v) * v * h;
        }
        // Mass of μ below v_lo, from the local power law there, goes to the first node.
        const double mu_lo = bern.mu(v_lo);
        const double mu_up = bern.mu(v_lo * 1.01);
        if (mu_lo > 0.0 && mu_up > 0.0) {
            const double p = std::log(mu_up / mu_lo) / std::log(1.01);
            if (p > -1.0) mass[0] += mu_lo * v_lo / (1.0 + p);
        }
        double biggest = 0.0;
        for (double d : mass) biggest = std::max(biggest, std::abs(d));
        for (double& d : mass) {
            if (d < 0.0 && d > -1e-12 * biggest) d = 0.0;
            if (d < 0.0 || !std::isfinite(d)) fail(ErrorCode::DegenerateWeights, "negative or non-finite weight");
        }
        for (int k = 0; k < n; ++k) {
            double dm = 0.0, du = 0.0;
            for (int j = k * bern.oversample; j < (k + 1) * bern.oversample; ++j) {
                dm += mass[j];
                du += mass[j] * rate[j];
            }
            if (dm > 0.0) out.mixture.terms.push_back(ExpTerm{dm / (du / dm), du / dm});
        }
        if (out.mixture.terms.empty()) fail(ErrorCode::DegenerateWeights, "all weights vanished");
    }
    out.mixture.intensity = 1.0;
    out.report.n_terms = static_cast<int>(out.mixture.terms.size());
    const JumpMeasure fitted({JumpComponent{out.mixture, 0.0}});
    out.report.sup_rel_error = sup_rel_error(fitted, target, options);
    double gap = 0.0;
    for (int i = 0; i <= 100; ++i) {
        const double theta = 0.1 * i;
        const double ref = target.compensated(theta);
        gap = std::max(gap, std::abs(fitted.compensated(theta) - ref) / (1.0 + std::abs(ref)));
    }
    out.report.laplace_exponent_gap = gap;
    return out;
}

double laplace_exponent_gap(const LevyModel& approx, const LevyModel& target) {
    double gap = 0.0;
    for (int i = 0; i <= 100; ++i) {
        const double theta = 0.1 * i;
        const double ref = target.psi(theta);
        gap = std::max(gap, std::abs(approx.psi(theta) - ref) / (1.0 + std::abs(ref)));
    }
    return gap;
}

ApproxModel fit_model(const LevyModel& model, int n, const FitOptions& options) {
    check_order(n);
    std::vector<JumpComponent> parts;
    double worst = 0.0;
    int terms = 0;
    for (const auto& c : model.jumps().components()) {
        if (c.cutoff > 0.0) fail(ErrorCode::NotCompletelyMonotone, "a truncated density is not completely monotone");
        auto fit = fit_hyperexponential(c.family, n, options);
        worst = std::max(worst, fit.report.sup_rel_error);
        terms += fit.report.n_terms;
        parts.push_back(JumpComponent{std::move(fit.mixture), 0.0});
    }
    LevyModel fitted(DriftSpec{DriftKind::Triplet, model.a()}, model.sigma(), JumpMeasure(std::move(parts)));
    ApproxReport report;
    report.n_terms = terms;
    report.sup_rel_error = worst;
    report.laplace_exponent_gap = laplace_exponent_gap(fitted, model);
    return {std::move(fitted), report};
}

CompoundPoissonSubstitute gaussian_to_compound_poisson(double sigma, double eps) {
    if (!(sigma > 0.0 && eps > 0.0)) fail(ErrorCode::Validation, "σ and ε must be positive");
    return {sigma * sigma / eps, sigma * sigma / (eps * eps), eps};
}

ApproxModel gaussian_exponential_approx(const LevyModel& model, int n) {
    check_order(n);
    const double s2 = model.sigma() * model.sigma();
    if (!(s2 > 0.0)) fail(ErrorCode::Validation, "the Gaussian-exponential scheme needs σ > 0");
    const double nd = n;
    // Added tail ½σ²n²e^{-nx}: one exponential term of total mass ½σ²n² and rate n.
    ExpMixtureJumps extra{{ExpTerm{0.5 * s2 * nd * nd, nd}}, 1.0};
    JumpMeasure jumps = model.jumps().plus(JumpMeasure({JumpComponent{extra, 0.0}}));
    const double a_n = model.a() + 0.5 * s2 * nd * (nd + 1.0) * std::exp(-nd);
    LevyModel approx(DriftSpec{DriftKind::Triplet, a_n}, 0.0, std::move(jumps));
    ApproxReport report;
    report.n_terms = n;
    report.laplace_exponent_gap = laplace_exponent_gap(approx, model);
    return {std::move(approx), report};
}

ApproxModel truncate_small_jumps(const LevyModel& model, double eps) {
    if (!(eps > 0.0)) fail(ErrorCode::Validation, "truncation level must be positive");
    LevyModel cut(DriftSpec{DriftKind::Triplet, model.a()}, model.sigma(), model.jumps().truncated(eps));
    ApproxReport report;
    report.epsilon = eps;
    report.laplace_exponent_gap = laplace_exponent_gap(cut, model);
    return {std::move(cut), report};
}

} // namespace refract
