#include "refract/scale.hpp"

#include "refract/error.hpp"
#include "refract/quadrature.hpp"

#include <boost/math/tools/roots.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <limits>
#include <mutex>
#include <numbers>

namespace refract {

namespace {

constexpr double inf = std::numeric_limits<double>::infinity();

// Limit used in place of q = 0 by the numeric backend, where 1/ψ has its pole on the contour.
constexpr double numeric_q_floor = 1e-8;

// ψ(θ) - q for dθ + ½σ²θ² - Σ w_i θ/(β_i + θ), with some poles multiplied out.
struct RationalExponent {
    double d = 0.0;
    double half_var = 0.0;
    double q = 0.0;
    std::vector<ExpPole> poles;  // sorted by rate

    double value(double t) const {
        double v = d * t + half_var * t * t - q;
        for (const auto& p : poles) v -= p.mass * t / (p.rate + t);
        return v;
    }
    double slope(double t) const {
        double v = d + 2.0 * half_var * t;
        for (const auto& p : poles) v -= p.mass * p.rate / ((p.rate + t) * (p.rate + t));
        return v;
    }
    // (ψ(θ) - q) Π_{i in cleared} (β_i + θ), continuous across the cleared poles.
    double cleared(double t, std::span<const std::size_t> idx) const {
        double prod = 1.0;
        for (auto i : idx) prod *= poles[i].rate + t;
        double v = (d * t + half_var * t * t - q) * prod;
        for (std::size_t i = 0; i < poles.size(); ++i) {
            const bool in = std::find(idx.begin(), idx.end(), i) != idx.end();
            if (in) {
                double rest = 1.0;
                for (auto j : idx) {
                    if (j != i) rest *= poles[j].rate + t;
                }
                v -= poles[i].mass * t * rest;
            } else {
                v -= poles[i].mass * t * prod / (poles[i].rate + t);
            }
        }
        return v;
    }
};

double bracket_root(const RationalExponent& e, double lo, double hi, std::vector<std::size_t> idx,
                    bool deflate_zero = false) {
    // With q = 0, θ = 0 is a root at the right end of the first bracket; divide it out.
    if (deflate_zero) hi = -1e-300;
    auto g = [&](double t) { return deflate_zero ? e.cleared(t, idx) / t : e.cleared(t, idx); };
    double glo = g(lo);
    double ghi = g(hi);
    if (glo == 0.0) return lo;
    if (ghi == 0.0) return hi;
    if ((glo > 0.0) == (ghi > 0.0)) {
        fail(ErrorCode::RepeatedPole, "no sign change while bracketing a root of ψ(θ) = q");
    }
    boost::uintmax_t iters = 200;
    auto tol = boost::math::tools::eps_tolerance<double>(52);
    auto [a, b] = boost::math::tools::toms748_solve(g, lo, hi, glo, ghi, tol, iters);
    double t = 0.5 * (a + b);
    // Newton polish on the uncleared function, kept inside the bracket.
    for (int i = 0; i < 3; ++i) {
        const double s = e.slope(t);
        if (!(std::abs(s) > 0.0)) break;
        const double next = t - e.value(t) / s;
        if (!(next > lo && next < hi) || !std::isfinite(next)) break;
        t = next;
    }
    return t;
}

std::string short_number(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
}

// Inversion nodes: f(t) ≈ Re Σ weight_k e^{t s_k} F(s_k).
struct InversionNode {
    cplx s;
    cplx weight;
};

// Abate-Valkó fixed Talbot contour with M nodes.
std::vector<InversionNode> talbot_nodes(int m, double t) {
    const double r = 2.0 * m / (5.0 * t);
    std::vector<InversionNode> nodes;
    nodes.reserve(m);
    nodes.push_back({cplx(r, 0.0), cplx(0.5 * r / m, 0.0)});
    for (int k = 1; k < m; ++k) {
        const double th = k * std::numbers::pi / m;
        const double cot = 1.0 / std::tan(th);
        const cplx s = r * th * cplx(cot, 1.0);
        const double sigma = th + (th * cot - 1.0) * cot;
        nodes.push_back({s, cplx(1.0, sigma) * (r / m)});
    }
    return nodes;
}

// Abate-Whitt Euler summation on the vertical line Re s = M ln10 / (3t). Needs F only to the
// right of that line, so it also serves transforms that blow up in the left half-plane.
std::vector<InversionNode> euler_nodes(int m, double t) {
    std::vector<double> xi(2 * m + 1, 1.0);
    xi[0] = 0.5;
    xi[2 * m] = std::pow(2.0, -m);
    double binom = 1.0;  // C(M, k)
    for (int k = 1; k < m; ++k) {
        binom *= static_cast<double>(m - k + 1) / k;
        xi[2 * m - k] = xi[2 * m - k + 1] + std::pow(2.0, -m) * binom;
    }
    const double shift = m * std::numbers::ln10 / 3.0;
    std::vector<InversionNode> nodes;
    nodes.reserve(xi.size());
    for (int k = 0; k <= 2 * m; ++k) nodes.push_back({cplx(shift, std::numbers::pi * k) / t, cplx(xi[k] / t, 0.0)});
    return nodes;
}

} // namespace

const char* to_string(ScaleBackend b) {
    return b == ScaleBackend::Rational ? "rational" : "numeric-inversion";
}

struct ScaleFunction::Impl {
    LevyModel model;
    double q;
    double q_eff;
    double phi;
    ScaleBackend backend;
    ScaleOptions options;
    double w0 = 0.0;
    double w1 = 0.0;  // W'(0+)
    double w2 = 0.0;  // W''(0+) when σ > 0
    bool second = false;

    // Rational backend.
    std::vector<ExpComponent> comps;

    // Numeric backend: ω = e^{-Φx} W, its first two derivatives, and η = e^{-Φx} ∫_0^x W.
    struct Node {
        bool ready = false;
        std::array<double, 4> v{};
    };
    mutable std::mutex mutex;
    // Index 0 holds ω, ω', ω'', η; index 1 the remainder R, R', R'', ∫R.
    mutable std::array<std::vector<Node>, 2> cache;
    mutable std::array<std::vector<Node>, 2> small_cache;
    double kappa = 0.0;  // ψ'(Φ)

    Impl(const LevyModel& m, double q_, ScaleOptions opt)
        : model(m), q(q_), q_eff(q_), phi(0.0), backend(ScaleBackend::NumericInversion), options(opt) {}

    // ψ of a compactly supported density grows exponentially to the left, off the Talbot contour.
    bool compact_support() const {
        const auto& comps = model.jumps().components();
        return std::any_of(comps.begin(), comps.end(), [](const JumpComponent& c) {
            return std::holds_alternative<TabulatedJumps>(c.family);
        });
    }

    // 1/(κ(s - Φ)) - 1/(ψ(s) - q), analytic at s = Φ. Close to Φ the two terms cancel, so the
    // value there is the mean over a circle around s that keeps clear of Φ and of Re s ≤ 0.
    cplx remainder_transform(cplx s) const {
        auto direct = [&](cplx z) {
            const cplx p = model.psi(z) - q_eff;
            cplx f = 1.0 / p;
            if (!std::isfinite(f.real()) || !std::isfinite(f.imag()) || !std::isfinite(std::abs(p))) f = 0.0;
            return 1.0 / (kappa * (z - phi)) - f;
        };
        const double rho = 0.25 * phi;
        if (std::abs(s - phi) >= 0.5 * rho) return direct(s);
        constexpr int n = 32;
        cplx sum = 0.0;
        for (int k = 0; k < n; ++k) sum += direct(s + std::polar(rho, 2.0 * std::numbers::pi * k / n));
        return sum / static_cast<double>(n);
    }

    // The four bounded quantities of one part at t > 0 with M Talbot terms, or M Euler terms for
    // compact support.
    std::array<double, 4> invert(double t, int m, int part) const {
        const auto nodes = compact_support() ? euler_nodes(m, t) : talbot_nodes(m, t);
        const double omega1 = second ? 2.0 / (model.sigma() * model.sigma()) : 0.0;
        // R(0+) and R'(0+).
        const double r0 = 1.0 / kappa - w0;
        const double r1 = phi / kappa - w1;
        std::array<cplx, 4> acc{};
        for (const auto& n : nodes) {
            const cplx s = n.s;
            std::array<cplx, 4> g;
            if (part == 0) {
                const cplx p = model.psi(s + phi) - q_eff;
                cplx f = 1.0 / p;
                if (!std::isfinite(f.real()) || !std::isfinite(f.imag()) || !std::isfinite(std::abs(p))) f = 0.0;
                g = {f, s * f - w0, s * s * f - s * w0 - omega1, f / (s + phi)};
            } else {
                const cplx f = remainder_transform(s);
                g = {f, s * f - r0, std::isfinite(r1) ? s * s * f - s * r0 - r1 : cplx(0.0), f / s};
            }
            const cplx e = std::exp(t * s) * n.weight;
            for (int i = 0; i < 4; ++i) acc[i] += e * g[i];
        }
        std::array<double, 4> out{};
        for (int i = 0; i < 4; ++i) out[i] = acc[i].real();
        if (part == 0 ? !second : !std::isfinite(r1)) out[2] = std::numeric_limits<double>::quiet_NaN();
        return out;
    }

    std::array<double, 4> invert_checked(double t, int part) const {
        // Nodes scale like 1/t and overflow for denormal-range t; ω and its derivatives are flat
        // there while η = ∫ ω grows linearly.
        constexpr double floor_t = 1e-100;
        if (t < floor_t) {
            auto v = invert_checked(floor_t, part);
            v[3] *= t / floor_t;
            return v;
        }
        // Accept the first pair of neighbouring orders that agree. Roundoff in ψ at large |s|
        // can spoil the higher orders at tiny t, so the lower pair is a fallback.
        const auto settled = [&](const std::array<double, 4>& a, const std::array<double, 4>& b) {
            // ω tends to 1/ψ'(Φ) and R is of that size or smaller; R gets the absolute scale that
            // the sum of two ω values would give.
            const double ref = std::max(std::abs(a[0]) + std::abs(b[0]), part == 0 ? 1e-300 : 2.0 / kappa);
            const double gap = std::max(std::abs(a[0] - b[0]), std::abs(a[3] - b[3]) / std::max(1.0, t));
            return gap <= 1e-5 * ref + 1e-12;
        };
        if (compact_support()) {
            const auto lo = invert(t, 14, part);
            const auto hi = invert(t, 18, part);
            if (settled(lo, hi)) return hi;
            fail(ErrorCode::Divergence, "Euler inversion of the scale function did not settle at x=" + short_number(t));
        }
        const auto lo = invert(t, 24, part);
        const auto hi = invert(t, 32, part);
        if (settled(lo, hi)) return hi;
        const auto more = invert(t, 40, part);
        if (settled(hi, more)) return more;
        if (settled(invert(t, 16, part), lo)) return lo;
        fail(ErrorCode::Divergence, "Talbot inversion of the scale function did not settle at x=" + short_number(t));
    }

    std::array<double, 4> node(std::vector<Node>& store, std::size_t j, double x, int part) const {
        {
            std::lock_guard lock(mutex);
            if (j < store.size() && store[j].ready) return store[j].v;
        }
        const auto v = invert_checked(x, part);
        std::lock_guard lock(mutex);
        if (store.size() <= j) store.resize(std::max<std::size_t>(j + 1, store.size() * 2));
        if (!store[j].ready) store[j] = {true, v};
        return store[j].v;
    }

    // The bounded quantities flatten out as x grows, so the main grid is uniform in
    // ξ = X asinh(x/X); near 0 they behave like powers of x, so that grid is uniform in log x.
    static constexpr double grid_scale = 16.0;
    static constexpr double smallest = 1e-9;

    static std::array<double, 4> cubic(double u, const std::array<std::array<double, 4>, 4>& v) {
        const double xs[4] = {-1.0, 0.0, 1.0, 2.0};
        std::array<double, 4> out{};
        for (int k = 0; k < 4; ++k) {
            double lk = 1.0;
            for (int l = 0; l < 4; ++l) {
                if (l != k) lk *= (u - xs[l]) / (xs[k] - xs[l]);
            }
            for (int i = 0; i < 4; ++i) out[i] += lk * v[k][i];
        }
        return out;
    }

    // Bounded quantities at x > 0: cubic interpolation on one of the two grids, direct inversion
    // at the extremes.
    std::array<double, 4> bounded(double x, int part = 0) const {
        if (x < smallest || x > 1e8) return invert_checked(x, part);
        std::array<std::array<double, 4>, 4> v;
        if (x < options.log_grid_below) {
            // Node i sits at smallest · e^{(i-1)h}.
            const double h = options.log_step;
            const double s = std::log(x / smallest) / h + 1.0;
            const auto j = static_cast<std::size_t>(std::floor(s));
            for (int k = 0; k < 4; ++k) {
                const std::size_t i = j - 1 + k;
                v[k] = node(small_cache[part], i, smallest * std::exp((static_cast<double>(i) - 1.0) * h), part);
            }
            return cubic(s - static_cast<double>(j), v);
        }
        const double h = options.cache_step;
        const double xi = grid_scale * std::asinh(x / grid_scale) / h;
        const auto j = static_cast<std::size_t>(std::floor(xi));
        for (int k = 0; k < 4; ++k) {
            const std::size_t i = j - 1 + k;
            v[k] = node(cache[part], i, grid_scale * std::sinh(static_cast<double>(i) * h / grid_scale), part);
        }
        return cubic(xi - static_cast<double>(j), v);
    }
};

ScaleFunction::ScaleFunction(const LevyModel& model, double q, ScaleOptions options) {
    if (!(q >= 0.0) || !std::isfinite(q)) fail(ErrorCode::Domain, "scale function needs q >= 0");
    auto impl = std::make_shared<Impl>(model, q, options);
    const double sigma = model.sigma();
    const bool rational = model.rational();
    if (options.backend == ScaleBackend::Rational && !rational) {
        fail(ErrorCode::UnsupportedFamily, "rational backend requires exponential-mixture or no jumps");
    }
    impl->backend = options.backend.value_or(rational ? ScaleBackend::Rational : ScaleBackend::NumericInversion);

    if (model.bounded_variation()) {
        impl->w0 = 1.0 / model.c();
    }

    if (impl->backend == ScaleBackend::Rational) {
        impl->phi = model.phi(q);
        RationalExponent e;
        e.q = q;
        e.half_var = 0.5 * sigma * sigma;
        e.d = model.a() + model.jumps().small_jump_mean();
        e.poles = model.jumps().exponential_poles().value_or(std::vector<ExpPole>{});
        const auto& poles = e.poles;
        std::vector<double> roots;
        const double slope0 = model.mean_slope();
        if (q == 0.0 && slope0 == 0.0) fail(ErrorCode::RepeatedPole, "ψ'(0) = 0 makes θ = 0 a double root of ψ");
        if (q == 0.0) roots.push_back(0.0);
        if (q > 0.0 || slope0 < 0.0) roots.push_back(impl->phi);
        if (poles.empty()) {
            if (sigma > 0.0) {
                // ½σ²θ² + dθ - q = 0; the other root from Vieta.
                const double big = impl->phi;
                const double other = q > 0.0 ? -q / (e.half_var * big) : -e.d / e.half_var;
                if (q > 0.0 || slope0 > 0.0) roots.push_back(other);
            }
        } else {
            if (q > 0.0 || slope0 > 0.0) roots.push_back(bracket_root(e, -poles[0].rate, 0.0, {0}, q == 0.0));
            for (std::size_t i = 0; i + 1 < poles.size(); ++i) {
                roots.push_back(bracket_root(e, -poles[i + 1].rate, -poles[i].rate, {i, i + 1}));
            }
            if (sigma > 0.0) {
                const std::size_t n = poles.size() - 1;
                double gap = 1.0 + poles[n].rate;
                while (e.cleared(-poles[n].rate - gap, std::vector<std::size_t>{n}) > 0.0) gap *= 2.0;
                roots.push_back(bracket_root(e, -poles[n].rate - gap, -poles[n].rate, {n}));
            }
        }
        std::sort(roots.begin(), roots.end());
        for (std::size_t i = 0; i + 1 < roots.size(); ++i) {
            if (std::abs(roots[i + 1] - roots[i]) <= 1e-10 * std::max(1.0, std::abs(roots[i]))) {
                fail(ErrorCode::RepeatedPole, "coincident roots of ψ(θ) = q");
            }
        }
        for (double t : roots) {
            const double s = e.slope(t);
            double size = std::abs(e.d) + 2.0 * e.half_var * std::abs(t);
            for (const auto& p : poles) size += p.mass * p.rate / ((p.rate + t) * (p.rate + t));
            if (std::abs(s) < 1e-12 * size) fail(ErrorCode::RepeatedPole, "partial-fraction residue is ill conditioned");
            impl->comps.push_back({t, 1.0 / s});
        }
        if (!model.bounded_variation()) impl->w0 = 0.0;
        impl->second = true;
        double w1 = 0.0;
        for (const auto& c : impl->comps) w1 += c.coef * c.rate;
        impl->w1 = w1;
        // The largest root is Φ.
        impl->kappa = 1.0 / impl->comps.back().coef;
    } else {
        impl->q_eff = std::max(q, numeric_q_floor);
        impl->phi = model.phi(impl->q_eff);
        impl->kappa = model.psi_prime(impl->phi);
        impl->second = sigma > 0.0;
        if (sigma > 0.0) {
            impl->w1 = 2.0 / (sigma * sigma);
            // ψ(θ) = ½σ²θ² + dθ + o(θ) with d = a + ∫_0^1 xπ, so W''(0+) = -4d/σ⁴.
            const double d = model.a() + model.jumps().small_jump_mean();
            impl->w2 = std::isfinite(d) ? -4.0 * d / (sigma * sigma * sigma * sigma) : -inf;
        } else if (model.bounded_variation() && model.jumps().finite_activity()) {
            const double c = model.c();
            impl->w1 = (model.jumps().mass() + impl->q_eff) / (c * c);
        } else {
            impl->w1 = inf;
        }
        if (!(options.cache_step > 0.0)) fail(ErrorCode::Validation, "cache step must be positive");
        if (!(options.log_step > 0.0)) fail(ErrorCode::Validation, "log step must be positive");
        impl->options.log_grid_below = std::max(options.log_grid_below, 2.0 * options.cache_step);
    }
    impl_ = std::move(impl);
}

double ScaleFunction::q() const { return impl_->q; }
double ScaleFunction::accuracy() const {
    if (impl_->backend == ScaleBackend::Rational) return 1e-14;
    return impl_->compact_support() ? 1e-6 : 1e-10;
}
double ScaleFunction::phi() const { return impl_->phi; }
ScaleBackend ScaleFunction::backend() const { return impl_->backend; }
const LevyModel& ScaleFunction::model() const { return impl_->model; }
bool ScaleFunction::has_second() const { return impl_->second; }
double ScaleFunction::w_zero() const { return impl_->w0; }
double ScaleFunction::w_prime_zero() const { return impl_->w1; }
std::span<const ExpComponent> ScaleFunction::components() const { return impl_->comps; }

double ScaleFunction::w(double x) const {
    if (x < 0.0) return 0.0;
    if (x == 0.0) return impl_->w0;
    if (impl_->backend == ScaleBackend::Rational) {
        double v = 0.0;
        for (const auto& c : impl_->comps) v += c.coef * std::exp(c.rate * x);
        return v;
    }
    return std::exp(impl_->phi * x) * impl_->bounded(x)[0];
}

double ScaleFunction::w_prime(double x) const {
    if (x < 0.0) return 0.0;
    if (x == 0.0) return impl_->w1;
    if (impl_->backend == ScaleBackend::Rational) {
        double v = 0.0;
        for (const auto& c : impl_->comps) v += c.coef * c.rate * std::exp(c.rate * x);
        return v;
    }
    const auto b = impl_->bounded(x);
    return std::exp(impl_->phi * x) * (impl_->phi * b[0] + b[1]);
}

double ScaleFunction::w_second(double x) const {
    if (!impl_->second) {
        fail(ErrorCode::NotDifferentiable, "W'' is only available for rational transforms or σ > 0");
    }
    if (x < 0.0) return 0.0;
    if (impl_->backend == ScaleBackend::Rational) {
        double v = 0.0;
        for (const auto& c : impl_->comps) v += c.coef * c.rate * c.rate * std::exp(c.rate * x);
        return v;
    }
    if (x == 0.0) return impl_->w2;
    const auto b = impl_->bounded(x);
    const double p = impl_->phi;
    return std::exp(p * x) * (p * p * b[0] + 2.0 * p * b[1] + b[2]);
}

double ScaleFunction::w_bar(double x) const {
    if (x <= 0.0) return 0.0;
    if (impl_->backend == ScaleBackend::Rational) {
        double v = 0.0;
        for (const auto& c : impl_->comps) {
            v += c.rate == 0.0 ? c.coef * x : c.coef * std::expm1(c.rate * x) / c.rate;
        }
        return v;
    }
    return std::exp(impl_->phi * x) * impl_->bounded(x)[3];
}

double ScaleFunction::z(double x) const {
    if (x <= 0.0 || impl_->q == 0.0) return 1.0;
    return 1.0 + impl_->q * w_bar(x);
}

double ScaleFunction::phi_slope() const { return impl_->kappa; }

double ScaleFunction::remainder(double x) const {
    const auto& m = *impl_;
    if (x < 0.0) return std::exp(m.phi * x) / m.kappa;
    if (m.backend == ScaleBackend::Rational) {
        double v = 0.0;
        for (std::size_t i = 0; i + 1 < m.comps.size(); ++i) v -= m.comps[i].coef * std::exp(m.comps[i].rate * x);
        return v;
    }
    if (x == 0.0) return 1.0 / m.kappa - m.w0;
    return m.bounded(x, 1)[0];
}

double ScaleFunction::remainder_prime(double x) const {
    const auto& m = *impl_;
    if (x < 0.0) return m.phi * std::exp(m.phi * x) / m.kappa;
    if (m.backend == ScaleBackend::Rational) {
        double v = 0.0;
        for (std::size_t i = 0; i + 1 < m.comps.size(); ++i) {
            v -= m.comps[i].coef * m.comps[i].rate * std::exp(m.comps[i].rate * x);
        }
        return v;
    }
    if (x == 0.0) return m.phi / m.kappa - m.w1;
    return m.bounded(x, 1)[1];
}

double ScaleFunction::remainder_bar(double x) const {
    const auto& m = *impl_;
    if (x <= 0.0) return 0.0;
    if (m.backend == ScaleBackend::Rational) {
        double v = 0.0;
        for (std::size_t i = 0; i + 1 < m.comps.size(); ++i) {
            const auto& c = m.comps[i];
            v -= c.rate == 0.0 ? c.coef * x : c.coef * std::expm1(c.rate * x) / c.rate;
        }
        return v;
    }
    return m.bounded(x, 1)[3];
}

ScaleFunction make_scale(const LevyModel& model, double q, ScaleOptions options) {
    return ScaleFunction(model, q, options);
}

double exit_probability(const ScaleFunction& w, double x, double a) {
    if (!(a > 0.0) || !(x >= 0.0) || x > a) fail(ErrorCode::Domain, "exit probability needs 0 <= x <= a, a > 0");
    if (x == a) return 1.0;
    return w.w(x) / w.w(a);
}

double laplace_roundtrip_error(const ScaleFunction& w, std::span<const double> thetas) {
    const double phi = w.phi();
    const double q = w.q();
    const double slope = w.model().psi_prime(phi);
    double worst = 0.0;
    for (double theta : thetas) {
        if (!(theta > phi)) fail(ErrorCode::Domain, "round-trip grid must lie to the right of Φ(q)");
        const double target = 1.0 / (w.model().psi(theta) - q);
        const double gap = theta - phi;
        // Tail beyond X is about e^{-(θ-Φ)X} / ((θ-Φ) ψ'(Φ)); push it under 1e-12 of the integral.
        const double tail_scale = 1.0 / (gap * std::max(slope, 1e-300));
        const double upper = std::max(1.0, std::log(std::max(tail_scale / (1e-12 * std::abs(target)), 1.0)) / gap);
        std::vector<double> pts{0.0};
        for (double p = upper / 4096.0; p < upper; p *= 2.0) pts.push_back(p);
        pts.push_back(upper);
        const double integral = quad::integrate_pieces(
            [&](double x) { return std::exp(-theta * x) * w.w(x); }, pts, quad::Tolerance{1e-15, 1e-12, 4000});
        worst = std::max(worst, std::abs(integral - target) / std::abs(target));
    }
    return worst;
}

} // namespace refract
