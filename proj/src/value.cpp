#include "refract/value.hpp"

#include "refract/error.hpp"
#include "refract/quadrature.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

namespace refract {

namespace {

constexpr double inf = std::numeric_limits<double>::infinity();

const quad::Tolerance inner_tol{1e-15, 1e-12, 4000};
const quad::Tolerance outer_tol{1e-14, 1e-11, 4000};
// Targets matched to the noise floor of the scale functions.
quad::Tolerance outer_for(const ScaleFunction& w) {
    const double rel = std::max(1e-11, 100.0 * w.accuracy());
    return {1e-3 * rel, rel, 4000};
}

quad::Tolerance inner_for(const ScaleFunction& w) {
    const double rel = std::max(1e-12, 10.0 * w.accuracy());
    return {1e-3 * rel, rel, 4000};
}

// Breakpoints graded toward lo, where integrands here may be singular or kinked.
std::vector<double> graded(double lo, double hi) {
    std::vector<double> pts{lo};
    const double w = hi - lo;
    for (double f : {1.0 / 4096, 1.0 / 256, 1.0 / 16}) pts.push_back(lo + f * w);
    pts.push_back(hi);
    return pts;
}

} // namespace

double threshold_normaliser(const ScaleFunction& w, double big_psi, double b) {
    if (w.backend() == ScaleBackend::Rational) {
        double v = 0.0;
        for (const auto& c : w.components()) v += c.coef * c.rate * std::exp(c.rate * b) / (big_psi - c.rate);
        return big_psi * v;
    }
    // The integrand decays like e^{-(Ψ - Φ)u}.
    const double span = 1.0 / (big_psi - w.phi());
    auto f = [&](double u) {
        const double e = std::exp(-big_psi * u);
        return e == 0.0 ? 0.0 : e * w.w_prime(b + u);
    };
    return big_psi * (quad::integrate_pieces(f, graded(0.0, span), outer_for(w)) +
                      quad::integrate_to_infinity(f, span, span, outer_for(w)));
}

struct ThresholdValueFunction::Impl {
    DividendProblem problem;
    ScaleFunction w;
    ScaleFunction ws;
    double b;
    ValueOptions options;
    AboveFormula formula = AboveFormula::Closed;
    double alpha = 0.0;
    double delta = 0.0;
    double big_psi = 0.0;
    double sigma = 0.0;
    double h = 0.0;
    double vbb = 0.0;
    double ws0 = 0.0;  // W*(0+)
    double ws1 = 0.0;  // W*'(0+)
    // Rational closed form: V(b + u) = vconst + Σ coef e^{rate u}, growing terms removed.
    bool expo = false;
    double vconst = 0.0;
    std::vector<ExpComponent> vterms;
    quad::Tolerance inner = inner_tol;
    quad::Tolerance outer = outer_tol;

    Impl(const DividendProblem& p, double b_, ScaleFunction w_, ScaleFunction ws_, ValueOptions opt)
        : problem(p), w(std::move(w_)), ws(std::move(ws_)), b(b_), options(opt) {}

    bool rational() const { return w.backend() == ScaleBackend::Rational && ws.backend() == ScaleBackend::Rational; }

    double compute_h() const { return threshold_normaliser(w, big_psi, b); }

    // g(y) = ∫_0^b π(y - z) W(z) dz for y > b.
    double g(double y) const {
        if (b <= 0.0) return 0.0;
        const auto& jumps = problem.model().jumps();
        // Substitute t = y - z so any singularity of π sits at the left end.
        auto f = [&](double t) { return jumps.density(t) * w.w(y - t); };
        const double lo = y - b;
        if (lo < 0.0) return inf;
        if (lo == 0.0 && !jumps.finite_activity()) return inf;
        return quad::integrate_pieces(f, graded(lo, y), inner);
    }

    // ∫_b^∞ u*(x-b, y-b) g(y) dy and its x-derivative (without the boundary term).
    double kernel_integral(double x, int order) const {
        const double u = x - b;
        auto wsd = [&](double v) { return order == 0 ? ws.w(v) : ws.w_prime(v); };
        const double wu = wsd(u);
        auto near = [&](double s) {
            const double gs = g(b + s);
            if (gs == 0.0) return 0.0;
            return (wu * std::exp(-big_psi * s) - wsd(u - s)) * gs;
        };
        auto far = [&](double s) {
            const double gs = g(b + s);
            return gs == 0.0 ? 0.0 : wu * std::exp(-big_psi * s) * gs;
        };
        double v = 0.0;
        if (u > 0.0) {
            std::vector<double> pts{0.0};
            for (double f : {1.0 / 4096, 1.0 / 256, 1.0 / 16, 0.5, 15.0 / 16, 255.0 / 256, 4095.0 / 4096}) {
                pts.push_back(f * u);
            }
            pts.push_back(u);
            v += quad::integrate_pieces(near, pts, outer);
        }
        const double scale = std::max(1.0, u);
        v += quad::integrate_pieces(far, graded(u, u + scale), outer);
        v += quad::integrate_to_infinity(far, u + scale, scale, outer);
        return v;
    }

    // The closed form rewritten in the remainders R = e^{Φx}/ψ'(Φ) - W and R* of W*. Substituting
    // the integral form of h cancels the e^{Ψu} and e^{Φu} growth analytically, so every term
    // stays bounded and V keeps its absolute accuracy far above b.
    double remainder_form(double x, int order) const {
        const double u = x - b;
        const double pw = w.phi();
        const double ps = ws.phi();
        const double kw = w.phi_slope();
        const double ks = ws.phi_slope();
        auto rp = [&](double y) { return w.remainder_prime(y); };
        // T1 = ∫_0^∞ e^{-Ψv} R'(x + v) dv
        const double s1 = 1.0 / ps;
        auto f1 = [&](double v) {
            const double e = std::exp(-ps * v);
            return e == 0.0 ? 0.0 : e * rp(x + v);
        };
        const double t1 =
            quad::integrate_pieces(f1, graded(0.0, s1), outer) + quad::integrate_to_infinity(f1, s1, s1, outer);
        // T2 = ∫_0^∞ R*(u + v) e^{-Φv} dv
        const double s2 = std::min(1.0 / pw, 1e3);
        auto f2 = [&](double v) {
            const double e = std::exp(-pw * v);
            return e == 0.0 ? 0.0 : e * ws.remainder(u + v);
        };
        const double t2 =
            quad::integrate_pieces(f2, graded(0.0, s2), outer) + quad::integrate_to_infinity(f2, s2, s2, outer);
        // T3 = ∫_0^u R*(u - s) R'(b + s) ds, or its u-derivative.
        double t3 = 0.0;
        if (u > 0.0) {
            auto f3 = [&](double s) {
                return (order == 0 ? ws.remainder(u - s) : ws.remainder_prime(u - s)) * rp(b + s);
            };
            std::vector<double> pts{0.0};
            for (double f : {1.0 / 4096, 1.0 / 256, 1.0 / 16, 0.5, 15.0 / 16, 255.0 / 256, 4095.0 / 4096}) {
                pts.push_back(f * u);
            }
            pts.push_back(u);
            t3 = quad::integrate_pieces(f3, pts, outer);
        }
        const double pref = pw * std::exp(pw * b) / kw;
        if (order == 0) {
            return alpha / (ps * ks) + alpha * ws.remainder_bar(u) - w.remainder(x) / h +
                   alpha / h * (t1 / ks + pref * t2 + t3);
        }
        const double rx = rp(x);
        t3 += ws.remainder(0.0) * rx;
        return alpha * ws.remainder(u) - rx / h +
               alpha / h * ((ps * t1 - rx) / ks + pref * (pw * t2 - ws.remainder(u)) + t3);
    }

    // Expands the closed form into exponentials. The coefficients of e^{Ψu} and e^{Φu} vanish
    // identically (by the definition of h and by ψ(Φ) = δ); dropping them removes the cancellation
    // between terms of size e^{Ψu} that otherwise swamps V at large u.
    void expand() {
        if (!rational() || formula != AboveFormula::Closed) return;
        const auto wc = w.components();
        const auto sc = ws.components();
        for (const auto& s : sc) {
            if (s.rate == 0.0) return;
            for (const auto& c : wc) {
                if (c.rate == s.rate) return;
            }
        }
        vconst = 0.0;
        vterms.clear();
        for (const auto& s : sc) {
            vconst += alpha * s.coef / s.rate;
            double a = -alpha * s.coef / s.rate;
            for (const auto& c : wc) a -= alpha / h * s.coef * c.coef * c.rate * std::exp(c.rate * b) / (c.rate - s.rate);
            if (s.rate < 0.0) vterms.push_back({s.rate, a});
        }
        for (const auto& c : wc) {
            double a = c.coef * std::exp(c.rate * b) / h;
            for (const auto& s : sc) a += alpha / h * s.coef * c.coef * c.rate * std::exp(c.rate * b) / (c.rate - s.rate);
            if (c.rate < 0.0) vterms.push_back({c.rate, a});
        }
        expo = true;
    }

    double expo_sum(double u, int order) const {
        double v = order == 0 ? vconst : 0.0;
        for (const auto& t : vterms) v += t.coef * std::pow(t.rate, order) * std::exp(t.rate * u);
        return v;
    }

    double above(double x) const {
        const double u = x - b;
        if (expo) return expo_sum(u, 0);
        if (formula == AboveFormula::Closed) {
            return remainder_form(x, 0);
        }
        double v = -alpha * ws.w_bar(u) + alpha / big_psi * ws.w(u);
        if (sigma > 0.0) v += 0.5 * sigma * sigma * vbb * (ws.w_prime(u) - big_psi * ws.w(u));
        return v + kernel_integral(x, 0) / h;
    }

    double above_prime(double x) const {
        const double u = x - b;
        if (expo) return expo_sum(u, 1);
        if (formula == AboveFormula::Closed) {
            return remainder_form(x, 1);
        }
        double v = -alpha * ws.w(u) + alpha / big_psi * ws.w_prime(u);
        if (sigma > 0.0) v += 0.5 * sigma * sigma * vbb * (ws.w_second(u) - big_psi * ws.w_prime(u));
        double k = kernel_integral(x, 1);
        if (ws0 != 0.0) k -= ws0 * g(x);
        return v + k / h;
    }

    double value(double x) const {
        if (x < 0.0) return 0.0;
        if (x < b) return vbb * exit_probability(w, x, b);
        if (x == b) return vbb;
        return above(x);
    }

    double derivative(double x, Side side) const {
        if (x < 0.0) return 0.0;
        if (x < b || (x == b && side == Side::Left && b > 0.0)) return w.w_prime(x) / h;
        return above_prime(x);
    }

    double second(double x) const {
        if (x < b && w.has_second()) return w.w_second(x) / h;
        if (x > b && expo) return expo_sum(x - b, 2);
        // Central difference of V', kept on one side of b and of 0.
        double step = 1e-4 * std::max(1.0, x);
        if (x != b) step = std::min(step, 0.5 * std::abs(x - b));
        step = std::min(step, 0.5 * x);
        const Side side = x < b ? Side::Left : Side::Right;
        return (derivative(x + step, side) - derivative(x - step, side)) / (2.0 * step);
    }

    double generator(double x, double cut) const {
        const auto& model = problem.model();
        const auto& jumps = model.jumps();
        const double v = value(x);
        const Side side = x < b ? Side::Left : Side::Right;
        const double vp = derivative(x, side);
        double out = (model.a() - cut) * vp;
        if (!jumps.empty()) {
            double y0 = 0.0;
            if (!jumps.finite_activity()) {
                y0 = std::min({1e-3, 0.1 * x, x == b ? 1e-3 : 0.1 * std::abs(x - b)});
            }
            auto f = [&](double y) { return value(x - y) * jumps.density(y); };
            // V has a kink at x - y = b; keep it on a breakpoint.
            std::vector<double> pts;
            if (x > b && x - b > y0) {
                pts = graded(y0, x - b);
                const auto rest = graded(x - b, x);
                pts.insert(pts.end(), rest.begin() + 1, rest.end());
            } else {
                pts = graded(y0, x);
            }
            out += quad::integrate_pieces(f, pts, outer);
            out -= v * jumps.tail(y0);
            if (y0 < 1.0) out += vp * jumps.moment(1, y0, 1.0);
            if (y0 > 0.0) out += 0.5 * second(x) * jumps.moment(2, 0.0, y0);
        }
        if (sigma > 0.0) out += 0.5 * sigma * sigma * second(x);
        return out;
    }
};

namespace {

const DividendProblem& threshold_problem(const DividendProblem& problem) {
    if (problem.barrier_limit()) {
        fail(ErrorCode::DegenerateModel, "α = c is the barrier limit; threshold values need α < c");
    }
    return problem;
}

} // namespace

ThresholdValueFunction::ThresholdValueFunction(const DividendProblem& problem, double b, ValueOptions options)
    : ThresholdValueFunction(
          problem, b, ScaleFunction(threshold_problem(problem).model(), problem.delta(), options.scale),
          ScaleFunction(threshold_problem(problem).refracted(), problem.delta(), options.scale), options) {}

ThresholdValueFunction::ThresholdValueFunction(const DividendProblem& problem, double b, ScaleFunction w,
                                               ScaleFunction w_star, ValueOptions options) {
    if (!(b >= 0.0) || !std::isfinite(b)) fail(ErrorCode::Domain, "threshold must be a finite b >= 0");
    threshold_problem(problem);
    auto impl = std::make_shared<Impl>(problem, b, std::move(w), std::move(w_star), options);
    impl->alpha = problem.alpha();
    impl->delta = problem.delta();
    impl->big_psi = problem.psi_delta();
    impl->sigma = problem.model().sigma();
    impl->ws0 = impl->ws.w_zero();
    impl->ws1 = impl->ws.w_prime_zero();
    const bool bv = problem.model().bounded_variation();
    const bool rational = impl->rational();
    if (!rational) {
        const auto& coarse = impl->w.accuracy() > impl->ws.accuracy() ? impl->w : impl->ws;
        impl->inner = inner_for(coarse);
        impl->outer = outer_for(coarse);
    }
    impl->formula = options.above == AboveFormula::Auto ? AboveFormula::Closed : options.above;
    if (impl->formula == AboveFormula::Integral && impl->sigma > 0.0 && !impl->ws.has_second()) {
        fail(ErrorCode::NotDifferentiable, "kernel form needs W*'' when σ > 0");
    }
    impl->h = impl->compute_h();
    if (!(impl->h > 0.0) || !std::isfinite(impl->h)) {
        fail(ErrorCode::QuadratureFailure, "threshold normaliser h(b) is not a positive finite number");
    }
    impl->vbb = impl->w.w(b) / impl->h;
    impl->expand();
    // V(b,b) from the displayed ratio is checked against the limit of the formula above b.
    if (impl->formula == AboveFormula::Integral && bv) {
        const double right = impl->above(b);
        if (std::abs(right - impl->vbb) > options.continuity_tolerance * std::max(impl->vbb, 1e-12)) {
            fail(ErrorCode::Divergence, "value function is discontinuous at the threshold");
        }
    }
    impl_ = std::move(impl);
}

const DividendProblem& ThresholdValueFunction::problem() const { return impl_->problem; }
const ScaleFunction& ThresholdValueFunction::w() const { return impl_->w; }
const ScaleFunction& ThresholdValueFunction::w_star() const { return impl_->ws; }
double ThresholdValueFunction::b() const { return impl_->b; }
double ThresholdValueFunction::v_at_b() const { return impl_->vbb; }
double ThresholdValueFunction::h() const { return impl_->h; }
AboveFormula ThresholdValueFunction::formula() const { return impl_->formula; }

double ThresholdValueFunction::value(double x) const { return impl_->value(x); }

double ThresholdValueFunction::derivative(double x, Side side) const { return impl_->derivative(x, side); }

double ThresholdValueFunction::second_derivative(double x) const {
    if (!(x > 0.0)) fail(ErrorCode::Domain, "V'' needs x > 0");
    return impl_->second(x);
}

double ThresholdValueFunction::generator(double x, double drift_cut) const {
    if (!(x > 0.0)) fail(ErrorCode::Domain, "generator needs x > 0");
    return impl_->generator(x, drift_cut);
}

double ThresholdValueFunction::ide_residual(double x) const {
    if (!(x > 0.0) || x == impl_->b) fail(ErrorCode::Domain, "IDE residual needs x > 0 and x != b");
    const double v = impl_->value(x);
    if (x < impl_->b) return impl_->generator(x, 0.0) - impl_->delta * v;
    return impl_->generator(x, impl_->alpha) - impl_->delta * v + impl_->alpha;
}

PastingReport ThresholdValueFunction::pasting() const {
    const auto& im = *impl_;
    if (!(im.b > 0.0)) fail(ErrorCode::Domain, "pasting diagnostics need b > 0");
    PastingReport r;
    r.continuity_gap = std::abs(im.above(im.b) - im.vbb);
    const double left = im.derivative(im.b, Side::Left);
    const double right = im.derivative(im.b, Side::Right);
    if (im.problem.model().bounded_variation()) {
        const double c = im.problem.model().c();
        r.pasting_gap = std::abs(c * left - (c - im.alpha) * right - im.alpha);
    } else {
        r.pasting_gap = std::abs(left - right);
    }
    return r;
}

double value_at_threshold(const DividendProblem& problem, double b) {
    return ThresholdValueFunction(problem, b).v_at_b();
}

double value(const DividendProblem& problem, double b, double x) {
    return ThresholdValueFunction(problem, b).value(x);
}

double value_derivative(const DividendProblem& problem, double b, double x, Side side) {
    return ThresholdValueFunction(problem, b).derivative(x, side);
}

double ide_residual(const DividendProblem& problem, double b, double x) {
    return ThresholdValueFunction(problem, b).ide_residual(x);
}

PastingReport pasting_report(const DividendProblem& problem, double b) {
    if (!(b > 0.0)) fail(ErrorCode::Domain, "pasting diagnostics need b > 0");
    return ThresholdValueFunction(problem, b).pasting();
}

} // namespace refract
