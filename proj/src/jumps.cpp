#include "refract/jumps.hpp"

#include "refract/error.hpp"
#include "refract/quadrature.hpp"

#include <boost/math/quadrature/gauss.hpp>
#include <boost/math/special_functions/expint.hpp>
#include <boost/math/special_functions/gamma.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

namespace refract {

namespace {

constexpr double inf = std::numeric_limits<double>::infinity();

const quad::Tolerance jump_tol{1e-14, 1e-12, 4000};

// 1 - e^{-z} without cancellation for small |z|.
cplx one_minus_exp(cplx z) {
    if (std::abs(z) < 1e-3) {
        return z * (1.0 - z * (0.5 - z * (1.0 / 6.0 - z / 24.0)));
    }
    return 1.0 - std::exp(-z);
}

// ∫_0^w e^{-zs} ds and ∫_0^w s e^{-zs} ds.
cplx seg_g0(cplx z, double w) {
    const cplx zw = z * w;
    if (std::abs(zw) < 1e-3) return w * (1.0 - zw * (0.5 - zw * (1.0 / 6.0 - zw / 24.0)));
    return (1.0 - std::exp(-zw)) / z;
}

double seg_g1(double z, double w) {
    const double zw = z * w;
    if (std::abs(zw) < 1e-3) return w * w * (0.5 - zw * (1.0 / 3.0 - zw * (0.125 - zw / 30.0)));
    return (1.0 - std::exp(-zw) * (1.0 + zw)) / (z * z);
}

// Γ(s) [Q(s, lo) - Q(s, hi)], s > 0.
double gamma_window(double s, double lo, double hi) {
    using boost::math::gamma_q;
    using boost::math::tgamma;
    const double qlo = lo <= 0.0 ? 1.0 : gamma_q(s, lo);
    const double qhi = std::isinf(hi) ? 0.0 : gamma_q(s, hi);
    return tgamma(s) * (qlo - qhi);
}

} // namespace

const char* to_string(Monotonicity m) {
    switch (m) {
    case Monotonicity::CompletelyMonotone: return "yes";
    case Monotonicity::NotCompletelyMonotone: return "no";
    case Monotonicity::Unknown: return "unknown";
    }
    return "unknown";
}

namespace detail {

class Family {
public:
    explicit Family(double eps) : eps_(eps) {}
    virtual ~Family() = default;

    double eps() const { return eps_; }

    virtual double pdf(double x) const = 0;
    virtual cplx pdf(cplx x) const = 0;
    // π(x) behaves like x^p near zero.
    virtual double pole_exponent() const { return 0.0; }
    virtual Monotonicity shape() const { return Monotonicity::CompletelyMonotone; }
    // True when the closed-form hooks below already account for the cutoff.
    virtual bool cutoff_aware() const { return false; }
    virtual bool uses_table() const { return true; }

    // ∫_lo^hi x^k π(x) dx of the uncut density, 0 ≤ lo < hi ≤ ∞.
    virtual double raw_moment(int k, double lo, double hi) const { return quad_moment(k, lo, hi); }
    virtual std::optional<cplx> raw_laplace(cplx) const { return std::nullopt; }
    virtual std::optional<double> raw_laplace_slope(double) const { return std::nullopt; }
    virtual std::optional<cplx> raw_compensated(cplx) const { return std::nullopt; }
    virtual std::optional<double> raw_compensated_slope(double) const { return std::nullopt; }
    // Draw from π restricted to (eps, ∞).
    virtual double draw(Rng& rng) const { return table_draw(rng); }

    double density(double x) const { return x > eps_ ? pdf(x) : 0.0; }

    double moment(int k, double lo, double hi) const {
        lo = std::max(lo, eps_);
        if (!(hi > lo)) return 0.0;
        if (lo == 0.0 && k + pole_exponent() <= -1.0) return inf;
        return raw_moment(k, lo, hi);
    }

    double tail(double x) const { return moment(0, std::max(x, 0.0), inf); }

    cplx laplace(cplx theta) const {
        if (eps_ == 0.0 || cutoff_aware()) {
            if (auto v = raw_laplace(theta)) return *v;
        }
        if (theta == cplx(0.0)) return 0.0;
        // Rotate the ray so that Re(θx) grows along it; the integrand is analytic in between.
        const double phi = std::abs(theta.imag()) > 0.0 ? -0.5 * std::arg(theta) : 0.0;
        if (phi == 0.0 && theta.real() > 0.0) return laplace(theta.real());
        const cplx dir = std::polar(1.0, phi);
        auto f = [&](double rho) -> cplx {
            const cplx x = eps_ + rho * dir;
            return one_minus_exp(theta * x) * pdf(x) * dir;
        };
        return quad::integrate_to_infinity(f, 0.0, 1.0, jump_tol);
    }

    double laplace(double theta) const {
        if (eps_ == 0.0 || cutoff_aware()) {
            if (auto v = raw_laplace(cplx(theta))) return v->real();
        }
        if (theta == 0.0) return 0.0;
        auto f = [&](double x) { return -std::expm1(-theta * x) * pdf(x); };
        return split_integral(f);
    }

    double laplace_slope(double theta) const {
        if (theta <= 0.0) return moment(1, 0.0, inf);
        if (eps_ == 0.0 || cutoff_aware()) {
            if (auto v = raw_laplace_slope(theta)) return *v;
        }
        auto f = [&](double x) { return x * std::exp(-theta * x) * pdf(x); };
        return split_integral(f);
    }

    cplx compensated(cplx theta) const {
        if (eps_ == 0.0) {
            if (auto v = raw_compensated(theta)) return *v;
        }
        return laplace(theta) - theta * moment(1, 0.0, 1.0);
    }

    double compensated_slope(double theta) const {
        if (eps_ == 0.0) {
            if (auto v = raw_compensated_slope(theta)) return *v;
        }
        return laplace_slope(theta) - moment(1, 0.0, 1.0);
    }

    void prepare_sampling() {
        if (sampler_ready_ || !uses_table()) return;
        build_table();
        sampler_ready_ = true;
    }

protected:
    // Integrates over (eps, ∞) with a break at 1 so that near-zero singularities are isolated.
    template <class F>
    double split_integral(F& f) const {
        const double lo = eps_;
        if (lo >= 1.0) return quad::integrate_to_infinity(f, lo, 1.0, jump_tol);
        return singular_piece(f, lo, 1.0) + quad::integrate_to_infinity(f, 1.0, 1.0, jump_tol);
    }

    // ∫_lo^hi f with a power substitution when lo = 0 and π is singular at the origin.
    template <class F>
    double singular_piece(F& f, double lo, double hi, double extra_power = 0.0) const {
        const double p = pole_exponent() + extra_power;
        if (lo > 0.0 || p >= 0.0) return quad::integrate(f, lo, hi, jump_tol);
        const double m = std::min(50.0, 1.0 / std::max(p + 1.0, 0.02));
        const double umax = std::pow(hi, 1.0 / m);
        auto g = [&](double u) {
            if (u <= 0.0) return 0.0;
            const double x = std::pow(u, m);
            return f(x) * m * x / u;
        };
        return quad::integrate(g, 0.0, umax, jump_tol);
    }

    double quad_moment(int k, double lo, double hi) const {
        auto f = [&](double x) { return std::pow(x, k) * pdf(x); };
        double sum = 0.0;
        if (lo < 1.0) {
            sum += singular_piece(f, lo, std::min(hi, 1.0), k);
            lo = 1.0;
        }
        if (hi > lo) {
            sum += std::isinf(hi) ? quad::integrate_to_infinity(f, lo, 1.0, jump_tol)
                                  : quad::integrate(f, lo, hi, jump_tol);
        }
        return sum;
    }

private:
    // Geometric grid from eps with the tail mass above each node; inverse by bisection inside a cell.
    void build_table() {
        if (!(eps_ > 0.0) && pole_exponent() <= -1.0) {
            fail(ErrorCode::Validation, "cannot sample from an infinite-activity jump density");
        }
        std::vector<double> xs{eps_};
        std::vector<double> pieces;
        double total = 0.0;
        double x = eps_;
        for (int i = 0; i < 4000; ++i) {
            const double next = x > 0.0 ? x * 1.1 + 1e-3 : 1e-3;
            const double piece = quad::integrate([&](double y) { return pdf(y); }, x, next, jump_tol);
            pieces.push_back(piece);
            xs.push_back(next);
            total += piece;
            x = next;
            if (piece < 1e-17 * total && x > 1.0) break;
        }
        table_x_ = xs;
        table_tail_.assign(xs.size(), 0.0);
        for (std::size_t i = pieces.size(); i-- > 0;) table_tail_[i] = table_tail_[i + 1] + pieces[i];
    }

    double table_draw(Rng& rng) const {
        const double target = rng.uniform() * table_tail_.front();
        // table_tail_ is decreasing: find the cell with tail[i] >= target > tail[i+1].
        auto it = std::upper_bound(table_tail_.begin(), table_tail_.end(), target,
                                   [](double t, double v) { return t > v; });
        std::size_t i = static_cast<std::size_t>(std::distance(table_tail_.begin(), it));
        i = std::clamp<std::size_t>(i, 1, table_tail_.size() - 1) - 1;
        const double lo = table_x_[i];
        const double hi = table_x_[i + 1];
        const double need = table_tail_[i] - target;  // mass to move right of table_x_[i]
        // Cells are narrow and π is smooth inside, so a fixed Gauss rule is exact to roundoff;
        // Newton on the cell's cumulative mass, kept inside the bracket.
        auto mass = [&](double m) {
            return boost::math::quadrature::gauss<double, 15>::integrate([&](double y) { return pdf(y); }, lo, m);
        };
        const double cell = table_tail_[i] - table_tail_[i + 1];
        double m = lo + (hi - lo) * std::clamp(need / cell, 0.0, 1.0);
        double a = lo;
        double b = hi;
        for (int iter = 0; iter < 50; ++iter) {
            const double g = mass(m) - need;
            if (g < 0.0) a = m;
            else b = m;
            double next = m - g / pdf(m);
            if (!(next > a && next < b)) next = 0.5 * (a + b);
            if (std::abs(next - m) <= 1e-14 * m || b - a <= 1e-14 * b) return next;
            m = next;
        }
        return m;
    }

    double eps_;
    bool sampler_ready_ = false;
    std::vector<double> table_x_;
    std::vector<double> table_tail_;
};

namespace {

class ExpMixtureFamily final : public Family {
public:
    ExpMixtureFamily(const ExpMixtureJumps& s, double eps) : Family(eps) {
        for (const auto& t : s.terms) poles_.push_back({s.intensity * t.weight, t.rate});
    }

    double pdf(double x) const override {
        double v = 0.0;
        for (const auto& p : poles_) v += p.mass * p.rate * std::exp(-p.rate * x);
        return v;
    }
    cplx pdf(cplx x) const override {
        cplx v = 0.0;
        for (const auto& p : poles_) v += p.mass * p.rate * std::exp(-p.rate * x);
        return v;
    }

    double raw_moment(int k, double lo, double hi) const override {
        double v = 0.0;
        for (const auto& p : poles_) {
            v += p.mass * std::pow(p.rate, -k) *
                 gamma_window(k + 1.0, p.rate * lo, std::isinf(hi) ? inf : p.rate * hi);
        }
        return v;
    }

    bool cutoff_aware() const override { return true; }
    bool uses_table() const override { return false; }

    std::optional<double> raw_laplace_slope(double theta) const override {
        const double e = eps();
        double v = 0.0;
        for (const auto& p : poles_) {
            const double z = p.rate + theta;
            v += p.mass * p.rate * std::exp(-z * e) * (e / z + 1.0 / (z * z));
        }
        return v;
    }

    std::optional<cplx> raw_laplace(cplx theta) const override {
        const double e = eps();
        cplx v = 0.0;
        for (const auto& p : poles_) {
            const double head = std::exp(-p.rate * e);
            if (e == 0.0) v += p.mass * theta / (p.rate + theta);
            else v += p.mass * (head - p.rate * std::exp(-(p.rate + theta) * e) / (p.rate + theta));
        }
        return v;
    }

    double draw(Rng& rng) const override {
        double total = 0.0;
        for (const auto& p : poles_) total += p.mass * std::exp(-p.rate * eps());
        double u = rng.uniform() * total;
        std::size_t chosen = poles_.size() - 1;
        for (std::size_t i = 0; i < poles_.size(); ++i) {
            u -= poles_[i].mass * std::exp(-poles_[i].rate * eps());
            if (u <= 0.0) {
                chosen = i;
                break;
            }
        }
        return eps() + rng.exponential(poles_[chosen].rate);
    }

    const std::vector<ExpPole>& poles() const { return poles_; }

private:
    std::vector<ExpPole> poles_;
};

class GammaFamily final : public Family {
public:
    bool uses_table() const override { return false; }
    GammaFamily(const GammaJumps& s, double eps) : Family(eps), s_(s) {
        norm_ = s.intensity / (boost::math::tgamma(s.shape) * std::pow(s.scale, s.shape));
    }

    double pdf(double x) const override {
        return norm_ * std::pow(x, s_.shape - 1.0) * std::exp(-x / s_.scale);
    }
    cplx pdf(cplx x) const override {
        return norm_ * std::pow(x, s_.shape - 1.0) * std::exp(-x / s_.scale);
    }
    double pole_exponent() const override { return s_.shape - 1.0; }

    double raw_moment(int k, double lo, double hi) const override {
        const double c = s_.shape;
        const double b = s_.scale;
        return s_.intensity * std::pow(b, k) / boost::math::tgamma(c) *
               gamma_window(c + k, lo / b, std::isinf(hi) ? inf : hi / b);
    }

    std::optional<cplx> raw_laplace(cplx theta) const override {
        return s_.intensity * (1.0 - std::pow(1.0 + s_.scale * theta, -s_.shape));
    }
    std::optional<double> raw_laplace_slope(double theta) const override {
        return s_.intensity * s_.shape * s_.scale * std::pow(1.0 + s_.scale * theta, -s_.shape - 1.0);
    }

    double draw(Rng& rng) const override {
        const double top = boost::math::gamma_q(s_.shape, eps() / s_.scale);
        const double u = rng.uniform() * top;
        return s_.scale * boost::math::gamma_q_inv(s_.shape, u);
    }

private:
    GammaJumps s_;
    double norm_;
};

class ParetoFamily final : public Family {
public:
    bool uses_table() const override { return false; }
    ParetoFamily(const ParetoJumps& s, double eps) : Family(eps), s_(s) {}

    double pdf(double x) const override {
        return s_.intensity * s_.index * std::pow(1.0 + x, -s_.index - 1.0);
    }
    cplx pdf(cplx x) const override {
        return s_.intensity * s_.index * std::pow(1.0 + x, -s_.index - 1.0);
    }

    double raw_moment(int k, double lo, double hi) const override {
        const double a = s_.index;
        const double lam = s_.intensity;
        if (k == 0) {
            const double top = std::isinf(hi) ? 0.0 : std::pow(1.0 + hi, -a);
            return lam * (std::pow(1.0 + lo, -a) - top);
        }
        if (k == 1) {
            if (std::isinf(hi) && a <= 1.0) return inf;
            // antiderivative of x α (1+x)^{-α-1}
            auto F = [a](double x) {
                const double first = -x * std::pow(1.0 + x, -a);
                const double second =
                    a == 1.0 ? std::log1p(x) : std::pow(1.0 + x, 1.0 - a) / (1.0 - a);
                return first + second;
            };
            const double top = std::isinf(hi) ? 0.0 : F(hi);
            return lam * (top - F(lo));
        }
        if (std::isinf(hi) && a <= k) return inf;
        return quad_moment(k, lo, hi);
    }

    // ∫(1 - e^{-θx}) π = λ(1 - α e^θ θ^α Γ(-α, θ)). The power series is accurate while
    // e^{|θ| + Re θ} is moderate (that is its cancellation factor); a continued fraction serves
    // the rest, and quadrature is the last resort.
    std::optional<cplx> raw_laplace(cplx theta) const override {
        const double r = std::abs(theta);
        if (r + theta.real() < 12.0 && r < 60.0) {
            if (auto v = series_laplace(theta)) return v;
        }
        return fraction_laplace(theta);
    }

    double draw(Rng& rng) const override {
        return (1.0 + eps()) * std::pow(rng.uniform(), -1.0 / s_.index) - 1.0;
    }

private:
    std::optional<cplx> fraction_laplace(cplx theta) const {
        const double a = s_.index;
        const double tiny = 1e-300;
        cplx b = theta + 1.0 + a;
        cplx c = 1.0 / tiny;
        cplx d = 1.0 / b;
        cplx h = d;
        for (int i = 1; i < 2000; ++i) {
            const double an = -i * (i + a);
            b += 2.0;
            d = an * d + b;
            if (std::abs(d) < tiny) d = tiny;
            c = b + an / c;
            if (std::abs(c) < tiny) c = tiny;
            d = 1.0 / d;
            const cplx del = d * c;
            h *= del;
            if (std::abs(del - 1.0) < 1e-15) return s_.intensity * (1.0 - a * h);
        }
        return std::nullopt;
    }

    // Γ(-α, z) = Γ(-α) - z^{-α} Σ (-z)^n / (n! (n - α)) for non-integer α. The n = 0 term is
    // split off so that 1 - e^z is formed by expm1 and small θ keeps its relative accuracy.
    std::optional<cplx> series_laplace(cplx z) const {
        const double a = s_.index;
        if (a == std::round(a)) return std::nullopt;
        if (z == cplx(0.0)) return cplx(0.0);
        cplx term = 1.0;
        cplx rest = 0.0;
        for (int n = 1; n < 4000; ++n) {
            term *= -z / static_cast<double>(n);
            const cplx add = term / (n - a);
            rest += add;
            if (n > 2.0 * std::abs(z) && std::abs(add) < 1e-17 * std::abs(rest)) break;
        }
        const double x = z.real();
        const double y = z.imag();
        const double sh = std::sin(0.5 * y);
        const cplx em1(std::expm1(x) * std::cos(y) - 2.0 * sh * sh, std::exp(x) * std::sin(y));
        const cplx tail = a * boost::math::tgamma(-a) * std::pow(z, a) - a * rest;
        return s_.intensity * (-em1 - std::exp(z) * tail);
    }

    ParetoJumps s_;
};

class WeibullFamily final : public Family {
public:
    bool uses_table() const override { return false; }
    WeibullFamily(const WeibullJumps& s, double eps) : Family(eps), s_(s) {}

    double pdf(double x) const override {
        const double xr = std::pow(x, s_.shape);
        return s_.intensity * s_.scale * s_.shape * xr / x * std::exp(-s_.scale * xr);
    }
    cplx pdf(cplx x) const override {
        const cplx xr = std::pow(x, s_.shape);
        return s_.intensity * s_.scale * s_.shape * xr / x * std::exp(-s_.scale * xr);
    }
    double pole_exponent() const override { return s_.shape - 1.0; }

    double raw_moment(int k, double lo, double hi) const override {
        const double c = s_.scale;
        const double r = s_.shape;
        const double ulo = c * std::pow(lo, r);
        const double uhi = std::isinf(hi) ? inf : c * std::pow(hi, r);
        return s_.intensity * std::pow(c, -k / r) * gamma_window(1.0 + k / r, ulo, uhi);
    }

    double draw(Rng& rng) const override {
        const double base = std::pow(eps(), s_.shape);
        return std::pow(-std::log(rng.uniform()) / s_.scale + base, 1.0 / s_.shape);
    }

private:
    WeibullJumps s_;
};

class TemperedStableFamily final : public Family {
public:
    TemperedStableFamily(const TemperedStableJumps& s, double eps) : Family(eps), s_(s) {
        const double a = s.stability;
        if (a >= 1.0) {
            // ∫_1^∞ x^{-α} e^{-βx} dx
            large_ = quad::integrate_to_infinity(
                [&](double x) { return std::pow(x, -a) * std::exp(-s.tilt * x); }, 1.0, 1.0, jump_tol);
        }
    }

    double pdf(double x) const override {
        return s_.intensity * std::pow(x, -1.0 - s_.stability) * std::exp(-s_.tilt * x);
    }
    cplx pdf(cplx x) const override {
        return s_.intensity * std::pow(x, -1.0 - s_.stability) * std::exp(-s_.tilt * x);
    }
    double pole_exponent() const override { return -1.0 - s_.stability; }

    double raw_moment(int k, double lo, double hi) const override {
        const double s = k - s_.stability;
        if (s > 0.0) {
            const double b = s_.tilt;
            return s_.intensity * std::pow(b, -s) * gamma_window(s, b * lo, std::isinf(hi) ? inf : b * hi);
        }
        return quad_moment(k, lo, hi);
    }

    std::optional<cplx> raw_laplace(cplx theta) const override {
        const double a = s_.stability;
        const double b = s_.tilt;
        const double lam = s_.intensity;
        if (a >= 1.0) return std::nullopt;
        if (a == 0.0) return lam * std::log(1.0 + theta / b);
        return lam * boost::math::tgamma(-a) * (std::pow(b, a) - std::pow(b + theta, a));
    }

    std::optional<double> raw_laplace_slope(double theta) const override {
        const double a = s_.stability;
        if (a >= 1.0) return std::nullopt;
        return s_.intensity * boost::math::tgamma(1.0 - a) * std::pow(s_.tilt + theta, a - 1.0);
    }

    std::optional<cplx> raw_compensated(cplx theta) const override {
        const double a = s_.stability;
        const double b = s_.tilt;
        const double lam = s_.intensity;
        if (a < 1.0) return std::nullopt;
        if (a == 1.0) {
            return -lam * ((b + theta) * std::log(1.0 + theta / b) - theta) +
                   theta * lam * boost::math::expint(1, b);
        }
        return -lam * boost::math::tgamma(-a) *
                   (std::pow(b + theta, a) - std::pow(b, a) - a * std::pow(b, a - 1.0) * theta) +
               theta * lam * large_;
    }

    std::optional<double> raw_compensated_slope(double theta) const override {
        const double a = s_.stability;
        const double b = s_.tilt;
        const double lam = s_.intensity;
        if (a < 1.0) return std::nullopt;
        if (a == 1.0) return -lam * std::log1p(theta / b) + lam * boost::math::expint(1, b);
        return -lam * boost::math::tgamma(-a) * a * (std::pow(b + theta, a - 1.0) - std::pow(b, a - 1.0)) +
               lam * large_;
    }

private:
    TemperedStableJumps s_;
    double large_ = 0.0;
};

class TabulatedFamily final : public Family {
public:
    TabulatedFamily(const TabulatedJumps& s, double eps) : Family(eps) {
        const auto& x = s.x;
        const auto& p = s.density;
        if (x.front() > 0.0) segs_.push_back({0.0, x.front(), p.front(), 0.0});
        for (std::size_t i = 0; i + 1 < x.size(); ++i) {
            const double w = x[i + 1] - x[i];
            segs_.push_back({x[i], w, p[i], std::log(p[i] / p[i + 1]) / w});
        }
        // Apply the cutoff by clipping.
        std::vector<Seg> kept;
        for (auto g : segs_) {
            const double r = g.l + g.w;
            if (r <= eps) continue;
            if (g.l < eps) {
                g.p *= std::exp(-g.kappa * (eps - g.l));
                g.w = r - eps;
                g.l = eps;
            }
            kept.push_back(g);
        }
        segs_ = kept;
        for (const auto& g : segs_) seg_mass_.push_back(g.p * seg_g0(g.kappa, g.w).real());
    }

    double pdf(double x) const override {
        for (const auto& g : segs_) {
            if (x >= g.l && x <= g.l + g.w) return g.p * std::exp(-g.kappa * (x - g.l));
        }
        return 0.0;
    }
    cplx pdf(cplx x) const override { return pdf(x.real()); }
    Monotonicity shape() const override { return Monotonicity::Unknown; }
    bool cutoff_aware() const override { return true; }
    bool uses_table() const override { return false; }

    double raw_moment(int k, double lo, double hi) const override {
        double v = 0.0;
        for (const auto& g : segs_) {
            const double a = std::max(lo, g.l);
            const double b = std::min(hi, g.l + g.w);
            if (!(b > a)) continue;
            if (k == 0) {
                v += g.p * std::exp(-g.kappa * (a - g.l)) * seg_g0(g.kappa, b - a).real();
            } else {
                v += quad::integrate(
                    [&](double y) { return std::pow(y, k) * g.p * std::exp(-g.kappa * (y - g.l)); }, a, b,
                    jump_tol);
            }
        }
        return v;
    }

    std::optional<cplx> raw_laplace(cplx theta) const override {
        cplx v = 0.0;
        for (std::size_t i = 0; i < segs_.size(); ++i) {
            const auto& g = segs_[i];
            const cplx expo = -theta * g.l;
            // Far left of the imaginary axis the continuation overflows; treat as a pole at infinity.
            if (expo.real() > 700.0) return cplx(inf, 0.0);
            v += seg_mass_[i] - g.p * std::exp(expo) * seg_g0(theta + g.kappa, g.w);
        }
        return v;
    }

    std::optional<double> raw_laplace_slope(double theta) const override {
        double v = 0.0;
        for (const auto& g : segs_) {
            const double z = theta + g.kappa;
            v += g.p * std::exp(-theta * g.l) * (g.l * seg_g0(z, g.w).real() + seg_g1(z, g.w));
        }
        return v;
    }

    double draw(Rng& rng) const override {
        double total = 0.0;
        for (double m : seg_mass_) total += m;
        double u = rng.uniform() * total;
        std::size_t i = 0;
        for (; i + 1 < segs_.size(); ++i) {
            if (u <= seg_mass_[i]) break;
            u -= seg_mass_[i];
        }
        const auto& g = segs_[i];
        const double frac = std::clamp(u / seg_mass_[i], 0.0, 1.0);
        if (g.kappa * g.w < 1e-12) return g.l + frac * g.w;
        return g.l - std::log1p(-frac * (-std::expm1(-g.kappa * g.w))) / g.kappa;
    }

private:
    struct Seg {
        double l;
        double w;
        double p;
        double kappa;
    };
    std::vector<Seg> segs_;
    std::vector<double> seg_mass_;
};

std::string family_name(const JumpFamily& f) {
    return std::visit(
        [](const auto& s) -> std::string {
            using T = std::decay_t<decltype(s)>;
            if constexpr (std::is_same_v<T, ExpMixtureJumps>) return "exp_mixture";
            else if constexpr (std::is_same_v<T, GammaJumps>) return "gamma";
            else if constexpr (std::is_same_v<T, ParetoJumps>) return "pareto";
            else if constexpr (std::is_same_v<T, WeibullJumps>) return "weibull";
            else if constexpr (std::is_same_v<T, TemperedStableJumps>) return "tempered_stable";
            else return "tabulated";
        },
        f);
}

void require(bool ok, const std::string& what) {
    if (!ok) fail(ErrorCode::Validation, what);
}

bool positive(double v) { return std::isfinite(v) && v > 0.0; }

void validate(const JumpFamily& family) {
    const std::string name = family_name(family);
    std::visit(
        [&](const auto& s) {
            using T = std::decay_t<decltype(s)>;
            if constexpr (std::is_same_v<T, ExpMixtureJumps>) {
                require(!s.terms.empty(), name + ": at least one term required");
                require(positive(s.intensity), name + ": intensity must be positive");
                for (const auto& t : s.terms) {
                    require(positive(t.weight), name + ": weights must be positive");
                    require(positive(t.rate), name + ": rates must be positive");
                }
            } else if constexpr (std::is_same_v<T, GammaJumps>) {
                require(positive(s.shape) && s.shape <= 1.0, name + ": shape must lie in (0, 1]");
                require(positive(s.scale), name + ": scale must be positive");
                require(positive(s.intensity), name + ": intensity must be positive");
            } else if constexpr (std::is_same_v<T, ParetoJumps>) {
                require(positive(s.index), name + ": index must be positive");
                require(positive(s.intensity), name + ": intensity must be positive");
            } else if constexpr (std::is_same_v<T, WeibullJumps>) {
                require(positive(s.scale), name + ": scale must be positive");
                require(positive(s.shape) && s.shape < 1.0, name + ": shape must lie in (0, 1)");
                require(positive(s.intensity), name + ": intensity must be positive");
            } else if constexpr (std::is_same_v<T, TemperedStableJumps>) {
                require(positive(s.intensity), name + ": intensity must be positive");
                require(positive(s.tilt), name + ": tilt must be positive");
                require(std::isfinite(s.stability) && s.stability >= -1.0,
                        name + ": stability must be at least -1");
                if (s.stability >= 2.0) {
                    fail(ErrorCode::Integrability,
                         name + ": stability >= 2 makes the small-jump second moment diverge");
                }
            } else {
                require(s.x.size() >= 2 && s.x.size() == s.density.size(),
                        name + ": need at least two (x, density) pairs of equal length");
                require(std::isfinite(s.x.front()) && s.x.front() >= 0.0, name + ": grid must start at x >= 0");
                for (std::size_t i = 0; i < s.x.size(); ++i) {
                    require(positive(s.density[i]), name + ": density values must be positive");
                    if (i > 0) {
                        require(std::isfinite(s.x[i]) && s.x[i] > s.x[i - 1], name + ": grid must increase");
                        require(s.density[i] <= s.density[i - 1], name + ": density must be nonincreasing");
                    }
                }
            }
        },
        family);
}

std::shared_ptr<Family> make_family(const JumpComponent& c) {
    return std::visit(
        [&](const auto& s) -> std::shared_ptr<Family> {
            using T = std::decay_t<decltype(s)>;
            if constexpr (std::is_same_v<T, ExpMixtureJumps>) return std::make_shared<ExpMixtureFamily>(s, c.cutoff);
            else if constexpr (std::is_same_v<T, GammaJumps>) return std::make_shared<GammaFamily>(s, c.cutoff);
            else if constexpr (std::is_same_v<T, ParetoJumps>) return std::make_shared<ParetoFamily>(s, c.cutoff);
            else if constexpr (std::is_same_v<T, WeibullJumps>) return std::make_shared<WeibullFamily>(s, c.cutoff);
            else if constexpr (std::is_same_v<T, TemperedStableJumps>)
                return std::make_shared<TemperedStableFamily>(s, c.cutoff);
            else return std::make_shared<TabulatedFamily>(s, c.cutoff);
        },
        c.family);
}

// Divided differences of π on a log grid must alternate in sign up to order 3.
void smoke_check_cm(const Family& f, const std::string& name) {
    constexpr int n = 40;
    std::vector<double> x(n), d(n);
    for (int i = 0; i < n; ++i) {
        x[i] = 1e-2 * std::pow(1e4, static_cast<double>(i) / (n - 1));
        d[i] = f.pdf(x[i]);
    }
    for (int order = 1; order <= 3; ++order) {
        std::vector<double> next(d.size() - 1);
        double scale = 0.0;
        for (std::size_t i = 0; i + 1 < d.size(); ++i) {
            next[i] = (d[i + 1] - d[i]) / (x[i + order] - x[i]);
            scale = std::max(scale, std::abs(next[i]));
        }
        const double sign = order % 2 == 1 ? -1.0 : 1.0;
        for (double v : next) {
            if (sign * v < -1e-9 * scale) {
                fail(ErrorCode::NotCompletelyMonotone,
                     name + ": divided differences of order " + std::to_string(order) +
                         " do not alternate in sign");
            }
        }
        d = std::move(next);
    }
}

} // namespace
} // namespace detail

Monotonicity classify(const JumpFamily& family) {
    return std::holds_alternative<TabulatedJumps>(family) ? Monotonicity::Unknown
                                                          : Monotonicity::CompletelyMonotone;
}

JumpMeasure::JumpMeasure(std::vector<JumpComponent> components) : components_(std::move(components)) {
    for (const auto& c : components_) {
        detail::validate(c.family);
        if (std::isnan(c.cutoff) || c.cutoff < 0.0) {
            fail(ErrorCode::Validation, "jump cutoff must be nonnegative");
        }
    }
    // Components cut beyond all their mass carry nothing; drop them.
    std::vector<JumpComponent> kept;
    for (const auto& c : components_) {
        auto fam = detail::make_family(c);
        if (fam->tail(c.cutoff) <= 0.0) continue;
        if (c.cutoff == 0.0 && classify(c.family) == Monotonicity::CompletelyMonotone) {
            detail::smoke_check_cm(*fam, detail::family_name(c.family));
        }
        kept.push_back(c);
        impl_.push_back(std::move(fam));
    }
    components_ = std::move(kept);
    for (auto& f : impl_) masses_.push_back(f->moment(0, 0.0, inf));
    if (finite_activity()) {
        for (auto& f : impl_) std::const_pointer_cast<detail::Family>(f)->prepare_sampling();
    }
    const double level = integrability();
    if (!std::isfinite(level)) {
        fail(ErrorCode::Integrability, "jump density violates the integrability condition on (1 ∧ x²)");
    }
}

double JumpMeasure::density(double x) const {
    if (!(x > 0.0)) return 0.0;
    double v = 0.0;
    for (const auto& f : impl_) v += f->density(x);
    return v;
}

double JumpMeasure::tail(double x) const {
    double v = 0.0;
    for (const auto& f : impl_) v += f->tail(x);
    return v;
}

double JumpMeasure::mass() const {
    double v = 0.0;
    for (double m : masses_) v += m;
    return v;
}

bool JumpMeasure::finite_activity() const { return std::isfinite(mass()); }

double JumpMeasure::moment(int k, double lo, double hi) const {
    double v = 0.0;
    for (const auto& f : impl_) v += f->moment(k, lo, hi);
    return v;
}

double JumpMeasure::small_jump_mean() const { return moment(1, 0.0, 1.0); }
double JumpMeasure::large_jump_mean() const { return moment(1, 1.0, inf); }
double JumpMeasure::integrability() const { return moment(2, 0.0, 1.0) + tail(1.0); }

double JumpMeasure::laplace(double theta) const {
    double v = 0.0;
    for (const auto& f : impl_) v += f->laplace(theta);
    return v;
}

cplx JumpMeasure::laplace(cplx theta) const {
    cplx v = 0.0;
    for (const auto& f : impl_) v += f->laplace(theta);
    return v;
}

double JumpMeasure::laplace_slope(double theta) const {
    double v = 0.0;
    for (const auto& f : impl_) v += f->laplace_slope(theta);
    return v;
}

double JumpMeasure::compensated(double theta) const {
    return compensated(cplx(theta)).real();
}

cplx JumpMeasure::compensated(cplx theta) const {
    cplx v = 0.0;
    for (const auto& f : impl_) v += f->compensated(theta);
    return v;
}

double JumpMeasure::compensated_slope(double theta) const {
    double v = 0.0;
    for (const auto& f : impl_) v += f->compensated_slope(theta);
    return v;
}

Monotonicity JumpMeasure::monotonicity() const {
    Monotonicity m = Monotonicity::CompletelyMonotone;
    for (const auto& c : components_) {
        if (c.cutoff > 0.0) return Monotonicity::NotCompletelyMonotone;
        if (classify(c.family) == Monotonicity::Unknown) m = Monotonicity::Unknown;
    }
    return m;
}

std::optional<std::vector<ExpPole>> JumpMeasure::exponential_poles() const {
    std::vector<ExpPole> poles;
    for (const auto& c : components_) {
        const auto* mix = std::get_if<ExpMixtureJumps>(&c.family);
        if (mix == nullptr || c.cutoff > 0.0) return std::nullopt;
        for (const auto& t : mix->terms) {
            const double mass = mix->intensity * t.weight;
            auto same = std::find_if(poles.begin(), poles.end(), [&](const ExpPole& p) {
                return std::abs(p.rate - t.rate) <= 1e-14 * t.rate;
            });
            if (same != poles.end()) same->mass += mass;
            else poles.push_back({mass, t.rate});
        }
    }
    std::sort(poles.begin(), poles.end(), [](const ExpPole& a, const ExpPole& b) { return a.rate < b.rate; });
    return poles;
}

double JumpMeasure::sample(Rng& rng) const {
    if (!finite_activity() || impl_.empty()) {
        fail(ErrorCode::Validation, "jump sampling needs a finite, nonzero jump rate");
    }
    std::size_t i = 0;
    if (impl_.size() > 1) {
        double u = rng.uniform() * mass();
        for (; i + 1 < impl_.size(); ++i) {
            if (u <= masses_[i]) break;
            u -= masses_[i];
        }
    }
    return impl_[i]->draw(rng);
}

JumpMeasure JumpMeasure::truncated(double eps) const {
    if (!(eps > 0.0)) fail(ErrorCode::Validation, "truncation level must be positive");
    std::vector<JumpComponent> cut = components_;
    for (auto& c : cut) c.cutoff = std::max(c.cutoff, eps);
    return JumpMeasure(std::move(cut));
}

JumpMeasure JumpMeasure::plus(const JumpMeasure& other) const {
    std::vector<JumpComponent> all = components_;
    all.insert(all.end(), other.components_.begin(), other.components_.end());
    return JumpMeasure(std::move(all));
}

} // namespace refract
