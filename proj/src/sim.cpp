#include "refract/sim.hpp"

#include "refract/error.hpp"
#include "refract/rng.hpp"

#include <boost/random/poisson_distribution.hpp>

#include <algorithm>
#include <cmath>
#include <exception>
#include <span>
#include <thread>

namespace refract {

namespace {

constexpr double inf = std::numeric_limits<double>::infinity();

// The simulated process: slope `drift` between jumps (less α above b), Gaussian part σ,
// jumps from a finite measure and extra jumps of fixed size at rate atom_rate.
struct Engine {
    double drift = 0.0;
    double sigma = 0.0;
    double alpha = 0.0;
    double delta = 0.0;
    double b = inf;
    double t_max = 0.0;
    double dt = 0.0;
    JumpMeasure jumps;
    double jump_rate = 0.0;
    double atom_rate = 0.0;
    double atom_size = 0.0;
    double total_rate = 0.0;

    // α ∫_{t1}^{t2} e^{-δs} ds
    double paid(double t1, double t2) const {
        return alpha * std::exp(-delta * t1) * -std::expm1(-delta * (t2 - t1)) / delta;
    }

    double draw_jump(Rng& rng) const {
        if (atom_rate > 0.0 && rng.uniform() * total_rate < atom_rate) return atom_size;
        return jumps.sample(rng);
    }

    double next_jump(Rng& rng, double t) const {
        return total_rate > 0.0 ? t + rng.exponential(total_rate) : inf;
    }

    PathRecord exact(double x0, Rng& rng) const;
    PathRecord euler(double x0, Rng& rng) const;
    PathRecord run(double x0, Rng& rng) const { return sigma > 0.0 ? euler(x0, rng) : exact(x0, rng); }
};

PathRecord Engine::exact(double x0, Rng& rng) const {
    PathRecord rec;
    double u = x0;
    double t = 0.0;
    double total = 0.0;
    // Moves the path to time `to` along the piecewise linear drift, paying above b.
    auto advance = [&](double to) {
        if (u < b) {
            const double t_hit = t + (b - u) / drift;
            if (t_hit < to) {
                total += paid(t_hit, to);
                u = b + (drift - alpha) * (to - t_hit);
            } else {
                u += drift * (to - t);
            }
        } else {
            total += paid(t, to);
            u += (drift - alpha) * (to - t);
        }
        t = to;
    };
    std::vector<double> times;
    double t_real = jump_rate > 0.0 ? rng.exponential(jump_rate) : inf;
    for (;;) {
        const double horizon = std::min(t_real, t_max);
        bool ruined = false;
        while (t < horizon && !ruined) {
            if (atom_rate == 0.0) {
                advance(horizon);
                break;
            }
            // Small fixed jumps. Far from b and from 0 they are counted in bulk over a window on
            // which the path provably stays on one side of b; otherwise they are placed one by one.
            const double slope = u < b ? drift : drift - alpha;
            const double gap = u < b ? std::min(b - u, u) : u - b;
            const double window = std::min(horizon - t, 0.5 * gap / slope);
            if (atom_rate * window >= 4.0) {
                boost::random::poisson_distribution<long, double> count(atom_rate * window);
                const long k = count(rng);
                const double low = u - atom_size * static_cast<double>(k);
                const bool safe = u < b ? low >= 0.0 : low > b;
                if (safe) {
                    if (u >= b) total += paid(t, t + window);
                    u += slope * window - atom_size * static_cast<double>(k);
                    t += window;
                    continue;
                }
                // Given the count, the jump times are uniform order statistics on the window.
                times.resize(static_cast<std::size_t>(k));
                const double t0 = t;
                for (auto& s : times) s = t0 + window * rng.uniform();
                std::sort(times.begin(), times.end());
                for (double s : times) {
                    advance(s);
                    u -= atom_size;
                    if (u < 0.0) {
                        ruined = true;
                        break;
                    }
                }
                if (!ruined) advance(t0 + window);
                continue;
            }
            const double t_atom = t + rng.exponential(atom_rate);
            if (t_atom >= horizon) {
                advance(horizon);
                break;
            }
            advance(t_atom);
            u -= atom_size;
            ruined = u < 0.0;
        }
        if (ruined) {
            rec.ruin_time = t;
            break;
        }
        if (t >= t_max) {
            rec.horizon_truncated = true;
            break;
        }
        u -= jumps.sample(rng);
        if (u < 0.0) {
            rec.ruin_time = t;
            break;
        }
        t_real = t + rng.exponential(jump_rate);
    }
    rec.discounted_dividends = total;
    return rec;
}

PathRecord Engine::euler(double x0, Rng& rng) const {
    PathRecord rec;
    const double s2 = sigma * sigma;
    double u = x0;
    double t = 0.0;
    double total = 0.0;
    double t_jump = next_jump(rng, t);
    if (u <= 0.0) {
        rec.ruin_time = 0.0;
        return rec;
    }
    for (;;) {
        const double step = std::min({dt, t_jump - t, t_max - t});
        const bool above = u > b;
        const double mu = above ? drift - alpha : drift;
        const double v = u + mu * step + sigma * std::sqrt(step) * rng.normal();
        // Share of the step spent above b, by linear interpolation between the end points.
        double share = above ? 1.0 : 0.0;
        if ((v > b) != above) share = (above ? u - b : v - b) / (std::abs(v - u));
        if (share > 0.0) total += share * paid(t, t + step);
        t += step;
        if (v <= 0.0) {
            rec.ruin_time = t;
            break;
        }
        // Brownian bridge: probability that the path touched 0 inside the step.
        const double expo = 2.0 * u * v / (s2 * step);
        if (expo < 40.0 && rng.uniform() < std::exp(-expo)) {
            rec.ruin_time = t;
            break;
        }
        u = v;
        if (t >= t_max) {
            rec.horizon_truncated = true;
            break;
        }
        if (t >= t_jump) {
            u -= draw_jump(rng);
            if (u <= 0.0) {
                rec.ruin_time = t;
                break;
            }
            t_jump = next_jump(rng, t);
        }
    }
    rec.discounted_dividends = total;
    return rec;
}

Engine prepare(const DividendProblem& problem, double b, double x0, const SimConfig& config) {
    if (!(x0 >= 0.0) || !std::isfinite(x0)) fail(ErrorCode::Validation, "x0 must be finite and nonnegative");
    if (!(b >= 0.0)) fail(ErrorCode::Validation, "threshold must be nonnegative");
    if (config.n_paths < 1) fail(ErrorCode::Validation, "n_paths must be at least 1");
    if (!(config.dt > 0.0)) fail(ErrorCode::Validation, "dt must be positive");
    if (!(config.truncation_eps >= 0.0) || !(config.gaussian_substitute_eps >= 0.0)) {
        fail(ErrorCode::Validation, "ε must be nonnegative");
    }
    const auto& model = problem.model();
    Engine e;
    e.alpha = problem.alpha();
    e.delta = problem.delta();
    e.b = b;
    e.dt = config.dt;
    const double floor = default_horizon(e.delta);
    e.t_max = config.t_max > 0.0 ? config.t_max : floor;
    if (e.t_max < floor * (1.0 - 1e-12)) {
        fail(ErrorCode::Validation, "t_max must be at least ln(1000)/δ so the discounted tail stays below 0.1%");
    }

    const double eps = config.truncation_eps;
    e.jumps = model.jumps();
    if (eps > 0.0) {
        e.jumps = e.jumps.truncated(eps);
    } else if (!e.jumps.finite_activity()) {
        fail(ErrorCode::Validation, "infinite activity jumps need a truncation level");
    }
    double s2 = model.sigma() * model.sigma();
    if (config.gaussian_compensation && eps > 0.0) s2 += model.jumps().moment(2, 0.0, eps);
    // Between jumps of the simulated measure the slope is a + ∫_0^1 xπ_ε.
    e.drift = model.a() + e.jumps.small_jump_mean();
    e.sigma = std::sqrt(s2);
    if (config.gaussian_substitute_eps > 0.0 && s2 > 0.0) {
        const double se = config.gaussian_substitute_eps;
        e.drift += s2 / se;
        e.atom_rate = s2 / (se * se);
        e.atom_size = se;
        e.sigma = 0.0;
    }
    e.jump_rate = e.jumps.empty() ? 0.0 : e.jumps.mass();
    e.total_rate = e.jump_rate + e.atom_rate;
    if (e.sigma == 0.0 && !(e.drift > e.alpha) && std::isfinite(b)) {
        fail(ErrorCode::DegenerateModel, "simulated premium must exceed α");
    }
    if (e.sigma == 0.0 && !(e.drift > 0.0)) fail(ErrorCode::DegenerateModel, "simulated premium must be positive");
    return e;
}

// Fixed binary reduction tree over the index range, whatever the order of evaluation.
double pairwise(std::span<const double> v) {
    if (v.size() <= 8) {
        double s = 0.0;
        for (double x : v) s += x;
        return s;
    }
    const std::size_t mid = v.size() / 2;
    return pairwise(v.first(mid)) + pairwise(v.subspan(mid));
}

} // namespace

double default_horizon(double delta) { return std::log(1000.0) / delta; }

PathRecord simulate_path(const DividendProblem& problem, double b, double x0, std::uint64_t seed,
                         const SimConfig& config) {
    const Engine e = prepare(problem, b, x0, config);
    Rng rng(seed);
    return e.run(x0, rng);
}

std::vector<PathRecord> simulate_paths(const DividendProblem& problem, double b, double x0,
                                       const SimConfig& config) {
    const Engine e = prepare(problem, b, x0, config);
    const auto n = static_cast<std::size_t>(config.n_paths);
    std::vector<PathRecord> out(n);
    const int workers = std::max(1, config.workers);
    std::vector<std::exception_ptr> errors(workers);
    auto work = [&](int w) {
        try {
            for (std::size_t i = w; i < n; i += workers) {
                Rng rng(stream_key(config.seed, i));
                out[i] = e.run(x0, rng);
            }
        } catch (...) {
            errors[w] = std::current_exception();
        }
    };
    if (workers == 1) {
        work(0);
    } else {
        std::vector<std::thread> pool;
        for (int w = 0; w < workers; ++w) pool.emplace_back(work, w);
        for (auto& th : pool) th.join();
    }
    for (auto& err : errors) {
        if (err) std::rethrow_exception(err);
    }
    return out;
}

McEstimate estimate_value(const DividendProblem& problem, double b, double x0, const SimConfig& config) {
    const auto paths = simulate_paths(problem, b, x0, config);
    const std::size_t n = paths.size();
    std::vector<double> v(n), ruined(n);
    for (std::size_t i = 0; i < n; ++i) {
        v[i] = paths[i].discounted_dividends;
        ruined[i] = std::isfinite(paths[i].ruin_time) ? 1.0 : 0.0;
    }
    McEstimate est;
    est.n_paths = static_cast<int>(n);
    est.seed = config.seed;
    est.config = config;
    est.mean = pairwise(v) / n;
    est.ruin_fraction = pairwise(ruined) / n;
    for (auto& x : v) x = (x - est.mean) * (x - est.mean);
    est.std_error = n > 1 ? std::sqrt(pairwise(v) / (n - 1.0) / n) : 0.0;
    return est;
}

} // namespace refract
