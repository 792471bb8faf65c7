#include "refract/cli.hpp"

#include "refract/approx.hpp"
#include "refract/config.hpp"
#include "refract/control.hpp"
#include "refract/error.hpp"
#include "refract/sim.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <iostream>
#include <limits>
#include <optional>

namespace refract {

std::string csv_number(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.12g", v);
    return buf;
}

namespace {

constexpr double nan = std::numeric_limits<double>::quiet_NaN();

struct Common {
    std::string config;
    std::string backend = "auto";
    std::string formula = "auto";
    int workers = 1;
};

void add_common(CLI::App* sub, Common& c) {
    sub->add_option("config", c.config, "problem file (JSON)")->required();
    sub->add_option("--backend", c.backend, "scale backend: auto, rational or numeric")
        ->check(CLI::IsMember({"auto", "rational", "numeric"}));
    sub->add_option("--formula", c.formula, "value above b: auto, closed or integral")
        ->check(CLI::IsMember({"auto", "closed", "integral"}));
    sub->add_option("--workers", c.workers, "threads for grid evaluations")->check(CLI::PositiveNumber);
}

ControlOptions control_options(const Common& c) {
    ControlOptions o;
    if (c.backend == "rational") o.value.scale.backend = ScaleBackend::Rational;
    if (c.backend == "numeric") o.value.scale.backend = ScaleBackend::NumericInversion;
    if (c.formula == "closed") o.value.above = AboveFormula::Closed;
    if (c.formula == "integral") o.value.above = AboveFormula::Integral;
    o.workers = c.workers;
    return o;
}

std::vector<double> linear_grid(double lo, double hi, int points) {
    if (points < 2 || !(hi > lo)) fail(ErrorCode::Validation, "grid needs at least two points and hi > lo");
    std::vector<double> g(points);
    for (int i = 0; i < points; ++i) g[i] = lo + (hi - lo) * i / (points - 1.0);
    return g;
}

// Writes to the named file, or to out when the name is empty.
void emit(const std::string& path, std::ostream& out, const std::string& text) {
    if (path.empty()) {
        out << text;
        return;
    }
    std::ofstream f(path, std::ios::binary);
    if (!f) fail(ErrorCode::Validation, "cannot write " + path);
    f << text;
}

double try_or_nan(const std::function<double()>& f) {
    try {
        return f();
    } catch (const Error&) {
        return nan;
    }
}

const char* yes_no(bool v) { return v ? "yes" : "no"; }

} // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Bounded-rate optimal dividends for spectrally negative Lévy models", "refract"};
    app.require_subcommand(1);
    std::function<int()> action;

    // model check
    Common mc;
    auto* model = app.add_subcommand("model", "model utilities")->require_subcommand(1);
    auto* check = model->add_subcommand("check", "validate and classify a model");
    check->add_option("config", mc.config, "problem file (JSON)")->required();
    check->callback([&] {
        action = [&] {
            const auto cfg = load_config(mc.config);
            out << cfg.model.describe() << "\n";
            if (cfg.delta && cfg.alpha) {
                const auto p = make_problem(cfg);
                out << "Phi(delta)=" << csv_number(p.phi_delta()) << ", Psi(delta)=" << csv_number(p.psi_delta())
                    << "\n";
            }
            return int(exit_ok);
        };
    });

    // scale eval
    Common sc;
    std::optional<double> sq;
    double s_xmax = 10.0;
    int s_points = 101;
    std::string s_out;
    auto* scale = app.add_subcommand("scale", "scale functions")->require_subcommand(1);
    auto* seval = scale->add_subcommand("eval", "CSV of W, W' and Z on a grid");
    add_common(seval, sc);
    seval->add_option("--q", sq, "discount rate (default: delta of the config)");
    seval->add_option("--x-max", s_xmax, "right end of the grid")->check(CLI::PositiveNumber);
    seval->add_option("--points", s_points, "grid points on [0, x-max]");
    seval->add_option("--output", s_out, "CSV file (default: stdout)");
    seval->callback([&] {
        action = [&] {
            const auto cfg = load_config(sc.config);
            const double q = sq ? *sq : cfg.delta ? *cfg.delta : nan;
            if (std::isnan(q)) fail(ErrorCode::Validation, "give --q or a delta in the config");
            const ScaleFunction w(cfg.model, q, control_options(sc).value.scale);
            std::string csv = "x,W,Wprime,Z\n";
            for (double x : linear_grid(0.0, s_xmax, s_points)) {
                const double wp = x == 0.0 ? w.w_prime_zero() : w.w_prime(x);
                csv += csv_number(x) + "," + csv_number(w.w(x)) + "," + csv_number(wp) + "," + csv_number(w.z(x)) + "\n";
            }
            emit(s_out, out, csv);
            return int(exit_ok);
        };
    });

    // value eval
    Common vc;
    double v_b = 0.0, v_xmax = 10.0, v_band = 1e-3;
    int v_points = 101;
    std::string v_out;
    auto* valuecmd = app.add_subcommand("value", "threshold value functions")->require_subcommand(1);
    auto* veval = valuecmd->add_subcommand("eval", "CSV of V, V' and the IDE residual on a grid");
    add_common(veval, vc);
    veval->add_option("--b", v_b, "threshold")->required();
    veval->add_option("--x-max", v_xmax, "right end of the grid")->check(CLI::PositiveNumber);
    veval->add_option("--points", v_points, "grid points on [0, x-max]");
    veval->add_option("--band", v_band, "residuals within this distance of b are reported as nan");
    veval->add_option("--output", v_out, "CSV file (default: stdout)");
    veval->callback([&] {
        action = [&] {
            const auto problem = make_problem(load_config(vc.config));
            const ThresholdValueFunction v(problem, v_b, control_options(vc).value);
            std::string csv = "x,V,Vprime,ide_residual\n";
            for (double x : linear_grid(0.0, v_xmax, v_points)) {
                const double vp = try_or_nan([&] { return v.derivative(x, x <= v_b ? Side::Left : Side::Right); });
                const double r = std::abs(x - v_b) < v_band || x == 0.0 ? nan : try_or_nan([&] { return v.ide_residual(x); });
                csv += csv_number(x) + "," + csv_number(v.value(x)) + "," + csv_number(vp) + "," + csv_number(r) + "\n";
            }
            emit(v_out, out, csv);
            return int(exit_ok);
        };
    });

    // optimize
    Common oc;
    std::vector<double> o_x0{1.0, 2.0, 5.0};
    auto* optimize = app.add_subcommand("optimize", "optimal threshold and its value");
    add_common(optimize, oc);
    optimize->add_option("--x0", o_x0, "initial surplus levels")->delimiter(',');
    optimize->callback([&] {
        action = [&] {
            const auto problem = make_problem(load_config(oc.config));
            const auto sol = solve(problem, {}, control_options(oc));
            out << "b*=" << csv_number(sol.b_star) << "\n";
            out << "x0,V\n";
            for (double x : o_x0) out << csv_number(x) << "," << csv_number(sol.value_fn.value(x)) << "\n";
            out << "hjb_sup_residual=" << csv_number(sol.hjb_sup_residual) << "\n"
                << "pasting_gap=" << csv_number(sol.pasting_gap) << "\n"
                << "continuity_gap=" << csv_number(sol.continuity_gap) << "\n"
                << "concave=" << yes_no(sol.concave_on_grid) << "\n"
                << "unimodal=" << yes_no(sol.unimodal) << "\n"
                << "cm_certified=" << yes_no(sol.cm_certified) << "\n";
            if (!sol.unimodal) err << "warning[NonUnimodal]: h(b) has several local minima on the scan grid\n";
            return int(exit_ok);
        };
    });

    // simulate
    std::string mcfg, m_paths_csv;
    std::string m_b;
    double m_x0 = 0.0;
    SimConfig sim;
    auto* simulate = app.add_subcommand("simulate", "Monte Carlo estimate of V(x0, b)");
    simulate->add_option("config", mcfg, "problem file (JSON)")->required();
    simulate->add_option("--b", m_b, "threshold, or inf for no dividends")->required();
    simulate->add_option("--x0", m_x0, "initial surplus")->required();
    simulate->add_option("--paths", sim.n_paths, "number of paths");
    simulate->add_option("--seed", sim.seed, "master seed");
    simulate->add_option("--t-max", sim.t_max, "horizon (default ln(1000)/delta)");
    simulate->add_option("--dt", sim.dt, "Euler step when sigma > 0");
    simulate->add_option("--trunc-eps", sim.truncation_eps, "drop jumps smaller than this");
    simulate->add_flag("--gaussian-compensation", sim.gaussian_compensation, "add the dropped jump variance to sigma^2");
    simulate->add_option("--substitute-eps", sim.gaussian_substitute_eps, "replace sigma B by jumps of this size");
    simulate->add_option("--workers", sim.workers, "threads")->check(CLI::PositiveNumber);
    simulate->add_option("--paths-csv", m_paths_csv, "per-path CSV file");
    simulate->callback([&] {
        action = [&] {
            const auto problem = make_problem(load_config(mcfg));
            double b = 0.0;
            if (m_b == "inf") {
                b = std::numeric_limits<double>::infinity();
            } else {
                try {
                    b = std::stod(m_b);
                } catch (const std::exception&) {
                    fail(ErrorCode::Validation, "--b must be a number or inf");
                }
            }
            const auto est = estimate_value(problem, b, m_x0, sim);
            out << "mean,stderr,n_paths,ruin_fraction,seed\n"
                << csv_number(est.mean) << "," << csv_number(est.std_error) << "," << est.n_paths << ","
                << csv_number(est.ruin_fraction) << "," << est.seed << "\n";
            if (!m_paths_csv.empty()) {
                std::string csv = "path,discounted_dividends,ruin_time,horizon_truncated\n";
                const auto paths = simulate_paths(problem, b, m_x0, sim);
                for (std::size_t i = 0; i < paths.size(); ++i) {
                    csv += std::to_string(i) + "," + csv_number(paths[i].discounted_dividends) + "," +
                           csv_number(paths[i].ruin_time) + "," + (paths[i].horizon_truncated ? "1" : "0") + "\n";
                }
                emit(m_paths_csv, out, csv);
            }
            return int(exit_ok);
        };
    });

    // verify
    Common fc;
    std::optional<double> f_b;
    double f_hjb = 1e-4, f_continuity = 1e-6;
    std::optional<double> f_pasting;
    int f_points = 200;
    std::string f_out;
    auto* verify = app.add_subcommand("verify", "HJB, pasting and concavity checks; exit 3 on failure");
    add_common(verify, fc);
    verify->add_option("--b", f_b, "threshold to check (default: the optimal one)");
    verify->add_option("--points", f_points, "grid points on (0, b + 30/Psi]");
    verify->add_option("--hjb-tol", f_hjb, "HJB tolerance as a multiple of alpha");
    verify->add_option("--pasting-tol", f_pasting,
                       "pasting tolerance (default 1e-6 (1 + V(b,b)) for bounded variation, 1e-4 otherwise)");
    verify->add_option("--continuity-tol", f_continuity, "continuity tolerance, times 1 + V(b,b)");
    verify->add_option("--output", f_out, "CSV file (default: stdout)");
    verify->callback([&] {
        action = [&] {
            const auto problem = make_problem(load_config(fc.config));
            const auto opts = control_options(fc);
            const double b = f_b ? *f_b : optimal_threshold(problem, opts);
            const double top = b + 30.0 / problem.psi_delta();
            std::vector<double> grid(std::max(f_points, 3));
            for (std::size_t i = 0; i < grid.size(); ++i) grid[i] = top * (i + 1.0) / grid.size();
            const auto sol = assess(problem, b, grid, opts);
            std::string csv = "x,hjb_residual,Vprime\n";
            for (std::size_t i = 0; i < grid.size(); ++i) {
                csv += csv_number(grid[i]) + "," + csv_number(sol.hjb[i]) + "," + csv_number(sol.vprime[i]) + "\n";
            }
            emit(f_out, out, csv);
            const double scale = 1.0 + sol.value_fn.v_at_b();
            const bool bv = problem.model().bounded_variation();
            const double paste_tol = f_pasting ? *f_pasting : bv ? 1e-6 * scale : 1e-4;
            const bool cm = problem.model().monotonicity() == Monotonicity::CompletelyMonotone;
            const bool hjb_ok = sol.hjb_sup_residual <= f_hjb * problem.alpha();
            const bool paste_ok = b == 0.0 || sol.pasting_gap <= paste_tol;
            const bool cont_ok = b == 0.0 || sol.continuity_gap <= f_continuity * scale;
            const bool concave_ok = !cm || sol.concave_on_grid;
            err << "b=" << csv_number(b) << " hjb_sup_residual=" << csv_number(sol.hjb_sup_residual)
                << " pasting_gap=" << csv_number(sol.pasting_gap) << " continuity_gap=" << csv_number(sol.continuity_gap)
                << " concave=" << yes_no(sol.concave_on_grid) << "\n";
            if (hjb_ok && paste_ok && cont_ok && concave_ok) return int(exit_ok);
            err << "verification failed:" << (hjb_ok ? "" : " hjb") << (paste_ok ? "" : " pasting")
                << (cont_ok ? "" : " continuity") << (concave_ok ? "" : " concavity") << "\n";
            return int(exit_verification);
        };
    });

    // approx
    std::string acfg, a_out;
    int a_terms = 10, a_n = 10;
    double a_eps = 0.01;
    FitOptions fit;
    auto* approx = app.add_subcommand("approx", "approximating models")->require_subcommand(1);
    auto* afit = approx->add_subcommand("fit", "hyperexponential fit of every jump component");
    afit->add_option("config", acfg, "problem file (JSON)")->required();
    afit->add_option("--terms", a_terms, "terms per component");
    afit->add_option("--probe-lo", fit.probe_lo, "left end of the error probe grid");
    afit->add_option("--probe-hi", fit.probe_hi, "right end of the error probe grid");
    afit->add_option("--output", a_out, "model file (default: stdout)");
    auto* agauss = approx->add_subcommand("gauss-exp", "replace sigma by exponential jumps of rate n");
    agauss->add_option("config", acfg, "problem file (JSON)")->required();
    agauss->add_option("--n", a_n, "rate of the added jumps");
    agauss->add_option("--output", a_out, "model file (default: stdout)");
    auto* atrunc = approx->add_subcommand("truncate", "drop jumps below eps");
    atrunc->add_option("config", acfg, "problem file (JSON)")->required();
    atrunc->add_option("--eps", a_eps, "truncation level");
    atrunc->add_option("--output", a_out, "model file (default: stdout)");
    auto approx_action = [&](std::function<ApproxModel(const LevyModel&)> make) {
        action = [&, make] {
            const auto cfg = load_config(acfg);
            const auto res = make(cfg.model);
            emit(a_out, out, write_config(res.model, cfg.delta, cfg.alpha, cfg.allow_barrier));
            err << "n_terms=" << res.report.n_terms << " epsilon=" << csv_number(res.report.epsilon)
                << " sup_rel_error=" << csv_number(res.report.sup_rel_error)
                << " laplace_exponent_gap=" << csv_number(res.report.laplace_exponent_gap) << "\n";
            return int(exit_ok);
        };
    };
    afit->callback([&] { approx_action([&](const LevyModel& m) { return fit_model(m, a_terms, fit); }); });
    agauss->callback([&] { approx_action([&](const LevyModel& m) { return gaussian_exponential_approx(m, a_n); }); });
    atrunc->callback([&] { approx_action([&](const LevyModel& m) { return truncate_small_jumps(m, a_eps); }); });

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? int(exit_ok) : int(exit_validation);
    }
    try {
        return action ? action() : int(exit_validation);
    } catch (const Error& e) {
        err << "error[" << to_string(e.code()) << "]: " << e.what() << "\n";
        return is_input_error(e.code()) ? int(exit_validation) : int(exit_numeric);
    } catch (const std::exception& e) {
        err << "error[Internal]: " << e.what() << "\n";
        return int(exit_numeric);
    }
}

} // namespace refract
