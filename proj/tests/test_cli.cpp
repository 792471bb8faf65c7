#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "refract/cli.hpp"
#include "refract/config.hpp"
#include "refract/control.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

using namespace refract;

namespace {

struct Outcome {
    int code;
    std::string out;
    std::string err;
};

Outcome call(std::vector<std::string> args) {
    std::ostringstream out, err;
    const int code = run(args, out, err);
    return {code, out.str(), err.str()};
}

std::string data(const std::string& name) { return std::string(REFRACT_TEST_DATA) + "/" + name; }

std::vector<std::string> lines(const std::string& text) {
    std::vector<std::string> v;
    std::istringstream in(text);
    for (std::string l; std::getline(in, l);) v.push_back(l);
    return v;
}

std::vector<double> fields(const std::string& line) {
    std::vector<double> v;
    std::istringstream in(line);
    for (std::string f; std::getline(in, f, ',');) v.push_back(std::stod(f));
    return v;
}

std::filesystem::path temp_file(const std::string& name) {
    return std::filesystem::temp_directory_path() / ("refract_test_" + name);
}

} // namespace

TEST_CASE("csv number format") {
    CHECK(csv_number(1.0 / 3.0) == "0.333333333333");
    CHECK(csv_number(2.0) == "2");
    CHECK(csv_number(1.0e-20) == "1e-20");
    CHECK(csv_number(NAN) == "nan");
    CHECK(csv_number(-INFINITY) == "-inf");
}

TEST_CASE("model check") {
    const auto r = call({"model", "check", data("cl.json")});
    CHECK(r.code == exit_ok);
    CHECK(r.out.find("bounded variation, c=2, CM: yes") != std::string::npos);
    CHECK(r.err.empty());
    const auto ts = call({"model", "check", data("tempered_stable.json")});
    CHECK(ts.code == exit_ok);
    CHECK(ts.out.find("unbounded variation") != std::string::npos);
}

TEST_CASE("scale eval CSV") {
    const auto r = call({"scale", "eval", data("cl.json"), "--x-max", "2", "--points", "5"});
    REQUIRE(r.code == exit_ok);
    const auto ls = lines(r.out);
    REQUIRE(ls.size() == 6);
    CHECK(ls[0] == "x,W,Wprime,Z");
    CHECK(ls[1] == "0,0.5,0.275,1");
    // W for c = 2, λ = μ = 1, q = 0.1 from the roots of 2θ² + 0.9θ - 0.1 = 0.
    const double disc = std::sqrt(0.81 + 0.8);
    double w2 = 0.0;
    for (double r0 : {(-0.9 + disc) / 4.0, (-0.9 - disc) / 4.0}) w2 += std::exp(2.0 * r0) / (2.0 - 1.0 / ((1 + r0) * (1 + r0)));
    const auto last = fields(ls[5]);
    CHECK(last[0] == 2.0);
    CHECK(last[1] == doctest::Approx(w2).epsilon(1e-11));
    CHECK(r.out.find('\r') == std::string::npos);
}

TEST_CASE("value eval CSV") {
    const auto r = call({"value", "eval", data("cl.json"), "--b", "1", "--x-max", "3", "--points", "7"});
    REQUIRE(r.code == exit_ok);
    const auto ls = lines(r.out);
    REQUIRE(ls.size() == 8);
    CHECK(ls[0] == "x,V,Vprime,ide_residual");
    // x = 1 sits on the threshold: its residual is masked.
    CHECK(ls[3].substr(0, 2) == "1,");
    CHECK(ls[3].substr(ls[3].size() - 3) == "nan");
    for (int i : {2, 4, 5, 6, 7}) CHECK(std::abs(fields(ls[i])[3]) < 1e-6 * 0.5);
}

TEST_CASE("optimize prints the threshold and values") {
    const auto r = call({"optimize", data("cl.json"), "--x0", "1,2,5"});
    REQUIRE(r.code == exit_ok);
    const auto ls = lines(r.out);
    REQUIRE(ls.size() >= 5);
    const auto problem = make_problem(load_config(data("cl.json")));
    const double b = optimal_threshold(problem);
    CHECK(ls[0] == "b*=" + csv_number(b));
    CHECK(ls[1] == "x0,V");
    CHECK(ls[2] == "1," + csv_number(value(problem, b, 1.0)));
    CHECK(ls[4] == "5," + csv_number(value(problem, b, 5.0)));
    CHECK(r.out.find("concave=yes") != std::string::npos);
}

TEST_CASE("verify exit codes") {
    const auto good = call({"verify", data("cl.json")});
    CHECK(good.code == exit_ok);
    const auto ls = lines(good.out);
    REQUIRE(ls.size() == 201);
    CHECK(ls[0] == "x,hjb_residual,Vprime");
    const auto bad = call({"verify", data("cl.json"), "--b", "99"});
    CHECK(bad.code == exit_verification);
    CHECK(bad.err.find("verification failed") != std::string::npos);
}

TEST_CASE("simulate summary") {
    const auto r = call({"simulate", data("cl.json"), "--b", "3", "--x0", "2", "--paths", "200", "--seed", "5"});
    REQUIRE(r.code == exit_ok);
    const auto ls = lines(r.out);
    REQUIRE(ls.size() == 2);
    CHECK(ls[0] == "mean,stderr,n_paths,ruin_fraction,seed");
    const auto f = fields(ls[1]);
    CHECK(f[0] >= 0.0);
    CHECK(f[0] <= 0.5 / 0.1);
    CHECK(f[2] == 200);
    CHECK(f[4] == 5);
    // The same seed reproduces the same line.
    CHECK(call({"simulate", data("cl.json"), "--b", "3", "--x0", "2", "--paths", "200", "--seed", "5"}).out == r.out);
    const auto none = call({"simulate", data("cl.json"), "--b", "inf", "--x0", "2", "--paths", "10"});
    CHECK(fields(lines(none.out)[1])[0] == 0.0);
    CHECK(call({"simulate", data("cl.json"), "--b", "three", "--x0", "2"}).code == exit_validation);
}

TEST_CASE("approx fit output is a reusable model file") {
    const auto path = temp_file("fit.json");
    const auto r = call({"approx", "fit", data("pareto.json"), "--terms", "10", "--output", path.string()});
    REQUIRE(r.code == exit_ok);
    CHECK(r.err.find("n_terms=10") != std::string::npos);
    const auto check = call({"model", "check", path.string()});
    CHECK(check.code == exit_ok);
    CHECK(check.err.empty());
    CHECK(check.out.find("CM: yes") != std::string::npos);
    const auto opt = call({"optimize", path.string()});
    CHECK(opt.code == exit_ok);
    CHECK(opt.err.empty());
    const auto scale = call({"scale", "eval", path.string(), "--backend", "rational", "--points", "3"});
    CHECK(scale.code == exit_ok);
    CHECK(scale.err.empty());
    const auto ver = call({"verify", path.string()});
    CHECK(ver.code == exit_ok);
    const auto sim = call({"simulate", path.string(), "--b", "1", "--x0", "1", "--paths", "50"});
    CHECK(sim.code == exit_ok);
    CHECK(sim.err.empty());
    // Writing the parsed file back gives the same text.
    const auto cfg = load_config(path.string());
    std::ifstream in(path);
    std::stringstream text;
    text << in.rdbuf();
    CHECK(write_config(cfg.model, cfg.delta, cfg.alpha, cfg.allow_barrier) == text.str());
    std::filesystem::remove(path);

    const auto gauss = call({"approx", "gauss-exp", data("jump_diffusion.json"), "--n", "20"});
    CHECK(gauss.code == exit_ok);
    CHECK(parse_config(gauss.out).model.sigma() == 0.0);
    const auto trunc = call({"approx", "truncate", data("tempered_stable.json"), "--eps", "0.01"});
    CHECK(trunc.code == exit_ok);
    CHECK(parse_config(trunc.out).model.bounded_variation());
}

TEST_CASE("errors carry a code prefix and exit status") {
    const auto unknown = call({"model", "check", data("unknown_key.json")});
    CHECK(unknown.code == exit_validation);
    CHECK(unknown.err.rfind("error[", 0) == 0);
    CHECK(call({"model", "check", data("does_not_exist.json")}).code == exit_validation);
    CHECK(call({"optimize", data("alpha_above_c.json")}).code == exit_validation);
    CHECK(call({"frobnicate"}).code == exit_validation);
    CHECK(call({"optimize", data("cl.json"), "--backend", "quantum"}).code == exit_validation);
    // A model with no rational transform cannot be forced through the partial-fraction backend.
    const auto forced = call({"scale", "eval", data("pareto.json"), "--backend", "rational", "--points", "3"});
    CHECK(forced.code != exit_ok);
    CHECK(forced.err.rfind("error[", 0) == 0);
    CHECK(call({"--help"}).code == exit_ok);
}
