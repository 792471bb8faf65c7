#include "refract/config.hpp"

#include "refract/error.hpp"

#include <json.hpp>

#include <fstream>
#include <set>
#include <sstream>

namespace refract {

namespace {

using nlohmann::json;

void only_keys(const json& j, const std::set<std::string>& allowed, const std::string& where) {
    if (!j.is_object()) fail(ErrorCode::Validation, where + " must be an object");
    for (const auto& [key, _] : j.items()) {
        if (!allowed.count(key)) fail(ErrorCode::Validation, "unknown key '" + key + "' in " + where);
    }
}

double number(const json& j, const std::string& key, const std::string& where) {
    if (!j.contains(key)) fail(ErrorCode::Validation, "missing '" + key + "' in " + where);
    if (!j.at(key).is_number()) fail(ErrorCode::Validation, "'" + key + "' in " + where + " must be a number");
    return j.at(key).get<double>();
}

double number_or(const json& j, const std::string& key, double fallback, const std::string& where) {
    return j.contains(key) ? number(j, key, where) : fallback;
}

std::vector<double> numbers(const json& j, const std::string& key, const std::string& where) {
    if (!j.contains(key) || !j.at(key).is_array()) fail(ErrorCode::Validation, "'" + key + "' in " + where + " must be an array");
    std::vector<double> out;
    for (const auto& v : j.at(key)) {
        if (!v.is_number()) fail(ErrorCode::Validation, "'" + key + "' in " + where + " must hold numbers");
        out.push_back(v.get<double>());
    }
    return out;
}

JumpComponent parse_jump(const json& j, std::size_t index) {
    const std::string where = "jumps[" + std::to_string(index) + "]";
    if (!j.is_object() || !j.contains("family") || !j.at("family").is_string()) {
        fail(ErrorCode::Validation, where + " needs a string 'family'");
    }
    const auto family = j.at("family").get<std::string>();
    JumpComponent out;
    out.cutoff = number_or(j, "cutoff", 0.0, where);
    if (family == "exp_mixture") {
        only_keys(j, {"family", "cutoff", "terms", "intensity"}, where);
        ExpMixtureJumps m;
        m.intensity = number_or(j, "intensity", 1.0, where);
        if (!j.contains("terms") || !j.at("terms").is_array()) fail(ErrorCode::Validation, where + " needs 'terms'");
        for (const auto& t : j.at("terms")) {
            only_keys(t, {"weight", "rate"}, where + ".terms");
            m.terms.push_back(ExpTerm{number(t, "weight", where), number(t, "rate", where)});
        }
        out.family = m;
    } else if (family == "gamma") {
        only_keys(j, {"family", "cutoff", "shape", "scale", "intensity"}, where);
        out.family = GammaJumps{number(j, "shape", where), number(j, "scale", where), number_or(j, "intensity", 1.0, where)};
    } else if (family == "pareto") {
        only_keys(j, {"family", "cutoff", "index", "intensity"}, where);
        out.family = ParetoJumps{number(j, "index", where), number_or(j, "intensity", 1.0, where)};
    } else if (family == "weibull") {
        only_keys(j, {"family", "cutoff", "scale", "shape", "intensity"}, where);
        out.family = WeibullJumps{number(j, "scale", where), number(j, "shape", where), number_or(j, "intensity", 1.0, where)};
    } else if (family == "tempered_stable") {
        only_keys(j, {"family", "cutoff", "intensity", "stability", "tilt"}, where);
        out.family = TemperedStableJumps{number(j, "intensity", where), number(j, "stability", where), number(j, "tilt", where)};
    } else if (family == "tabulated") {
        only_keys(j, {"family", "cutoff", "x", "density"}, where);
        out.family = TabulatedJumps{numbers(j, "x", where), numbers(j, "density", where)};
    } else {
        fail(ErrorCode::Validation, "unknown jump family '" + family + "'");
    }
    return out;
}

json jump_json(const JumpComponent& c) {
    json j = std::visit(
        [](const auto& f) -> json {
            using T = std::decay_t<decltype(f)>;
            if constexpr (std::is_same_v<T, ExpMixtureJumps>) {
                json terms = json::array();
                for (const auto& t : f.terms) terms.push_back({{"weight", t.weight}, {"rate", t.rate}});
                return {{"family", "exp_mixture"}, {"terms", terms}, {"intensity", f.intensity}};
            } else if constexpr (std::is_same_v<T, GammaJumps>) {
                return {{"family", "gamma"}, {"shape", f.shape}, {"scale", f.scale}, {"intensity", f.intensity}};
            } else if constexpr (std::is_same_v<T, ParetoJumps>) {
                return {{"family", "pareto"}, {"index", f.index}, {"intensity", f.intensity}};
            } else if constexpr (std::is_same_v<T, WeibullJumps>) {
                return {{"family", "weibull"}, {"scale", f.scale}, {"shape", f.shape}, {"intensity", f.intensity}};
            } else if constexpr (std::is_same_v<T, TemperedStableJumps>) {
                return {{"family", "tempered_stable"}, {"intensity", f.intensity}, {"stability", f.stability}, {"tilt", f.tilt}};
            } else {
                return {{"family", "tabulated"}, {"x", f.x}, {"density", f.density}};
            }
        },
        c.family);
    if (c.cutoff > 0.0) j["cutoff"] = c.cutoff;
    return j;
}

} // namespace

ProblemConfig parse_config(const std::string& text) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        fail(ErrorCode::Validation, std::string("config is not valid JSON: ") + e.what());
    }
    only_keys(doc, {"model", "delta", "alpha", "allow_barrier"}, "config");
    if (!doc.contains("model")) fail(ErrorCode::Validation, "config needs a 'model'");
    const json& m = doc.at("model");
    only_keys(m, {"premium", "drift", "sigma", "jumps"}, "model");
    const bool premium = m.contains("premium");
    const bool drift = m.contains("drift");
    if (premium == drift) fail(ErrorCode::Validation, "model needs exactly one of 'premium' and 'drift'");
    DriftSpec spec{premium ? DriftKind::Premium : DriftKind::Triplet, number(m, premium ? "premium" : "drift", "model")};
    const double sigma = number_or(m, "sigma", 0.0, "model");
    std::vector<JumpComponent> parts;
    if (m.contains("jumps")) {
        if (!m.at("jumps").is_array()) fail(ErrorCode::Validation, "'jumps' must be an array");
        for (std::size_t i = 0; i < m.at("jumps").size(); ++i) parts.push_back(parse_jump(m.at("jumps")[i], i));
    }
    ProblemConfig out{LevyModel(spec, sigma, JumpMeasure(std::move(parts))), std::nullopt, std::nullopt, false};
    if (doc.contains("delta")) out.delta = number(doc, "delta", "config");
    if (doc.contains("alpha")) out.alpha = number(doc, "alpha", "config");
    if (doc.contains("allow_barrier")) {
        if (!doc.at("allow_barrier").is_boolean()) fail(ErrorCode::Validation, "'allow_barrier' must be true or false");
        out.allow_barrier = doc.at("allow_barrier").get<bool>();
    }
    return out;
}

ProblemConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) fail(ErrorCode::Validation, "cannot read config file " + path);
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_config(buf.str());
}

DividendProblem make_problem(const ProblemConfig& config) {
    if (!config.delta || !config.alpha) fail(ErrorCode::Validation, "config needs 'delta' and 'alpha' for this command");
    return DividendProblem(config.model, *config.delta, *config.alpha, config.allow_barrier);
}

std::string write_config(const LevyModel& model, std::optional<double> delta, std::optional<double> alpha,
                         bool allow_barrier) {
    json jumps = json::array();
    for (const auto& c : model.jumps().components()) jumps.push_back(jump_json(c));
    json doc;
    doc["model"] = {{"drift", model.a()}, {"sigma", model.sigma()}, {"jumps", jumps}};
    if (delta) doc["delta"] = *delta;
    if (alpha) doc["alpha"] = *alpha;
    if (allow_barrier) doc["allow_barrier"] = true;
    return doc.dump(2) + "\n";
}

} // namespace refract
