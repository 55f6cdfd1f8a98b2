#include "zoneliq/config.hpp"

#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

namespace zoneliq {

using nlohmann::json;

namespace {

void check_keys(const json& obj, const std::string& where,
                const std::set<std::string>& allowed) {
    if (!obj.is_object()) throw ValidationError(where + ": expected a JSON object");
    for (auto it = obj.begin(); it != obj.end(); ++it)
        if (!allowed.count(it.key()))
            throw ValidationError(where + ": unknown key \"" + it.key() + "\"");
}

double num(const json& obj, const std::string& where, const std::string& key) {
    if (!obj.contains(key)) throw ValidationError(where + ": missing key \"" + key + "\"");
    if (!obj[key].is_number()) throw ValidationError(where + "." + key + ": expected a number");
    return obj[key].get<double>();
}

double num_or(const json& obj, const std::string& key, double fallback) {
    return obj.contains(key) ? obj[key].get<double>() : fallback;
}

std::string str(const json& obj, const std::string& where, const std::string& key) {
    if (!obj.contains(key)) throw ValidationError(where + ": missing key \"" + key + "\"");
    if (!obj[key].is_string()) throw ValidationError(where + "." + key + ": expected a string");
    return obj[key].get<std::string>();
}

FunctionSpec parse_fn(const json& obj, const std::string& where) {
    if (!obj.is_object()) throw ValidationError(where + ": expected an object");
    const std::string variant = str(obj, where, "variant");
    if (variant == "constant") {
        check_keys(obj, where, {"variant", "v"});
        return FunctionSpec::constant(num(obj, where, "v"));
    }
    if (variant == "affine-clamped") {
        check_keys(obj, where, {"variant", "a", "b", "lo", "hi"});
        return FunctionSpec::affine_clamped(num(obj, where, "a"), num(obj, where, "b"),
                                            num(obj, where, "lo"), num(obj, where, "hi"));
    }
    if (variant == "gaussian-bump") {
        check_keys(obj, where, {"variant", "center", "width", "height"});
        return FunctionSpec::gaussian_bump(num(obj, where, "center"), num(obj, where, "width"),
                                           num(obj, where, "height"));
    }
    if (variant == "table") {
        check_keys(obj, where, {"variant", "knots", "values", "interpolation", "extrapolation"});
        if (obj.contains("interpolation") && obj["interpolation"] != "linear")
            throw ValidationError(where + ".interpolation: only \"linear\" is supported");
        if (obj.contains("extrapolation") && obj["extrapolation"] != "clamp")
            throw ValidationError(where + ".extrapolation: only \"clamp\" is supported");
        if (!obj.contains("knots") || !obj.contains("values"))
            throw ValidationError(where + ": table needs \"knots\" and \"values\"");
        return FunctionSpec::table(obj["knots"].get<std::vector<double>>(),
                                   obj["values"].get<std::vector<double>>());
    }
    throw ValidationError(where + ".variant: unknown variant \"" + variant + "\"");
}

json fn_to_json(const FunctionSpec& f) {
    json j;
    switch (f.variant) {
    case FunctionSpec::Variant::Constant:
        j["variant"] = "constant";
        j["v"] = f.v;
        break;
    case FunctionSpec::Variant::AffineClamped:
        j["variant"] = "affine-clamped";
        j["a"] = f.a; j["b"] = f.b; j["lo"] = f.lo; j["hi"] = f.hi;
        break;
    case FunctionSpec::Variant::GaussianBump:
        j["variant"] = "gaussian-bump";
        j["center"] = f.center; j["width"] = f.width; j["height"] = f.height;
        break;
    case FunctionSpec::Variant::Table:
        j["variant"] = "table";
        j["knots"] = f.knots; j["values"] = f.values;
        j["interpolation"] = "linear"; j["extrapolation"] = "clamp";
        break;
    }
    return j;
}

} // namespace

namespace {
RunConfig parse_config_impl(const json& root);
}

RunConfig parse_config(const std::string& json_text) {
    json root;
    try {
        root = json::parse(json_text);
    } catch (const json::parse_error& e) {
        throw ValidationError(std::string("config: JSON parse error: ") + e.what());
    }
    try {
        return parse_config_impl(root);
    } catch (const json::exception& e) {
        throw ValidationError(std::string("config: ") + e.what());
    }
}

namespace {
RunConfig parse_config_impl(const json& root) {
    check_keys(root, "config", {"model", "cost", "grid", "rng"});
    for (const char* key : {"model", "cost", "grid", "rng"})
        if (!root.contains(key))
            throw ValidationError(std::string("config: missing section \"") + key + "\"");

    RunConfig cfg;
    const json& m = root["model"];
    check_keys(m, "model", {"kind", "sigma", "drift", "barrier", "side", "z0"});
    const std::string kind = str(m, "model", "kind");
    if (kind == "ABM") cfg.model.kind = Kind::Abm;
    else if (kind == "GBM") cfg.model.kind = Kind::Gbm;
    else throw ValidationError("model.kind: expected \"ABM\" or \"GBM\"");
    cfg.model.sigma = num(m, "model", "sigma");
    cfg.model.drift = num_or(m, "drift", 0.0);
    cfg.model.barrier = num(m, "model", "barrier");
    const std::string side = m.contains("side") ? str(m, "model", "side") : "lower";
    if (side == "lower") cfg.model.side = Side::Lower;
    else if (side == "upper") cfg.model.side = Side::Upper;
    else throw ValidationError("model.side: expected \"lower\" or \"upper\"");
    cfg.model.z0 = num(m, "model", "z0");

    const json& c = root["cost"];
    check_keys(c, "cost", {"p", "beta", "phi", "rho", "horizon", "x0"});
    cfg.cost.p = num(c, "cost", "p");
    cfg.cost.phi = c.contains("phi") ? parse_fn(c["phi"], "cost.phi") : FunctionSpec::constant(0.0);
    cfg.cost.rho = c.contains("rho") ? parse_fn(c["rho"], "cost.rho") : FunctionSpec::constant(0.0);
    cfg.cost.horizon = num(c, "cost", "horizon");
    cfg.cost.x0 = num(c, "cost", "x0");
    if (c.contains("beta")) {
        const double beta = num(c, "cost", "beta");
        if (std::abs(beta - 1.0 / (cfg.cost.p - 1.0)) > 1e-12)
            throw ValidationError("cost.beta: inconsistent with p; beta must equal 1/(p-1)");
    }

    const json& g = root["grid"];
    check_keys(g, "grid", {"nt", "nz", "z_far", "stretch"});
    cfg.grid.nt = static_cast<int>(num_or(g, "nt", 1024));
    cfg.grid.nz = static_cast<int>(num_or(g, "nz", 96));
    cfg.grid.z_far = num(g, "grid", "z_far");
    const std::string stretch = g.contains("stretch") ? str(g, "grid", "stretch")
                                                      : "sqrt-clustered-at-barrier";
    if (stretch == "uniform") cfg.grid.stretch = Stretch::Uniform;
    else if (stretch == "sqrt-clustered-at-barrier") cfg.grid.stretch = Stretch::SqrtClusteredAtBarrier;
    else throw ValidationError("grid.stretch: expected \"uniform\" or \"sqrt-clustered-at-barrier\"");

    const json& r = root["rng"];
    check_keys(r, "rng", {"seed", "stream_id"});
    if (!r.contains("seed")) throw ValidationError("rng: missing key \"seed\"");
    cfg.rng.seed = r["seed"].get<std::uint64_t>();
    cfg.rng.stream_id = r.contains("stream_id") ? r["stream_id"].get<std::uint64_t>() : 0;

    validate(cfg.model, cfg.cost); // reject early with the field name
    validate_grid(cfg.grid);
    return cfg;
}
} // namespace

RunConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::ios_base::failure("cannot open config file: " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str());
}

std::string canonical_config(const RunConfig& cfg) {
    json root;
    root["model"] = {
        {"kind", cfg.model.kind == Kind::Abm ? "ABM" : "GBM"},
        {"sigma", cfg.model.sigma},
        {"drift", cfg.model.drift},
        {"barrier", cfg.model.barrier},
        {"side", cfg.model.side == Side::Lower ? "lower" : "upper"},
        {"z0", cfg.model.z0}};
    root["cost"] = {
        {"p", cfg.cost.p},
        {"beta", 1.0 / (cfg.cost.p - 1.0)},
        {"phi", fn_to_json(cfg.cost.phi)},
        {"rho", fn_to_json(cfg.cost.rho)},
        {"horizon", cfg.cost.horizon},
        {"x0", cfg.cost.x0}};
    root["grid"] = {
        {"nt", cfg.grid.nt},
        {"nz", cfg.grid.nz},
        {"z_far", cfg.grid.z_far},
        {"stretch", cfg.grid.stretch == Stretch::Uniform ? "uniform" : "sqrt-clustered-at-barrier"}};
    root["rng"] = {{"seed", cfg.rng.seed}, {"stream_id", cfg.rng.stream_id}};
    return root.dump();
}

std::string problem_hash(const RunConfig& cfg) {
    const std::string s = canonical_config(cfg);
    std::uint64_t h = 14695981039346656037ULL;
    for (unsigned char ch : s) {
        h ^= ch;
        h *= 1099511628211ULL;
    }
    char buf[20];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

} // namespace zoneliq
