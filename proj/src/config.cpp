#include "fbp/config.hpp"

#include <fstream>

#include "fbp/io.hpp"

namespace fbp {

namespace {

using nlohmann::json;

[[noreturn]] void fail(const std::string& what) { throw ConfigError("config: " + what); }

const json& require(const json& j, const char* key, const char* where) {
    if (!j.contains(key)) fail(std::string(where) + ": missing field '" + key + "'");
    return j.at(key);
}

std::vector<double> doubles(const json& j, const char* what) {
    if (!j.is_array()) fail(std::string(what) + " must be an array");
    std::vector<double> v;
    for (const auto& e : j) {
        if (!e.is_number()) fail(std::string(what) + " must contain numbers");
        v.push_back(e.get<double>());
    }
    return v;
}

Box parse_box(const json& j, const char* where) {
    Box b;
    b.lo = doubles(require(j, "lo", where), "window lo");
    b.hi = doubles(require(j, "hi", where), "window hi");
    if (b.empty()) fail(std::string(where) + ": empty box");
    return b;
}

FitnessFunction parse_fitness(const json& j, std::size_t dimension) {
    const std::string type = require(j, "type", "fitness").get<std::string>();
    if (type == "coordinate") {
        auto axis = std::size_t(j.value("axis", 0));
        if (axis >= dimension) fail("fitness axis out of range");
        return FitnessFunction::coordinate(axis);
    }
    if (type == "linear") {
        auto lambda = doubles(require(j, "lambda", "fitness"), "fitness lambda");
        if (lambda.size() != dimension) fail("fitness lambda dimension mismatch");
        return FitnessFunction::linear(std::move(lambda));
    }
    fail("unknown fitness type '" + type + "' (coordinate | linear)");
}

BranchingKernel parse_kernel(const json& j, std::size_t dimension) {
    const std::string type = require(j, "type", "kernel").get<std::string>();
    if (type == "uniform")
        return BranchingKernel::uniform_displacement(dimension);
    if (type == "gaussian")
        return BranchingKernel::gaussian_isotropic(dimension, j.value("sigma", 1.0));
    fail("unknown kernel type '" + type + "' (uniform | gaussian)");
}

InitialCondition parse_initial(const json& j, std::size_t dimension) {
    const std::string type = require(j, "type", "initial").get<std::string>();
    const double lambda0 = require(j, "lambda0", "initial").get<double>();
    if (type == "uniform_box") {
        Box b = parse_box(j, "initial");
        if (b.dimension() != dimension) fail("initial box dimension mismatch");
        return InitialCondition::uniform(std::move(b), lambda0);
    }
    if (type == "tabulated") {
        Box b = parse_box(require(j, "window", "initial"), "initial window");
        std::vector<std::size_t> res;
        for (const auto& e : require(j, "resolution", "initial")) res.push_back(e.get<std::size_t>());
        auto values = doubles(require(j, "values", "initial"), "initial values");
        return InitialCondition::tabulated(std::move(b), std::move(res), std::move(values),
                                           lambda0);
    }
    fail("unknown initial type '" + type + "' (uniform_box | tabulated)");
}

RunMode parse_mode(const std::string& s) {
    if (s == "simulate") return RunMode::simulate;
    if (s == "solve") return RunMode::solve;
    if (s == "solve-fixed") return RunMode::solve_fixed;
    if (s == "couple") return RunMode::couple;
    if (s == "converge") return RunMode::converge;
    if (s == "check") return RunMode::check;
    fail("unknown mode '" + s + "'");
}

SolverSettings parse_solver(const json& j) {
    SolverSettings s;
    s.window = parse_box(require(j, "window", "solver"), "solver window");
    for (const auto& e : require(j, "resolution", "solver")) {
        if (!e.is_number_integer() || e.get<long long>() < 2)
            fail("solver resolution must be integers >= 2");
        s.resolution.push_back(e.get<std::size_t>());
    }
    if (s.resolution.size() != s.window.dimension())
        fail("solver resolution/window dimension mismatch");
    s.dt = require(j, "dt", "solver").get<double>();
    if (!(s.dt > 0.0)) fail("solver dt must be positive");
    const std::string scheme = j.value("scheme", std::string("euler"));
    if (scheme == "euler")
        s.scheme = TimeScheme::euler;
    else if (scheme == "heun")
        s.scheme = TimeScheme::heun;
    else
        fail("unknown scheme '" + scheme + "' (euler | heun)");
    s.leakage_budget = j.value("leakage_budget", 0.5);
    if (j.contains("snapshot_times")) s.snapshot_times = doubles(j.at("snapshot_times"), "solver snapshot_times");
    if (j.contains("kernel_cache")) s.kernel_cache = j.at("kernel_cache").get<std::string>();
    return s;
}

}  // namespace

std::string to_string(RunMode mode) {
    switch (mode) {
        case RunMode::simulate: return "simulate";
        case RunMode::solve: return "solve";
        case RunMode::solve_fixed: return "solve-fixed";
        case RunMode::couple: return "couple";
        case RunMode::converge: return "converge";
        case RunMode::check: return "check";
    }
    return "?";
}

std::uint64_t ExperimentConfig::config_hash() const { return checksum_string(raw.dump()); }

ExperimentConfig parse_config(const nlohmann::json& j) {
    ExperimentConfig cfg;
    cfg.raw = j;
    if (j.value("version", 0) != 1) fail("unsupported or missing config version (expected 1)");
    cfg.mode = parse_mode(require(j, "mode", "config").get<std::string>());
    cfg.seed = require(j, "seed", "config").get<std::uint64_t>();
    if (j.contains("output_dir")) cfg.output_dir = j.at("output_dir").get<std::string>();

    const json& model = require(j, "model", "config");
    cfg.model.dimension = require(model, "dimension", "model").get<std::size_t>();
    if (cfg.model.dimension == 0 || cfg.model.dimension > 8)
        fail("model dimension must be in [1, 8]");
    cfg.model.fitness = parse_fitness(require(model, "fitness", "model"), cfg.model.dimension);
    cfg.model.kernel = parse_kernel(require(model, "kernel", "model"), cfg.model.dimension);
    cfg.model.initial = parse_initial(require(model, "initial", "model"), cfg.model.dimension);

    if (j.contains("particles")) {
        const json& p = j.at("particles");
        cfg.particles.count = p.value("count", cfg.particles.count);
        if (cfg.particles.count == 0) fail("particles count must be >= 1");
        cfg.particles.horizon = p.value("horizon", cfg.particles.horizon);
        if (!(cfg.particles.horizon >= 0.0)) fail("particles horizon must be >= 0");
        if (p.contains("snapshot_times"))
            cfg.particles.snapshot_times = doubles(p.at("snapshot_times"), "snapshot_times");
        cfg.particles.event_cap = p.value("event_cap", cfg.particles.event_cap);
        cfg.particles.population_cap = p.value("population_cap", cfg.particles.population_cap);
    }
    if (j.contains("solver")) cfg.solver = parse_solver(j.at("solver"));
    if (j.contains("envelopes")) {
        const json& e = j.at("envelopes");
        cfg.envelopes.delta = e.value("delta", cfg.envelopes.delta);
        cfg.envelopes.epsilon = e.value("epsilon", cfg.envelopes.epsilon);
        if (e.contains("levels_lower"))
            cfg.envelopes.levels_lower = doubles(e.at("levels_lower"), "levels_lower");
        if (e.contains("levels_upper"))
            cfg.envelopes.levels_upper = doubles(e.at("levels_upper"), "levels_upper");
        if (cfg.envelopes.levels_lower.size() != cfg.envelopes.levels_upper.size())
            fail("envelope level lists must have equal length");
    }
    if (j.contains("fixed_boundary")) {
        const json& f = j.at("fixed_boundary");
        FixedBoundarySettings fb;
        fb.delta = require(f, "delta", "fixed_boundary").get<double>();
        fb.epsilon = f.value("epsilon", fb.epsilon);
        fb.levels = doubles(require(f, "levels", "fixed_boundary"), "fixed_boundary levels");
        if (fb.levels.empty()) fail("fixed_boundary levels must be nonempty");
        cfg.fixed_boundary = std::move(fb);
    }
    if (j.contains("converge")) {
        const json& c = j.at("converge");
        if (c.contains("population_list")) {
            cfg.converge.population_list.clear();
            for (const auto& e : c.at("population_list"))
                cfg.converge.population_list.push_back(e.get<std::size_t>());
            if (cfg.converge.population_list.empty()) fail("converge population_list empty");
        }
        cfg.converge.replicas = c.value("replicas", cfg.converge.replicas);
        if (cfg.converge.replicas == 0) fail("converge replicas must be >= 1");
    }
    if (j.contains("check")) {
        cfg.check.samples = j.at("check").value("samples", cfg.check.samples);
        if (j.at("check").contains("required"))
            for (const auto& e : j.at("check").at("required"))
                cfg.check.required.push_back(e.get<std::string>());
    }

    // Mode-specific requirements.
    switch (cfg.mode) {
        case RunMode::solve:
        case RunMode::solve_fixed:
        case RunMode::converge:
            if (!cfg.solver) fail("mode " + to_string(cfg.mode) + " requires a solver section");
            break;
        case RunMode::simulate:
        case RunMode::couple:
        case RunMode::check:
            break;
    }
    if (cfg.mode == RunMode::solve_fixed && !cfg.fixed_boundary)
        fail("mode solve-fixed requires a fixed_boundary section");
    return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& file) {
    std::ifstream in(file);
    if (!in) fail("cannot open " + file.string());
    nlohmann::json j;
    try {
        in >> j;
    } catch (const std::exception& e) {
        fail(std::string("invalid JSON: ") + e.what());
    }
    return parse_config(j);
}

nlohmann::json config_schema() {
    using nlohmann::json;
    json schema;
    schema["version"] = "int, required, must be 1";
    schema["mode"] = "string, required: simulate | solve | solve-fixed | couple | converge | check";
    schema["seed"] = "uint64, required; recorded in every artifact";
    schema["output_dir"] = "string, optional; overridden by --out, defaults to $FBP_OUT_DIR or '.'";
    schema["model"] = {
        {"dimension", "int in [1, 8], required"},
        {"fitness", "{type: coordinate, axis: int} | {type: linear, lambda: [double x d]}"},
        {"kernel", "{type: uniform} | {type: gaussian, sigma: double > 0}"},
        {"initial",
         "{type: uniform_box, lo: [...], hi: [...], lambda0: double} | {type: tabulated, "
         "window: {lo, hi}, resolution: [...], values: [...], lambda0: double}"}};
    schema["particles"] = {{"count", "int >= 1 (default 1000)"},
                           {"horizon", "double >= 0 (default 1.0)"},
                           {"snapshot_times", "[double], optional"},
                           {"event_cap", "int (default 1e8)"},
                           {"population_cap", "int (default 1e8)"}};
    schema["solver"] = {{"window", "{lo: [...], hi: [...]}"},
                        {"resolution", "[int >= 2 per axis]"},
                        {"dt", "double > 0"},
                        {"scheme", "euler | heun (default euler)"},
                        {"leakage_budget", "double (default 0.5)"},
                        {"snapshot_times", "[double], optional"},
                        {"kernel_cache", "string path, optional"}};
    schema["envelopes"] = {{"delta", "double > 0 (default 0.1)"},
                           {"epsilon", "double > 0 (default 0.05)"},
                           {"levels_lower", "[double], optional explicit lower envelope"},
                           {"levels_upper", "[double], optional explicit upper envelope"}};
    schema["fixed_boundary"] = {{"delta", "double > 0, required"},
                                {"epsilon", "double > 0 (default 0.05)"},
                                {"levels", "[double] nondecreasing on the epsilon lattice"}};
    schema["converge"] = {{"population_list", "[int] (default [100, 1000, 10000])"},
                          {"replicas", "int >= 1 (default 20)"}};
    schema["check"] = {{"samples", "int >= 1 (default 200)"},
                       {"required",
                        "[string], optional: names of required invariant checks (default: all)"}};
    schema["modes"] = {{"simulate", "event log + frontier path + snapshots"},
                       {"solve", "free boundary solve: density + boundary + mass audit"},
                       {"solve-fixed", "fixed piecewise-constant boundary solve"},
                       {"couple", "coupled runs with domination audit"},
                       {"converge", "hydrodynamic convergence study table"},
                       {"check", "model validation + invariant suite"}};
    return schema;
}

}  // namespace fbp
