#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "fbp/boundary.hpp"
#include "fbp/model.hpp"
#include "fbp/solver.hpp"

#include <json.hpp>

namespace fbp {

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

enum class RunMode { simulate, solve, solve_fixed, couple, converge, check };

std::string to_string(RunMode mode);

struct ParticleSettings {
    std::size_t count = 1000;
    double horizon = 1.0;
    std::vector<double> snapshot_times;
    std::size_t event_cap = 100'000'000;
    std::size_t population_cap = 100'000'000;
};

struct SolverSettings {
    Box window;
    std::vector<std::size_t> resolution;
    double dt = 1e-3;
    TimeScheme scheme = TimeScheme::euler;
    double leakage_budget = 0.5;
    std::vector<double> snapshot_times;
    std::optional<std::filesystem::path> kernel_cache;
};

struct EnvelopeSettings {
    double delta = 0.1;
    double epsilon = 0.05;
    std::vector<double> levels_lower;  // optional explicit envelopes
    std::vector<double> levels_upper;
};

struct FixedBoundarySettings {
    double delta = 0.1;
    double epsilon = 0.05;
    std::vector<double> levels;
};

struct ConvergeSettings {
    std::vector<std::size_t> population_list = {100, 1000, 10000};
    std::size_t replicas = 20;
};

struct CheckSettings {
    std::size_t samples = 200;
    std::vector<std::string> required;  // empty: every invariant check is required
};

/// One file fully determines a run; the seed is recorded in every artifact.
struct ExperimentConfig {
    RunMode mode = RunMode::check;
    std::uint64_t seed = 1;
    std::filesystem::path output_dir;
    ModelSpec model;
    ParticleSettings particles;
    std::optional<SolverSettings> solver;
    EnvelopeSettings envelopes;
    std::optional<FixedBoundarySettings> fixed_boundary;
    ConvergeSettings converge;
    CheckSettings check;
    nlohmann::json raw;  // canonical form, hashed into the manifest

    std::uint64_t config_hash() const;
};

ExperimentConfig parse_config(const nlohmann::json& j);
ExperimentConfig load_config(const std::filesystem::path& file);

/// Machine-readable schema of the config format (field names, types, modes).
nlohmann::json config_schema();

}  // namespace fbp
