#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "fbp/config.hpp"

#include <json.hpp>

namespace fbp {

inline constexpr const char* kCodeVersion = "0.1.0";

struct RunManifest {
    std::string config_hash;
    std::string code_version = kCodeVersion;
    std::string created_utc;
    std::uint64_t seed = 0;
    std::string mode;
    double solver_output_tolerance = 1e-12;
    std::vector<std::string> warnings;
    std::vector<std::pair<std::string, std::string>> artifacts;  // file name -> fnv64 hex

    nlohmann::json to_json() const;
};

struct RunOutcome {
    RunManifest manifest;
    std::filesystem::path manifest_path;
    bool required_check_failed = false;
    bool model_validation_failed = false;
};

/// Dispatches a configured experiment, writes its artifacts and manifest
/// under out_dir. threads > 0 pins the OpenMP team size.
RunOutcome run(const ExperimentConfig& config, const std::filesystem::path& out_dir,
               int threads = 0);

}  // namespace fbp
