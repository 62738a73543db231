#include <cstdlib>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "fbp/run.hpp"
#include "fbp/simulate.hpp"

namespace {

// Exit code contract: 0 success, 2 config error, 3 model validation failure,
// 4 required-check failure, 5 resource cap / solver abort.
constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitValidation = 3;
constexpr int kExitCheckFailed = 4;
constexpr int kExitResource = 5;

std::string default_out_dir() {
    if (const char* env = std::getenv("FBP_OUT_DIR")) return env;
    return ".";
}

int execute(const std::string& config_path, std::string out_dir, long long seed_override,
            int threads, bool force_check_mode) {
    try {
        fbp::ExperimentConfig cfg = fbp::load_config(config_path);
        if (seed_override >= 0) cfg.seed = std::uint64_t(seed_override);
        if (force_check_mode) cfg.mode = fbp::RunMode::check;
        if (out_dir.empty())
            out_dir = cfg.output_dir.empty() ? default_out_dir() : cfg.output_dir.string();
        fbp::RunOutcome outcome = fbp::run(cfg, out_dir, threads);
        std::cout << "manifest: " << outcome.manifest_path.string() << "\n";
        if (outcome.model_validation_failed) {
            std::cerr << "model validation failed (see validation.json)\n";
            return kExitValidation;
        }
        if (outcome.required_check_failed) {
            std::cerr << "required checks failed (see report.json)\n";
            return kExitCheckFailed;
        }
        return kExitOk;
    } catch (const fbp::ConfigError& e) {
        std::cerr << e.what() << "\n";
        return kExitConfig;
    } catch (const fbp::SolverError& e) {
        std::cerr << e.what() << "\n";
        return kExitResource;
    } catch (const fbp::SimulationError& e) {
        std::cerr << e.what() << "\n";
        return kExitResource;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitConfig;
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"branching-selection particle systems and their free boundary limit"};
    app.require_subcommand(1);

    std::string config_path, out_dir;
    long long seed_override = -1;
    int threads = 0;

    auto* run_cmd = app.add_subcommand("run", "execute the experiment described by a config");
    run_cmd->add_option("config", config_path, "JSON config file")->required();
    run_cmd->add_option("--out", out_dir, "output directory (default: config, $FBP_OUT_DIR, '.')");
    run_cmd->add_option("--seed", seed_override, "override the config seed");
    run_cmd->add_option("--threads", threads, "OpenMP thread count (0: library default)");

    auto* check_cmd = app.add_subcommand("check", "validate the model and run the invariant suite");
    check_cmd->add_option("config", config_path, "JSON config file")->required();
    check_cmd->add_option("--out", out_dir, "output directory");
    check_cmd->add_option("--seed", seed_override, "override the config seed");
    check_cmd->add_option("--threads", threads, "OpenMP thread count");

    auto* schema_cmd = app.add_subcommand("schema", "print the config schema");

    CLI11_PARSE(app, argc, argv);

    if (schema_cmd->parsed()) {
        std::cout << fbp::config_schema().dump(2) << "\n";
        return kExitOk;
    }
    return execute(config_path, out_dir, seed_override, threads, check_cmd->parsed());
}
