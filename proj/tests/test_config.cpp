#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "fbp/run.hpp"

using namespace fbp;
namespace fs = std::filesystem;

namespace {

nlohmann::json base_config() {
    return nlohmann::json{
        {"version", 1},
        {"mode", "simulate"},
        {"seed", 7},
        {"model",
         {{"dimension", 1},
          {"fitness", {{"type", "coordinate"}, {"axis", 0}}},
          {"kernel", {{"type", "uniform"}}},
          {"initial",
           {{"type", "uniform_box"}, {"lo", {0.0}}, {"hi", {1.0}}, {"lambda0", 0.0}}}}},
        {"particles", {{"count", 200}, {"horizon", 0.5}}},
        {"check", {{"samples", 32}}}};
}

fs::path fresh_dir(const std::string& name) {
    fs::path dir = fs::temp_directory_path() / name;
    fs::remove_all(dir);
    return dir;
}

}  // namespace

TEST_CASE("config parsing and mode requirements") {
    auto cfg = parse_config(base_config());
    CHECK(cfg.mode == RunMode::simulate);
    CHECK(cfg.seed == 7);
    CHECK(cfg.particles.count == 200);

    auto bad_version = base_config();
    bad_version["version"] = 2;
    CHECK_THROWS_AS((void)parse_config(bad_version), ConfigError);

    auto missing_model = base_config();
    missing_model.erase("model");
    CHECK_THROWS_AS((void)parse_config(missing_model), ConfigError);

    auto solve_without_solver = base_config();
    solve_without_solver["mode"] = "solve";
    CHECK_THROWS_AS((void)parse_config(solve_without_solver), ConfigError);

    auto bad_kernel = base_config();
    bad_kernel["model"]["kernel"]["type"] = "levy";
    CHECK_THROWS_AS((void)parse_config(bad_kernel), ConfigError);
}

TEST_CASE("schema covers every top-level config field") {
    auto schema = config_schema();
    for (const char* key :
         {"version", "mode", "seed", "model", "particles", "solver", "envelopes",
          "fixed_boundary", "converge", "check"})
        CHECK(schema.contains(key));
}

TEST_CASE("simulate artifacts are byte-identical across reruns") {
    auto cfg = parse_config(base_config());
    auto out1 = fresh_dir("fbp_run_a");
    auto out2 = fresh_dir("fbp_run_b");
    RunOutcome r1 = run(cfg, out1);
    RunOutcome r2 = run(cfg, out2);
    CHECK_FALSE(r1.model_validation_failed);
    REQUIRE(r1.manifest.artifacts.size() == r2.manifest.artifacts.size());
    for (std::size_t i = 0; i < r1.manifest.artifacts.size(); ++i) {
        CHECK(r1.manifest.artifacts[i].first == r2.manifest.artifacts[i].first);
        CHECK(r1.manifest.artifacts[i].second == r2.manifest.artifacts[i].second);
    }
    CHECK(fs::exists(out1 / "events.csv"));
    CHECK(fs::exists(out1 / "ell_path.csv"));
    CHECK(fs::exists(out1 / "snapshots.csv"));
    CHECK(fs::exists(out1 / "manifest.json"));
    fs::remove_all(out1);
    fs::remove_all(out2);
}

TEST_CASE("check mode reports invariants and passes on the reference model") {
    auto j = base_config();
    j["mode"] = "check";
    j["solver"] = {{"window", {{"lo", {-0.5}}, {"hi", {4.5}}}},
                   {"resolution", {256}},
                   {"dt", 5e-3}};
    auto cfg = parse_config(j);
    auto out = fresh_dir("fbp_run_check");
    RunOutcome r = run(cfg, out);
    CHECK_FALSE(r.model_validation_failed);
    CHECK_FALSE(r.required_check_failed);
    CHECK(fs::exists(out / "report.json"));

    std::ifstream in(out / "report.json");
    nlohmann::json report;
    in >> report;
    CHECK(report.at("all_passed").get<bool>());
    fs::remove_all(out);
}

TEST_CASE("model validation failure is surfaced") {
    auto j = base_config();
    // Initial support strictly below lambda0.
    j["model"]["initial"]["lambda0"] = 5.0;
    auto cfg = parse_config(j);
    auto out = fresh_dir("fbp_run_invalid");
    RunOutcome r = run(cfg, out);
    CHECK(r.model_validation_failed);
    CHECK(fs::exists(out / "validation.json"));
    fs::remove_all(out);
}

TEST_CASE("converge mode emits the study table") {
    auto j = base_config();
    j["mode"] = "converge";
    j["particles"] = {{"count", 100}, {"horizon", 0.5}};
    j["solver"] = {{"window", {{"lo", {-0.5}}, {"hi", {4.0}}}},
                   {"resolution", {256}},
                   {"dt", 5e-3}};
    j["converge"] = {{"population_list", {50, 200}}, {"replicas", 2}};
    auto cfg = parse_config(j);
    auto out = fresh_dir("fbp_run_converge");
    RunOutcome r = run(cfg, out);
    CHECK_FALSE(r.model_validation_failed);
    CHECK(fs::exists(out / "study.csv"));
    fs::remove_all(out);
}

TEST_CASE("couple mode writes a clean audit") {
    auto j = base_config();
    j["mode"] = "couple";
    j["particles"] = {{"count", 150}, {"horizon", 0.5}};
    j["envelopes"] = {{"delta", 0.1}, {"epsilon", 0.05}};
    auto cfg = parse_config(j);
    auto out = fresh_dir("fbp_run_couple");
    RunOutcome r = run(cfg, out);
    CHECK_FALSE(r.model_validation_failed);
    std::ifstream in(out / "audit.json");
    nlohmann::json audit;
    in >> audit;
    CHECK(audit.at("tight_violations").get<int>() == 0);
    CHECK(audit.at("loose_violations").get<int>() == 0);
    CHECK_FALSE(audit.contains("envelope_violation_time"));
    fs::remove_all(out);
}

TEST_CASE("solve and solve-fixed modes write density artifacts") {
    auto j = base_config();
    j["mode"] = "solve";
    j["particles"] = {{"horizon", 0.5}};
    j["solver"] = {{"window", {{"lo", {-0.5}}, {"hi", {4.0}}}},
                   {"resolution", {256}},
                   {"dt", 5e-3},
                   {"snapshot_times", {0.25}}};
    auto out = fresh_dir("fbp_run_solve");
    RunOutcome r = run(parse_config(j), out);
    CHECK_FALSE(r.model_validation_failed);
    CHECK(fs::exists(out / "density.csv"));
    CHECK(fs::exists(out / "boundary.csv"));
    CHECK(fs::exists(out / "mass.csv"));
    fs::remove_all(out);

    j["mode"] = "solve-fixed";
    j["fixed_boundary"] = {{"delta", 0.25}, {"epsilon", 0.05}, {"levels", {0.0, 0.1}}};
    auto out2 = fresh_dir("fbp_run_solve_fixed");
    RunOutcome r2 = run(parse_config(j), out2);
    CHECK_FALSE(r2.model_validation_failed);
    CHECK(fs::exists(out2 / "density.csv"));
    fs::remove_all(out2);
}

TEST_CASE("couple mode accepts explicit envelope levels") {
    auto j = base_config();
    j["mode"] = "couple";
    j["particles"] = {{"count", 80}, {"horizon", 0.4}};
    j["envelopes"] = {{"delta", 0.2},
                      {"epsilon", 0.05},
                      {"levels_lower", {-1.0, -1.0}},
                      {"levels_upper", {10.0, 10.0}}};
    auto cfg = parse_config(j);
    auto out = fresh_dir("fbp_run_couple_explicit");
    RunOutcome r = run(cfg, out);
    CHECK_FALSE(r.model_validation_failed);
    std::ifstream in(out / "audit.json");
    nlohmann::json audit;
    in >> audit;
    CHECK(audit.at("tight_violations").get<int>() == 0);
    CHECK(audit.at("loose_violations").get<int>() == 0);
    fs::remove_all(out);
}
