#include "fbp/run.hpp"

#include <chrono>
#include <cmath>
#include <fstream>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "fbp/analysis.hpp"
#include "fbp/boundary.hpp"
#include "fbp/io.hpp"
#include "fbp/simulate.hpp"

namespace fbp {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

std::string utc_now() {
    const auto now = std::chrono::system_clock::now();
    const std::time_t t = std::chrono::system_clock::to_time_t(now);
    char buf[32];
    std::tm tm{};
    gmtime_r(&t, &tm);
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

class ArtifactSink {
public:
    ArtifactSink(fs::path dir, RunManifest& manifest) : dir_(std::move(dir)), manifest_(manifest) {
        fs::create_directories(dir_);
    }

    fs::path path(const std::string& name) const { return dir_ / name; }

    void record(const std::string& name) {
        manifest_.artifacts.emplace_back(name, hex64(checksum_file(dir_ / name)));
    }

    // Every JSON artifact carries the run seed.
    void write_json(const std::string& name, json j) {
        j["seed"] = manifest_.seed;
        std::ofstream out(dir_ / name);
        out << j.dump(2) << "\n";
        out.close();
        record(name);
    }

private:
    fs::path dir_;
    RunManifest& manifest_;
};

Box default_validation_window(const ExperimentConfig& cfg) {
    if (cfg.solver) return cfg.solver->window;
    Box b = cfg.model.initial.type == InitialType::uniform_box ? cfg.model.initial.support
                                                               : cfg.model.initial.tab_window;
    for (std::size_t k = 0; k < b.dimension(); ++k) {
        b.lo[k] -= 1.0;
        b.hi[k] += 1.0;
    }
    return b;
}

json validation_to_json(const ValidationReport& report) {
    json clauses = json::array();
    for (const auto& c : report.clauses)
        clauses.push_back({{"clause", c.name},
                           {"pass", c.pass},
                           {"informational", c.informational},
                           {"slack", c.slack},
                           {"detail", c.detail}});
    return json{{"clauses", clauses}, {"all_passed", report.all_passed()}};
}

void write_event_log(ArtifactSink& sink, const std::string& name, const Trajectory& traj,
                     std::size_t dimension) {
    std::vector<std::string> cols = {"event_index", "time", "parent_label"};
    for (std::size_t k = 0; k < dimension; ++k) cols.push_back("birth_x" + std::to_string(k));
    cols.push_back("removed_label");
    cols.push_back("ell_after");
    CsvWriter csv(sink.path(name), cols);
    std::vector<double> row;
    for (std::size_t i = 0; i < traj.events.size(); ++i) {
        const Event& e = traj.events[i];
        row.clear();
        row.push_back(double(i));
        row.push_back(e.time);
        row.push_back(double(e.parent_label));
        for (std::size_t k = 0; k < dimension; ++k) row.push_back(e.birth[k]);
        row.push_back(double(e.removed_label));
        row.push_back(e.ell_after);
        csv.row(row);
    }
    csv.close();
    sink.record(name);
}

void write_boundary(ArtifactSink& sink, const std::string& name, const BoundaryPath& path) {
    CsvWriter csv(sink.path(name), {"time", "level"});
    csv.row({path.start_time, path.start_level});
    for (const auto& [t, v] : path.jumps) csv.row({t, v});
    csv.close();
    sink.record(name);
}

void write_snapshots(ArtifactSink& sink, const std::string& name,
                     const std::vector<Snapshot>& snaps) {
    if (snaps.empty()) return;
    std::vector<std::string> cols = {"time", "particle_index"};
    for (std::size_t k = 0; k < snaps.front().dimension; ++k)
        cols.push_back("x" + std::to_string(k));
    CsvWriter csv(sink.path(name), cols);
    std::vector<double> row;
    for (const auto& s : snaps) {
        const std::size_t n = s.dimension ? s.coords.size() / s.dimension : 0;
        for (std::size_t i = 0; i < n; ++i) {
            row.assign({s.time, double(i)});
            for (std::size_t k = 0; k < s.dimension; ++k)
                row.push_back(s.coords[i * s.dimension + k]);
            csv.row(row);
        }
    }
    csv.close();
    sink.record(name);
}

void write_density(ArtifactSink& sink, const std::string& name, const Grid& grid,
                   const std::vector<std::pair<double, DensityField>>& snaps) {
    std::vector<std::string> cols = {"time"};
    for (std::size_t k = 0; k < grid.dimension(); ++k)
        cols.push_back("center_x" + std::to_string(k));
    cols.push_back("value");
    CsvWriter csv(sink.path(name), cols);
    std::vector<double> row;
    for (const auto& [t, u] : snaps) {
        for (std::size_t c = 0; c < grid.cell_count(); ++c) {
            row.assign(1, t);
            for (std::size_t k = 0; k < grid.dimension(); ++k) row.push_back(grid.center(c, k));
            row.push_back(u.values[c]);
            csv.row(row);
        }
    }
    csv.close();
    sink.record(name);
}

PiecewiseBoundary boundary_from_settings(double delta, double epsilon,
                                         const std::vector<double>& levels) {
    PiecewiseBoundary b;
    b.delta = delta;
    b.epsilon = epsilon;
    b.levels = levels;
    if (!b.valid()) throw ConfigError("config: boundary levels must be nondecreasing on the lattice");
    return b;
}

struct CheckResult {
    std::string name;
    bool pass = false;
    std::string detail;
};

json report_to_json(const DistanceReport& r, const std::string& context_hash) {
    return json{{"metric", r.metric},     {"value", r.value},   {"bound", r.bound},
                {"pass", r.pass},         {"skipped", r.skipped},
                {"context", r.context},   {"context_hash", context_hash}};
}

// Invariant suite behind `fbp check`: cheap structural checks of the
// simulator and solver on the configured model.
std::vector<CheckResult> invariant_suite(const ExperimentConfig& cfg,
                                         json* analysis_reports) {
    std::vector<CheckResult> out;
    const ModelSpec& spec = cfg.model;
    const std::size_t n = std::min<std::size_t>(cfg.particles.count, 500);
    const double T = std::min(cfg.particles.horizon, 1.0);

    {
        CheckResult c{"frontier_monotone", true, ""};
        CheckResult z{"empirical_below_frontier_zero", true, ""};
        for (std::uint64_t rep = 0; rep < 5; ++rep) {
            RandomStream rng = seed_stream(cfg.seed, 100 + rep);
            Trajectory traj = simulate(spec, n, T, rng,
                                       SimulateOptions{{}, cfg.particles.event_cap});
            if (!traj.ell_path.nondecreasing()) {
                c.pass = false;
                c.detail = "frontier decreased (replica " + std::to_string(rep) + ")";
            }
            const Snapshot& last = traj.snapshots.back();
            const double ell = traj.ell_path.final_level();
            for (std::size_t i = 0; i < n; ++i) {
                std::span<const double> x(last.coords.data() + i * last.dimension,
                                          last.dimension);
                if (spec.fitness(x) < ell) {
                    z.pass = false;
                    z.detail = "mass below the frontier";
                }
            }
        }
        if (c.detail.empty()) c.detail = "5 replicas";
        if (z.detail.empty()) z.detail = "5 replicas, final snapshots";
        out.push_back(c);
        out.push_back(z);
    }
    {
        CheckResult c{"simulation_deterministic", true, ""};
        RandomStream r1 = seed_stream(cfg.seed, 7), r2 = seed_stream(cfg.seed, 7);
        Trajectory a = simulate(spec, n, T, r1), b = simulate(spec, n, T, r2);
        bool same = a.events.size() == b.events.size();
        for (std::size_t i = 0; same && i < a.events.size(); ++i)
            same = a.events[i].time == b.events[i].time &&
                   a.events[i].parent_label == b.events[i].parent_label &&
                   a.events[i].birth == b.events[i].birth &&
                   a.events[i].removed_label == b.events[i].removed_label;
        c.pass = same;
        c.detail = same ? "identical event logs for identical seeds" : "event logs diverged";
        out.push_back(c);
    }
    if (cfg.solver && T > 0.0) {
        const auto& ss = *cfg.solver;
        Grid grid = build_grid(ss.window, ss.resolution, spec.fitness);
        KernelBuildOptions kb;
        kb.cache_dir = ss.kernel_cache;
        KernelOperator op = build_kernel(grid, spec.kernel, kb);
        DensityField u0 = initial_field(grid, spec.initial);
        {
            CheckResult c{"kernel_parallel_matches_serial", true, ""};
            DensityField a, b;
            op.apply(u0, a);
            op.apply_serial(u0, b);
            c.pass = a.values == b.values;
            c.detail = c.pass ? "bitwise equal" : "parallel and serial applications differ";
            out.push_back(c);
        }
        SolveOptions so;
        // Keep the check quick: at most 100 steps, dt an exact divisor of T.
        const auto steps = std::size_t(
            std::clamp(std::round(T / ss.dt), 1.0, 100.0));
        so.dt = T / double(steps);
        so.scheme = ss.scheme;
        so.leakage_budget = ss.leakage_budget;
        auto fbp_run = solve_fbp(grid, op, u0, spec.initial.lambda0, T, so);
        auto free_run = solve_free(grid, op, u0, T, so);
        {
            CheckResult c{"solver_boundary_monotone", fbp_run.boundary.nondecreasing(), ""};
            out.push_back(c);
        }
        {
            CheckResult c{"solver_mass_pinned", true, ""};
            for (std::size_t i = 0; i < fbp_run.mass.size(); ++i) {
                const double bound = fbp_run.pin_quantum[i] + fbp_run.leaked_cumulative[i] +
                                     fbp_run.vanishing_loss_cumulative[i] + 1e-12;
                if (fbp_run.pin_deficit[i] < -1e-12 || fbp_run.pin_deficit[i] > bound) {
                    c.pass = false;
                    c.detail = "step " + std::to_string(i);
                    break;
                }
            }
            out.push_back(c);
        }
        {
            CheckResult c{"solver_dominated_by_free_growth", true, ""};
            for (std::size_t i = 0; i < grid.cell_count(); ++i)
                if (fbp_run.final_field.values[i] > free_run.final_field.values[i] + 1e-10) {
                    c.pass = false;
                    break;
                }
            out.push_back(c);
        }
        if (analysis_reports) {
            // Analysis reports with the standard (metric, value, bound, pass,
            // context hash) shape, on the same small runs.
            const std::string ghash = hex64(grid.hash());
            json reports = json::array();

            SolveOptions half = so;
            half.dt = so.dt / 2.0;
            auto fbp_half = solve_fbp(grid, op, u0, spec.initial.lambda0, T, half);
            reports.push_back(report_to_json(
                truncated_l1_check(fbp_run.final_field, fbp_half.final_field,
                                   fbp_run.boundary.final_level(),
                                   fbp_half.boundary.final_level(), grid),
                ghash));

            RandomStream rng = seed_stream(cfg.seed, 12'000);
            Trajectory traj = simulate(spec, n, T, rng);
            DiscreteMeasure empirical;
            empirical.dimension = traj.snapshots.back().dimension;
            empirical.coords = traj.snapshots.back().coords;
            empirical.weights.assign(n, 1.0 / double(n));
            DistanceReport md = measure_distance_report(
                empirical, grid_measure(grid, fbp_run.final_field, true));
            md.context = "empirical measure at T vs solver density, N=" + std::to_string(n);
            reports.push_back(report_to_json(md, ghash));
            (*analysis_reports) = std::move(reports);
        }
    }
    return out;
}

void run_simulate(const ExperimentConfig& cfg, ArtifactSink& sink) {
    RandomStream rng = seed_stream(cfg.seed, 0);
    SimulateOptions opts;
    opts.snapshot_times = cfg.particles.snapshot_times;
    opts.event_cap = cfg.particles.event_cap;
    Trajectory traj = simulate(cfg.model, cfg.particles.count, cfg.particles.horizon, rng, opts);
    write_event_log(sink, "events.csv", traj, cfg.model.dimension);
    write_boundary(sink, "ell_path.csv", traj.ell_path);
    write_snapshots(sink, "snapshots.csv", traj.snapshots);

    // Regularity diagnostics of the frontier path.
    json diag;
    for (double h : {0.01, 0.05, 0.1})
        diag["ell_modulus"][format_full(h)] =
            modulus_of_continuity(traj.ell_path, h, cfg.particles.horizon);
    diag["events"] = traj.events.size();
    diag["ell_final"] = traj.ell_path.final_level();
    sink.write_json("diagnostics.json", diag);
}

void run_solve(const ExperimentConfig& cfg, ArtifactSink& sink,
               std::vector<std::string>& warnings) {
    const auto& ss = *cfg.solver;
    Grid grid = build_grid(ss.window, ss.resolution, cfg.model.fitness);
    KernelBuildOptions kb;
    kb.cache_dir = ss.kernel_cache;
    KernelOperator op = build_kernel(grid, cfg.model.kernel, kb);
    if (!op.warning.empty()) warnings.push_back(op.warning);
    DensityField u0 = initial_field(grid, cfg.model.initial);
    SolveOptions so;
    so.dt = ss.dt;
    so.scheme = ss.scheme;
    so.leakage_budget = ss.leakage_budget;
    so.snapshot_times = ss.snapshot_times;
    auto result = solve_fbp(grid, op, u0, cfg.model.initial.lambda0, cfg.particles.horizon, so);
    write_density(sink, "density.csv", grid, result.snapshots);
    write_boundary(sink, "boundary.csv", result.boundary);
    {
        CsvWriter csv(sink.path("mass.csv"),
                      {"time", "mass", "pin_deficit", "pin_quantum", "leaked_cumulative"});
        for (std::size_t i = 0; i < result.times.size(); ++i)
            csv.row({result.times[i], result.mass[i], result.pin_deficit[i],
                     result.pin_quantum[i], result.leaked_cumulative[i]});
        csv.close();
        sink.record("mass.csv");
    }
}

void run_solve_fixed(const ExperimentConfig& cfg, ArtifactSink& sink,
                     std::vector<std::string>& warnings) {
    const auto& ss = *cfg.solver;
    const auto& fb = *cfg.fixed_boundary;
    Grid grid = build_grid(ss.window, ss.resolution, cfg.model.fitness);
    KernelBuildOptions kb;
    kb.cache_dir = ss.kernel_cache;
    KernelOperator op = build_kernel(grid, cfg.model.kernel, kb);
    if (!op.warning.empty()) warnings.push_back(op.warning);
    DensityField u0 = initial_field(grid, cfg.model.initial);
    SolveOptions so;
    so.dt = ss.dt;
    so.scheme = ss.scheme;
    so.leakage_budget = ss.leakage_budget;
    so.snapshot_times = ss.snapshot_times;
    PiecewiseBoundary wall = boundary_from_settings(fb.delta, fb.epsilon, fb.levels);
    auto result = solve_fixed_boundary(grid, op, u0, cfg.model.initial.lambda0, wall,
                                       cfg.particles.horizon, so);
    write_density(sink, "density.csv", grid, result.snapshots);
    {
        CsvWriter csv(sink.path("mass.csv"), {"time", "mass"});
        for (std::size_t i = 0; i < result.times.size(); ++i)
            csv.row({result.times[i], result.mass[i]});
        csv.close();
        sink.record("mass.csv");
    }
}

void run_couple(const ExperimentConfig& cfg, ArtifactSink& sink) {
    RandomStream rng = seed_stream(cfg.seed, 0);
    CoupledOptions opts;
    opts.delta = cfg.envelopes.delta;
    opts.epsilon = cfg.envelopes.epsilon;
    opts.population_cap = cfg.particles.population_cap;
    if (!cfg.envelopes.levels_lower.empty()) {
        opts.lower_envelope = boundary_from_settings(cfg.envelopes.delta, cfg.envelopes.epsilon,
                                                     cfg.envelopes.levels_lower);
        opts.upper_envelope = boundary_from_settings(cfg.envelopes.delta, cfg.envelopes.epsilon,
                                                     cfg.envelopes.levels_upper);
    }
    CoupledResult result =
        coupled_simulate(cfg.model, cfg.particles.count, cfg.particles.horizon, rng, opts);

    write_event_log(sink, "events.csv", result.selection, cfg.model.dimension);
    write_boundary(sink, "ell_path.csv", result.selection.ell_path);
    {
        CsvWriter csv(sink.path("populations.csv"),
                      {"event_index", "time", "tight_population", "loose_population"});
        for (std::size_t i = 0; i < result.event_times.size(); ++i)
            csv.row({double(i), result.event_times[i], double(result.tight_population[i]),
                     double(result.loose_population[i])});
        csv.close();
        sink.record("populations.csv");
    }
    {
        CsvWriter csv(sink.path("envelopes.csv"), {"interval", "t_start", "lower", "upper"});
        for (std::size_t j = 0; j < result.lower_envelope.intervals(); ++j)
            csv.row({double(j), double(j) * result.lower_envelope.delta,
                     result.lower_envelope.levels[j], result.upper_envelope.levels[j]});
        csv.close();
        sink.record("envelopes.csv");
    }
    json audit;
    audit["events_checked"] = result.audit.events_checked;
    audit["tight_violations"] = result.audit.tight_violations;
    audit["loose_violations"] = result.audit.loose_violations;
    audit["violations_while_sandwiched"] = result.audit.violations_while_sandwiched;
    if (result.audit.first_violation_time)
        audit["first_violation_time"] = *result.audit.first_violation_time;
    if (result.audit.envelope_violation_time)
        audit["envelope_violation_time"] = *result.audit.envelope_violation_time;
    audit["tape_population"] = result.tape_population;
    sink.write_json("audit.json", audit);
}

void run_converge(const ExperimentConfig& cfg, ArtifactSink& sink,
                  std::vector<std::string>& warnings) {
    const auto& ss = *cfg.solver;
    Grid grid = build_grid(ss.window, ss.resolution, cfg.model.fitness);
    KernelBuildOptions kb;
    kb.cache_dir = ss.kernel_cache;
    KernelOperator op = build_kernel(grid, cfg.model.kernel, kb);
    if (!op.warning.empty()) warnings.push_back(op.warning);
    DensityField u0 = initial_field(grid, cfg.model.initial);
    SolveOptions so;
    so.dt = ss.dt;
    so.scheme = ss.scheme;
    so.leakage_budget = ss.leakage_budget;
    auto oracle = solve_fbp(grid, op, u0, cfg.model.initial.lambda0, cfg.particles.horizon, so);

    StudyOptions study;
    study.population_list = cfg.converge.population_list;
    study.replicas = cfg.converge.replicas;
    study.T = cfg.particles.horizon;
    study.master_seed = cfg.seed;
    auto table = convergence_study(cfg.model, study, grid, oracle);
    CsvWriter csv(sink.path("study.csv"),
                  {"N", "replicas", "failed", "mean_distance", "se_distance",
                   "mean_level_error", "se_level_error"});
    for (const auto& row : table)
        csv.row({double(row.population), double(row.replicas), double(row.failed_replicas),
                 row.mean_distance, row.se_distance, row.mean_level_error,
                 row.se_level_error});
    csv.close();
    sink.record("study.csv");
}

}  // namespace

json RunManifest::to_json() const {
    json j;
    j["config_hash"] = config_hash;
    j["code_version"] = code_version;
    j["created_utc"] = created_utc;
    j["seed"] = seed;
    j["mode"] = mode;
    j["solver_output_tolerance"] = solver_output_tolerance;
    j["warnings"] = warnings;
    json arts = json::object();
    for (const auto& [name, sum] : artifacts) arts[name] = sum;
    j["artifacts"] = arts;
    return j;
}

RunOutcome run(const ExperimentConfig& config, const std::filesystem::path& out_dir,
               int threads) {
#ifdef _OPENMP
    if (threads > 0) omp_set_num_threads(threads);
#else
    (void)threads;
#endif
    RunOutcome outcome;
    outcome.manifest.config_hash = hex64(config.config_hash());
    outcome.manifest.created_utc = utc_now();
    outcome.manifest.seed = config.seed;
    outcome.manifest.mode = to_string(config.mode);

    ArtifactSink sink(out_dir, outcome.manifest);

    // Model validation gates every mode.
    ValidationReport validation =
        validate_model(config.model, default_validation_window(config), config.check.samples);
    sink.write_json("validation.json", validation_to_json(validation));
    if (!validation.all_passed()) {
        outcome.model_validation_failed = true;
    } else {
        switch (config.mode) {
            case RunMode::simulate: run_simulate(config, sink); break;
            case RunMode::solve: run_solve(config, sink, outcome.manifest.warnings); break;
            case RunMode::solve_fixed:
                run_solve_fixed(config, sink, outcome.manifest.warnings);
                break;
            case RunMode::couple: run_couple(config, sink); break;
            case RunMode::converge:
                run_converge(config, sink, outcome.manifest.warnings);
                break;
            case RunMode::check: {
                json analysis_reports = json::array();
                auto checks = invariant_suite(config, &analysis_reports);
                const auto& required = config.check.required;
                auto is_required = [&](const std::string& name) {
                    return required.empty() ||
                           std::find(required.begin(), required.end(), name) != required.end();
                };
                json report = json::array();
                bool required_ok = true, all = true;
                for (const auto& c : checks) {
                    report.push_back({{"check", c.name},
                                      {"pass", c.pass},
                                      {"required", is_required(c.name)},
                                      {"detail", c.detail}});
                    all = all && c.pass;
                    if (is_required(c.name)) required_ok = required_ok && c.pass;
                }
                json doc;
                doc["model_validation"] = validation_to_json(validation);
                doc["invariants"] = report;
                doc["analysis_reports"] = analysis_reports;
                doc["all_passed"] = all;
                sink.write_json("report.json", doc);
                outcome.required_check_failed = !required_ok;
                break;
            }
        }
    }

    json manifest = outcome.manifest.to_json();
    std::ofstream mf(out_dir / "manifest.json");
    mf << manifest.dump(2) << "\n";
    mf.close();
    outcome.manifest_path = out_dir / "manifest.json";
    return outcome;
}

}  // namespace fbp
