#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <vector>

#include "fbp/boundary.hpp"
#include "fbp/model.hpp"
#include "fbp/particle_system.hpp"
#include "fbp/rng.hpp"

namespace fbp {

struct SimulationError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// One branching-selection event. removed_label == 0 means the newborn was
/// the least fit and was removed immediately (configuration unchanged).
struct Event {
    double time = 0.0;
    std::uint32_t parent_label = 0;
    Point birth;
    std::uint32_t removed_label = 0;
    double ell_after = 0.0;
};

struct Snapshot {
    double time = 0.0;
    std::size_t dimension = 1;
    std::vector<double> coords;  // count * dimension
};

struct Trajectory {
    std::vector<Event> events;  // J = events.size() increments once per event
    BoundaryPath ell_path;
    std::vector<Snapshot> snapshots;
    std::size_t removal_count() const { return events.size(); }
};

struct SimulateOptions {
    std::vector<double> snapshot_times;  // t=0 and t=T always included
    std::size_t event_cap = 100'000'000;
};

/// Advances the system by one event: Exp(N) holding time, uniform parent,
/// kernel birth, removal of the least-(F, tie) candidate with label transfer.
Event step(ParticleSystem& sys, const ModelSpec& spec, RandomStream& rng);

ParticleSystem init_system(const ModelSpec& spec, std::size_t count, RandomStream& rng);

Trajectory simulate(const ModelSpec& spec, std::size_t count, double T, RandomStream& rng,
                    const SimulateOptions& options = {});

// ---------------------------------------------------------------------------
// Shared stochastic primitives: the no-removal (free growth) system doubles
// as the master event tape. Every particle ever born carries its own clock
// and its birth draw; subordinate systems enact exactly the events whose
// parent is alive in them, which realizes the coupling.
// ---------------------------------------------------------------------------

struct TapeEvent {
    double time = 0.0;
    std::uint32_t parent_id = 0;  // master particle id
    Point birth;                  // location of child id = initial_count + index
};

struct MasterTape {
    std::size_t dimension = 1;
    std::size_t initial_count = 0;
    std::vector<double> fitness;  // per id, initial particles then children
    std::vector<double> coords;   // per id, flattened
    std::vector<TapeEvent> events;
    double horizon = 0.0;

    std::size_t population() const { return initial_count + events.size(); }
    std::span<const double> position(std::uint32_t id) const;
};

MasterTape generate_tape(const ModelSpec& spec, std::size_t count, double T, RandomStream& rng,
                         std::size_t population_cap = 100'000'000);

struct FreeTrajectory {
    std::vector<Snapshot> snapshots;  // population snapshots at t=0 and t=T
    std::size_t initial_count = 0;
    std::size_t final_count = 0;
    std::vector<double> event_times;
};

/// Pure growth (no selection): population has mean N*e^T at time T.
FreeTrajectory simulate_free(const ModelSpec& spec, std::size_t count, double T,
                             RandomStream& rng, std::size_t population_cap = 100'000'000);

// ---------------------------------------------------------------------------
// Coupled runs: the selection system plus lower/upper wall systems driven by
// the same tape, with a domination audit at every event time.
// ---------------------------------------------------------------------------

struct CoupledOptions {
    // If not provided, envelopes are generated from the selection run's
    // frontier path with these mesh parameters.
    std::optional<PiecewiseBoundary> lower_envelope;  // k, below the frontier
    std::optional<PiecewiseBoundary> upper_envelope;  // m, above the frontier
    double delta = 0.1;
    double epsilon = 0.05;
    std::size_t population_cap = 100'000'000;
};

/// The wall system at the upper envelope m must be contained in the selection
/// system, which must be contained in the wall system at the lower envelope
/// k, as long as the sandwich k < ell < m holds.
struct DominationAudit {
    std::size_t events_checked = 0;
    std::size_t tight_violations = 0;  // wall-at-m particle not alive in the selection
    std::size_t loose_violations = 0;  // selection particle not alive in the wall-at-k system
    std::size_t violations_while_sandwiched = 0;
    std::optional<double> first_violation_time;
    std::optional<double> envelope_violation_time;  // first failure of k < ell < m
};

struct CoupledResult {
    Trajectory selection;             // the N-particle system on the tape
    PiecewiseBoundary lower_envelope;  // k
    PiecewiseBoundary upper_envelope;  // m
    std::vector<double> event_times;
    std::vector<std::size_t> tight_population;  // wall at m
    std::vector<std::size_t> loose_population;  // wall at k
    DominationAudit audit;
    std::size_t tape_population = 0;
};

CoupledResult coupled_simulate(const ModelSpec& spec, std::size_t count, double T,
                               RandomStream& rng, const CoupledOptions& options = {});

}  // namespace fbp
