#include "fbp/simulate.hpp"

#include <algorithm>
#include <cmath>

namespace fbp {

namespace {

// Applies a birth at x from `parent` to the system: the least of the N living
// particles and the newborn is removed; the removed particle's label goes to
// the newborn. Fills everything except the event time.
Event apply_branching(ParticleSystem& sys, const ModelSpec& spec, std::uint32_t parent,
                      Point birth) {
    Event e;
    e.parent_label = parent;
    const double f = spec.fitness(birth);
    // Newborn tie-break label N+1: an existing particle at identical
    // coordinates wins the removal.
    int cmp = sys.compare_with_min(f, birth, std::uint32_t(sys.count() + 1));
    if (cmp < 0) {
        e.removed_label = 0;  // newborn removed immediately
    } else {
        auto [min_label, min_f] = sys.min_fitness();
        (void)min_f;
        sys.replace(min_label, birth, f);
        e.removed_label = min_label;
    }
    e.ell_after = sys.min_fitness().second;
    e.birth = std::move(birth);
    return e;
}

void take_snapshot(std::vector<Snapshot>& out, double t, std::size_t dimension,
                   const std::vector<double>& coords) {
    out.push_back(Snapshot{t, dimension, coords});
}

}  // namespace

ParticleSystem init_system(const ModelSpec& spec, std::size_t count, RandomStream& rng) {
    return ParticleSystem::init(spec, count, rng);
}

Event step(ParticleSystem& sys, const ModelSpec& spec, RandomStream& rng) {
    const double holding = rng.exponential(double(sys.count()));
    const auto parent = std::uint32_t(rng.uniform_index(sys.count())) + 1;
    Point birth = spec.kernel.sample(sys.position(parent), rng);
    sys.set_time(sys.time() + holding);
    Event e = apply_branching(sys, spec, parent, std::move(birth));
    e.time = sys.time();
    return e;
}

Trajectory simulate(const ModelSpec& spec, std::size_t count, double T, RandomStream& rng,
                    const SimulateOptions& options) {
    if (!(T >= 0.0)) throw std::invalid_argument("simulate: T must be nonnegative");
    ParticleSystem sys = init_system(spec, count, rng);

    Trajectory traj;
    traj.ell_path.start_time = 0.0;
    traj.ell_path.start_level = sys.min_fitness().second;
    traj.ell_path.end_time = T;

    std::vector<double> pending = options.snapshot_times;
    std::sort(pending.begin(), pending.end());
    std::size_t next_snap = 0;
    take_snapshot(traj.snapshots, 0.0, sys.dimension(), sys.coordinates());

    double t = 0.0;
    while (true) {
        const double holding = rng.exponential(double(count));
        if (t + holding > T) break;
        t += holding;
        while (next_snap < pending.size() && pending[next_snap] < t) {
            if (pending[next_snap] > 0.0 && pending[next_snap] < T)
                take_snapshot(traj.snapshots, pending[next_snap], sys.dimension(),
                              sys.coordinates());
            ++next_snap;
        }
        const auto parent = std::uint32_t(rng.uniform_index(count)) + 1;
        Point birth = spec.kernel.sample(sys.position(parent), rng);
        sys.set_time(t);
        Event e = apply_branching(sys, spec, parent, std::move(birth));
        e.time = t;
        traj.ell_path.append(t, e.ell_after);
        traj.events.push_back(std::move(e));
        if (traj.events.size() > options.event_cap)
            throw SimulationError("simulate: event cap exceeded");
    }
    sys.set_time(T);
    while (next_snap < pending.size()) {
        if (pending[next_snap] > 0.0 && pending[next_snap] < T)
            take_snapshot(traj.snapshots, pending[next_snap], sys.dimension(),
                          sys.coordinates());
        ++next_snap;
    }
    traj.ell_path.end_time = T;
    take_snapshot(traj.snapshots, T, sys.dimension(), sys.coordinates());
    return traj;
}

// --- master tape -------------------------------------------------------------

std::span<const double> MasterTape::position(std::uint32_t id) const {
    return {coords.data() + std::size_t(id) * dimension, dimension};
}

MasterTape generate_tape(const ModelSpec& spec, std::size_t count, double T, RandomStream& rng,
                         std::size_t population_cap) {
    if (count == 0) throw std::invalid_argument("generate_tape: count must be >= 1");
    MasterTape tape;
    tape.dimension = spec.dimension;
    tape.initial_count = count;
    tape.horizon = T;
    tape.coords.reserve(count * spec.dimension * 3);
    for (std::size_t i = 0; i < count; ++i) {
        Point x = spec.initial.sample(rng);
        tape.fitness.push_back(spec.fitness(x));
        tape.coords.insert(tape.coords.end(), x.begin(), x.end());
    }
    double t = 0.0;
    std::size_t population = count;
    while (true) {
        const double holding = rng.exponential(double(population));
        if (t + holding > T) break;
        t += holding;
        const auto parent = std::uint32_t(rng.uniform_index(population));
        Point x = spec.kernel.sample(tape.position(parent), rng);
        tape.fitness.push_back(spec.fitness(x));
        tape.coords.insert(tape.coords.end(), x.begin(), x.end());
        tape.events.push_back(TapeEvent{t, parent, std::move(x)});
        ++population;
        if (population > population_cap)
            throw SimulationError("generate_tape: population cap exceeded");
    }
    return tape;
}

FreeTrajectory simulate_free(const ModelSpec& spec, std::size_t count, double T,
                             RandomStream& rng, std::size_t population_cap) {
    MasterTape tape = generate_tape(spec, count, T, rng, population_cap);
    FreeTrajectory traj;
    traj.initial_count = count;
    traj.final_count = tape.population();
    traj.event_times.reserve(tape.events.size());
    for (const auto& e : tape.events) traj.event_times.push_back(e.time);
    traj.snapshots.push_back(Snapshot{
        0.0, tape.dimension,
        {tape.coords.begin(), tape.coords.begin() + long(count * tape.dimension)}});
    traj.snapshots.push_back(Snapshot{T, tape.dimension, tape.coords});
    return traj;
}

// --- coupled replay ----------------------------------------------------------

namespace {

// Total order (fitness, coordinates, id) over master particles; positions are
// immutable, so the comparator can safely read through the tape.
struct TapeOrder {
    const MasterTape* tape;
    bool operator()(std::uint32_t a, std::uint32_t b) const {
        const double fa = tape->fitness[a], fb = tape->fitness[b];
        if (fa != fb) return fa < fb;
        int c = lex_compare(tape->position(a), tape->position(b));
        if (c != 0) return c < 0;
        return a < b;
    }
};

// Selection dynamics driven by the tape: enacts events whose parent is alive.
struct SelectionReplay {
    const MasterTape* tape;
    std::set<std::uint32_t, TapeOrder> alive;
    std::vector<std::uint8_t> member;

    explicit SelectionReplay(const MasterTape& t)
        : tape(&t), alive(TapeOrder{&t}), member(t.population(), 0) {
        for (std::uint32_t id = 0; id < t.initial_count; ++id) {
            alive.insert(id);
            member[id] = 1;
        }
    }

    double ell() const { return tape->fitness[*alive.begin()]; }

    // Returns the event (master ids shifted by one so 0 keeps its "newborn
    // removed" meaning); nullopt when the parent is not alive here.
    std::optional<Event> process(const TapeEvent& ev, std::uint32_t child_id) {
        if (!member[ev.parent_id]) return std::nullopt;
        Event e;
        e.time = ev.time;
        e.parent_label = ev.parent_id + 1;
        e.birth = ev.birth;
        const std::uint32_t least = *alive.begin();
        if (TapeOrder{tape}(child_id, least)) {
            e.removed_label = 0;  // newborn is the least fit: removed immediately
        } else {
            alive.erase(alive.begin());
            member[least] = 0;
            alive.insert(child_id);
            member[child_id] = 1;
            e.removed_label = least + 1;
        }
        e.ell_after = ell();
        return e;
    }
};

// Branching with a frozen piecewise-constant wall: newborns below the wall
// are rejected, and every wall increase trims the population.
struct WallReplay {
    const MasterTape* tape;
    const PiecewiseBoundary* wall;
    std::vector<std::uint8_t> member;
    std::vector<std::uint32_t> ids;

    WallReplay(const MasterTape& t, const PiecewiseBoundary& w)
        : tape(&t), wall(&w), member(t.population(), 0) {
        const double a0 = w.value_at(0.0);
        for (std::uint32_t id = 0; id < t.initial_count; ++id)
            if (t.fitness[id] >= a0) {
                member[id] = 1;
                ids.push_back(id);
            }
    }

    void process(const TapeEvent& ev, std::uint32_t child_id) {
        if (!member[ev.parent_id]) return;
        if (tape->fitness[child_id] >= wall->value_at(ev.time)) {
            member[child_id] = 1;
            ids.push_back(child_id);
        }
    }

    void trim(double level) {
        std::size_t kept = 0;
        for (std::uint32_t id : ids) {
            if (tape->fitness[id] < level)
                member[id] = 0;
            else
                ids[kept++] = id;
        }
        ids.resize(kept);
    }

    std::size_t population() const { return ids.size(); }
};

}  // namespace

CoupledResult coupled_simulate(const ModelSpec& spec, std::size_t count, double T,
                               RandomStream& rng, const CoupledOptions& options) {
    MasterTape tape = generate_tape(spec, count, T, rng, options.population_cap);

    CoupledResult result;
    result.tape_population = tape.population();

    // Envelopes: caller-supplied, or generated from this tape's frontier path.
    if (options.lower_envelope && options.upper_envelope) {
        result.lower_envelope = *options.lower_envelope;
        result.upper_envelope = *options.upper_envelope;
    } else if (!options.lower_envelope && !options.upper_envelope) {
        SelectionReplay probe(tape);
        BoundaryPath ell;
        ell.start_level = probe.ell();
        ell.end_time = T;
        for (std::size_t i = 0; i < tape.events.size(); ++i) {
            auto e = probe.process(tape.events[i], std::uint32_t(tape.initial_count + i));
            if (e) ell.append(e->time, e->ell_after);
        }
        ell.end_time = T;
        auto [lower, upper] = envelope_paths(ell, options.delta, options.epsilon, T);
        result.lower_envelope = std::move(lower);
        result.upper_envelope = std::move(upper);
    } else {
        throw std::invalid_argument("coupled_simulate: supply both envelopes or neither");
    }
    if (!result.lower_envelope.valid() || !result.upper_envelope.valid())
        throw std::invalid_argument("coupled_simulate: invalid envelope paths");
    if (result.lower_envelope.delta != result.upper_envelope.delta ||
        result.lower_envelope.intervals() != result.upper_envelope.intervals())
        throw std::invalid_argument("coupled_simulate: envelopes on different meshes");

    SelectionReplay mid(tape);
    WallReplay tight(tape, result.upper_envelope);  // wall at m, dominated by the selection
    WallReplay loose(tape, result.lower_envelope);  // wall at k, dominates the selection

    Trajectory& traj = result.selection;
    traj.ell_path.start_level = mid.ell();
    traj.ell_path.end_time = T;
    {
        Snapshot s0;
        s0.time = 0.0;
        s0.dimension = tape.dimension;
        s0.coords.assign(tape.coords.begin(),
                         tape.coords.begin() + long(tape.initial_count * tape.dimension));
        traj.snapshots.push_back(std::move(s0));
    }

    DominationAudit& audit = result.audit;
    auto check = [&](double t) {
        ++audit.events_checked;
        const double ell = mid.ell();
        const bool sandwiched = result.lower_envelope.value_at(t) < ell &&
                                ell < result.upper_envelope.value_at(t);
        if (!sandwiched && !audit.envelope_violation_time)
            audit.envelope_violation_time = t;
        std::size_t bad = 0;
        for (std::uint32_t id : tight.ids)
            if (!mid.member[id]) {
                ++audit.tight_violations;
                ++bad;
            }
        for (std::uint32_t id : mid.alive)
            if (!loose.member[id]) {
                ++audit.loose_violations;
                ++bad;
            }
        if (bad > 0) {
            if (!audit.first_violation_time) audit.first_violation_time = t;
            if (!audit.envelope_violation_time) audit.violations_while_sandwiched += bad;
        }
    };

    // Interleave wall jumps (at multiples of delta) with tape events.
    const double delta = result.lower_envelope.delta;
    const std::size_t intervals = result.lower_envelope.intervals();
    std::size_t next_jump = 1;
    auto apply_jumps_until = [&](double t) {
        while (next_jump < intervals && double(next_jump) * delta <= t) {
            const double tj = double(next_jump) * delta;
            tight.trim(result.upper_envelope.levels[next_jump]);
            loose.trim(result.lower_envelope.levels[next_jump]);
            ++next_jump;
            check(tj);
        }
    };

    check(0.0);
    for (std::size_t i = 0; i < tape.events.size(); ++i) {
        const TapeEvent& ev = tape.events[i];
        const auto child_id = std::uint32_t(tape.initial_count + i);
        apply_jumps_until(ev.time);
        auto e = mid.process(ev, child_id);
        tight.process(ev, child_id);
        loose.process(ev, child_id);
        if (e) {
            traj.ell_path.append(e->time, e->ell_after);
            traj.events.push_back(std::move(*e));
        }
        result.event_times.push_back(ev.time);
        result.tight_population.push_back(tight.population());
        result.loose_population.push_back(loose.population());
        check(ev.time);
    }
    apply_jumps_until(T);

    Snapshot sT;
    sT.time = T;
    sT.dimension = tape.dimension;
    for (std::uint32_t id : mid.alive) {
        auto p = tape.position(id);
        sT.coords.insert(sT.coords.end(), p.begin(), p.end());
    }
    traj.snapshots.push_back(std::move(sT));
    traj.ell_path.end_time = T;
    return result;
}

}  // namespace fbp
