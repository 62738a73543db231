#include "fbp/solver.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace fbp {

namespace {

struct StepWorkspace {
    DensityField k1, k2, stage;
    std::vector<double> scratch;
};

// Advances u in place by one step; returns the mass leaked during the step
// as accounted by the retention table (Euler-style estimate for Heun too).
double advance(DensityField& u, double dt, const KernelOperator& op, TimeScheme scheme,
               const Grid& grid, StepWorkspace& ws) {
    double leak = dt * op.leaked_mass(grid, u);
    op.apply(u, ws.k1, &ws.scratch);
    if (scheme == TimeScheme::euler) {
        for (std::size_t c = 0; c < u.values.size(); ++c) u.values[c] += dt * ws.k1.values[c];
    } else {
        ws.stage.values.resize(u.values.size());
        for (std::size_t c = 0; c < u.values.size(); ++c)
            ws.stage.values[c] = u.values[c] + dt * ws.k1.values[c];
        op.apply(ws.stage, ws.k2, &ws.scratch);
        for (std::size_t c = 0; c < u.values.size(); ++c)
            u.values[c] += 0.5 * dt * (ws.k1.values[c] + ws.k2.values[c]);
    }
    u.time += dt;
    return leak;
}

std::size_t step_count(double T, double dt) {
    if (!(dt > 0.0)) throw std::invalid_argument("solver: dt must be positive");
    if (!(T >= 0.0)) throw std::invalid_argument("solver: T must be nonnegative");
    auto n = std::size_t(std::round(T / dt));
    if (std::abs(double(n) * dt - T) > 1e-9 * std::max(1.0, T))
        throw std::invalid_argument("solver: T must be a multiple of dt");
    return n;
}

// Snapshot bookkeeping: t=0 and t=T always, user times rounded to steps.
class SnapshotPlan {
public:
    SnapshotPlan(const std::vector<double>& requested, double T, double dt) {
        const auto last = std::size_t(std::round(T / dt));
        for (double t : requested) {
            auto n = std::size_t(std::llround(t / dt));
            if (n >= 1 && n < last) steps_.push_back(n);
        }
        std::sort(steps_.begin(), steps_.end());
        steps_.erase(std::unique(steps_.begin(), steps_.end()), steps_.end());
    }

    bool wants(std::size_t step) const {
        return std::binary_search(steps_.begin(), steps_.end(), step);
    }

private:
    std::vector<std::size_t> steps_;
};

}  // namespace

DensityField step_free(const DensityField& u, double dt, const KernelOperator& op,
                       TimeScheme scheme) {
    if (!(dt > 0.0)) throw std::invalid_argument("step_free: dt must be positive");
    DensityField out = u;
    StepWorkspace ws;
    op.apply(u, ws.k1, &ws.scratch);
    if (scheme == TimeScheme::euler) {
        for (std::size_t c = 0; c < out.values.size(); ++c)
            out.values[c] += dt * ws.k1.values[c];
    } else {
        ws.stage.values.resize(u.values.size());
        for (std::size_t c = 0; c < u.values.size(); ++c)
            ws.stage.values[c] = u.values[c] + dt * ws.k1.values[c];
        op.apply(ws.stage, ws.k2, &ws.scratch);
        for (std::size_t c = 0; c < out.values.size(); ++c)
            out.values[c] += 0.5 * dt * (ws.k1.values[c] + ws.k2.values[c]);
    }
    out.time = u.time + dt;
    return out;
}

void trim(DensityField& u, double level, const Grid& grid) {
    if (u.values.size() != grid.cell_count())
        throw std::invalid_argument("trim: grid mismatch");
    for (std::size_t c = 0; c < u.values.size(); ++c)
        if (grid.fitness_values[c] <= level) u.values[c] = 0.0;
}

DensityField trim_copy(const DensityField& u, double level, const Grid& grid) {
    DensityField out = u;
    trim(out, level, grid);
    return out;
}

BoundaryFromMass boundary_from_mass(const DensityField& u, const Grid& grid,
                                    double target_mass) {
    if (u.values.size() != grid.cell_count())
        throw std::invalid_argument("boundary_from_mass: grid mismatch");
    if (target_mass < 0.0)
        throw std::invalid_argument("boundary_from_mass: negative target");
    const double total = field_mass(grid, u);
    if (total < target_mass - 1e-12 * std::max(1.0, target_mass))
        throw SolverError("boundary_from_mass: field mass " + std::to_string(total) +
                          " below target " + std::to_string(target_mass));
    BoundaryFromMass result;
    if (total <= target_mass) {
        result.achieved_mass = total;
        return result;  // no trim needed
    }
    // Walk tie groups of equal fitness in ascending order; zeroing is always
    // applied to whole groups because trim removes F <= level.
    double removed = 0.0;
    const auto& order = grid.fitness_order;
    std::size_t i = 0;
    while (i < order.size()) {
        const double level = grid.fitness_values[order[i]];
        double group = 0.0;
        std::size_t j = i;
        while (j < order.size() && grid.fitness_values[order[j]] == level) {
            group += u.values[order[j]] * grid.cell_volume;
            ++j;
        }
        if (total - removed - group <= target_mass) {
            result.level = level;
            result.achieved_mass = total - removed - group;
            result.boundary_group_mass = group;
            result.trimmed = true;
            return result;
        }
        removed += group;
        i = j;
    }
    // Unreachable: zeroing everything leaves 0 <= target_mass.
    throw std::logic_error("boundary_from_mass: search exhausted");
}

DensityField initial_field(const Grid& grid, const InitialCondition& init) {
    DensityField u = discretize(grid, init);
    trim(u, std::nextafter(init.lambda0, -std::numeric_limits<double>::infinity()), grid);
    double m = field_mass(grid, u);
    if (!(m > 0.0)) throw SolverError("initial_field: no mass on the window");
    for (double& v : u.values) v /= m;
    return u;
}

FreeSolveResult solve_free(const Grid& grid, const KernelOperator& op, const DensityField& u0,
                           double T, const SolveOptions& options) {
    const std::size_t steps = step_count(T, options.dt);
    FreeSolveResult r;
    DensityField u = u0;
    u.time = 0.0;
    SnapshotPlan plan(options.snapshot_times, T, options.dt);
    r.snapshots.emplace_back(0.0, u);
    StepWorkspace ws;
    for (std::size_t n = 1; n <= steps; ++n) {
        r.accumulated_leak += advance(u, options.dt, op, options.scheme, grid, ws);
        const double t = double(n) * options.dt;
        u.time = t;
        r.times.push_back(t);
        r.mass.push_back(field_mass(grid, u));
        if (r.accumulated_leak > options.leakage_budget)
            throw SolverError("solve_free: leakage budget exceeded; enlarge the window");
        if (plan.wants(n)) r.snapshots.emplace_back(t, u);
        if (options.observer) options.observer(n, t, u);
    }
    r.snapshots.emplace_back(T, u);
    r.final_field = std::move(u);
    return r;
}

FixedBoundarySolveResult solve_fixed_boundary(const Grid& grid, const KernelOperator& op,
                                              const DensityField& u0, double lambda0,
                                              const PiecewiseBoundary& boundary, double T,
                                              const SolveOptions& options) {
    if (!boundary.valid())
        throw std::invalid_argument("solve_fixed_boundary: invalid boundary path");
    double ratio = boundary.delta / options.dt;
    if (std::abs(ratio - std::round(ratio)) > 1e-9)
        throw std::invalid_argument("solve_fixed_boundary: delta must be a multiple of dt");
    if (boundary.horizon() < T - 1e-9)
        throw std::invalid_argument("solve_fixed_boundary: boundary horizon shorter than T");

    const std::size_t steps = step_count(T, options.dt);
    FixedBoundarySolveResult r;
    DensityField u = u0;
    u.time = 0.0;
    trim(u, boundary.value_at(0.0), grid);
    (void)lambda0;  // the initial trim at a_0 subsumes the lambda0 support condition
    SnapshotPlan plan(options.snapshot_times, T, options.dt);
    r.snapshots.emplace_back(0.0, u);
    StepWorkspace ws;
    for (std::size_t n = 1; n <= steps; ++n) {
        r.accumulated_leak += advance(u, options.dt, op, options.scheme, grid, ws);
        const double t = double(n) * options.dt;
        u.time = t;
        // Trimming at the cadlag value applies the in-interval wall after
        // every substep and the new wall exactly at interval boundaries.
        trim(u, boundary.value_at(t), grid);
        r.times.push_back(t);
        r.mass.push_back(field_mass(grid, u));
        if (r.accumulated_leak > options.leakage_budget)
            throw SolverError("solve_fixed_boundary: leakage budget exceeded");
        if (plan.wants(n)) r.snapshots.emplace_back(t, u);
        if (options.observer) options.observer(n, t, u);
    }
    r.snapshots.emplace_back(T, u);
    r.final_field = std::move(u);
    return r;
}

FbpSolveResult solve_fbp(const Grid& grid, const KernelOperator& op, const DensityField& u0,
                         double lambda0, double T, const SolveOptions& options) {
    const double initial_mass = field_mass(grid, u0);
    if (std::abs(initial_mass - 1.0) > 1e-6)
        throw SolverError("solve_fbp: initial mass must be 1 (got " +
                          std::to_string(initial_mass) + ")");
    const std::size_t steps = step_count(T, options.dt);
    FbpSolveResult r;
    DensityField u = u0;
    u.time = 0.0;
    r.boundary.start_time = 0.0;
    r.boundary.start_level = lambda0;
    r.boundary.end_time = 0.0;
    SnapshotPlan plan(options.snapshot_times, T, options.dt);
    r.snapshots.emplace_back(0.0, u);
    StepWorkspace ws;
    double level = lambda0;
    double quantum = 0.0;
    double vanishing_loss = 0.0;
    for (std::size_t n = 1; n <= steps; ++n) {
        r.accumulated_leak += advance(u, options.dt, op, options.scheme, grid, ws);
        const double t = double(n) * options.dt;
        u.time = t;

        // Vanishing condition below the running frontier. Kernels that can
        // move mass downward lose it here; the loss is tracked separately.
        const double before = field_mass(grid, u);
        trim(u, level, grid);
        double mass = field_mass(grid, u);
        vanishing_loss += before - mass;

        if (mass > 1.0) {
            // Pin the mass to one at the lowest realized level. All mass sits
            // above the running frontier, so the found level never decreases.
            BoundaryFromMass pin = boundary_from_mass(u, grid, 1.0);
            if (pin.trimmed) {
                level = std::max(level, pin.level);
                quantum = pin.boundary_group_mass;
                trim(u, level, grid);
                mass = field_mass(grid, u);
            }
        }
        // Otherwise the standing deficit only shrinks as the mass regrows.

        r.times.push_back(t);
        r.mass.push_back(mass);
        r.pin_deficit.push_back(1.0 - mass);
        r.pin_quantum.push_back(quantum);
        r.leaked_cumulative.push_back(r.accumulated_leak);
        r.vanishing_loss_cumulative.push_back(vanishing_loss);
        r.boundary.append(t, level);
        if (r.accumulated_leak > options.leakage_budget)
            throw SolverError("solve_fbp: leakage budget exceeded; enlarge the window");
        if (plan.wants(n)) r.snapshots.emplace_back(t, u);
        if (options.observer) options.observer(n, t, u);
    }
    r.boundary.end_time = T;
    r.snapshots.emplace_back(T, u);
    r.final_field = std::move(u);
    return r;
}

}  // namespace fbp
