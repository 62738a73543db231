#pragma once

#include <functional>
#include <limits>
#include <stdexcept>
#include <vector>

#include "fbp/boundary.hpp"
#include "fbp/grid.hpp"
#include "fbp/kernel_op.hpp"

namespace fbp {

enum class TimeScheme { euler, heun };

/// Thrown when the leakage budget is exceeded or a mass precondition fails.
struct SolverError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct SolveOptions {
    double dt = 1e-3;
    TimeScheme scheme = TimeScheme::euler;
    std::vector<double> snapshot_times;  // t=0 and t=T are always included
    double leakage_budget = 0.5;         // abort once this much mass has escaped
    std::function<void(std::size_t step, double t, const DensityField& u)> observer;
};

/// One forward step of the growth equation: u + dt*Ku (Euler) or the Heun
/// corrector. No trimming.
DensityField step_free(const DensityField& u, double dt, const KernelOperator& op,
                       TimeScheme scheme = TimeScheme::euler);

/// Zeroes every cell with F <= level; the boundary level belongs to the
/// removed region.
void trim(DensityField& u, double level, const Grid& grid);
DensityField trim_copy(const DensityField& u, double level, const Grid& grid);

/// Result of the frontier search: the smallest realized cell level whose trim
/// brings the mass down to at most the target.
struct BoundaryFromMass {
    double level = -std::numeric_limits<double>::infinity();
    double achieved_mass = 0.0;      // mass after trimming at `level`
    double boundary_group_mass = 0.0;  // mass of the tie group zeroed last
    bool trimmed = false;            // false: mass already <= target, level = -inf
};

BoundaryFromMass boundary_from_mass(const DensityField& u, const Grid& grid, double target_mass);

/// Discretizes u0, zeroes stray mass below lambda0, normalizes to mass one.
DensityField initial_field(const Grid& grid, const InitialCondition& init);

struct FreeSolveResult {
    std::vector<double> times;   // after each step
    std::vector<double> mass;
    std::vector<std::pair<double, DensityField>> snapshots;
    DensityField final_field;
    double accumulated_leak = 0.0;
};

/// Growth without removal; mass approaches e^t times the initial mass, minus
/// window leakage.
FreeSolveResult solve_free(const Grid& grid, const KernelOperator& op, const DensityField& u0,
                           double T, const SolveOptions& options);

struct FixedBoundarySolveResult {
    std::vector<double> times;
    std::vector<double> mass;
    std::vector<std::pair<double, DensityField>> snapshots;
    DensityField final_field;
    double accumulated_leak = 0.0;
};

/// Evolves the growth equation against a frozen piecewise-constant boundary:
/// the field is trimmed at the active level after every substep, so it
/// vanishes below the boundary throughout each interval.
FixedBoundarySolveResult solve_fixed_boundary(const Grid& grid, const KernelOperator& op,
                                              const DensityField& u0, double lambda0,
                                              const PiecewiseBoundary& boundary, double T,
                                              const SolveOptions& options);

struct FbpSolveResult {
    std::vector<double> times;
    std::vector<double> mass;                 // post-trim mass per step
    std::vector<double> pin_deficit;          // target minus achieved mass per step
    std::vector<double> pin_quantum;          // boundary tie-group mass bounding the deficit
    std::vector<double> leaked_cumulative;
    std::vector<double> vanishing_loss_cumulative;  // mass removed below the standing frontier
    BoundaryPath boundary;
    std::vector<std::pair<double, DensityField>> snapshots;
    DensityField final_field;
    double accumulated_leak = 0.0;
};

/// Free boundary solve: each step grows the field, locates the lowest level
/// that pins the mass to one, trims there, and never lets the level decrease.
FbpSolveResult solve_fbp(const Grid& grid, const KernelOperator& op, const DensityField& u0,
                         double lambda0, double T, const SolveOptions& options);

}  // namespace fbp
