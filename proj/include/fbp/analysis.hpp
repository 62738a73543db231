#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "fbp/boundary.hpp"
#include "fbp/grid.hpp"
#include "fbp/kernel_op.hpp"
#include "fbp/model.hpp"
#include "fbp/particle_system.hpp"
#include "fbp/solver.hpp"

namespace fbp {

struct DistanceReport {
    std::string metric;
    double value = 0.0;
    double bound = 0.0;
    bool pass = true;
    bool skipped = false;
    std::string context;
};

/// L1 distance between grid densities: sum |u - v| * cell volume.
double l1_distance(const Grid& grid, const DensityField& u, const DensityField& v);

/// Verifies that the full L1 distance between two equal-mass fields, each
/// vanishing below its own frontier, is controlled by twice the distance
/// above the larger frontier. Slack covers the mass mismatch.
DistanceReport truncated_l1_check(const DensityField& u, const DensityField& v, double ell,
                                  double m, const Grid& grid, double mass_tolerance = 0.05);

/// Atoms at cell centers weighted by cell mass; optionally normalized to a
/// probability measure.
DiscreteMeasure grid_measure(const Grid& grid, const DensityField& u, bool normalize = false);

/// Distance between probability measures metrizing weak convergence: in d=1
/// the L1 distance between CDFs, in higher dimension the maximum discrepancy
/// over a fixed dictionary of Lip-1, bound-1 test functions.
double measure_distance(const DiscreteMeasure& mu, const DiscreteMeasure& nu);
DistanceReport measure_distance_report(const DiscreteMeasure& mu, const DiscreteMeasure& nu);

/// Mass of the shell {lo < F < hi} (or {lo < F <= hi}) under a grid density.
double shell_mass(const DensityField& u, const Grid& grid, double lo, double hi,
                  bool closed_right = false);

/// Tabulation of U(kappa) = sup_b mass{b < F < b + kappa}.
struct ShellFunction {
    std::vector<double> kappas;
    std::vector<double> values;
};

ShellFunction shell_function(const DensityField& z, const Grid& grid,
                             const std::vector<double>& kappas,
                             const std::vector<double>& b_grid);

/// max over intervals of the z-mass strictly between the two boundary levels
/// (right-closed, matching the trim convention).
double eta_between(const DensityField& z, const Grid& grid, const PiecewiseBoundary& a,
                   const PiecewiseBoundary& b);

struct ContinuityCheckContext {
    const Grid* grid = nullptr;
    const KernelOperator* op = nullptr;
    DensityField u0;       // normalized initial field
    double lambda0 = 0.0;
    double T = 1.0;
    SolveOptions solve;
    double c_tilde = 1.0;  // dominating constant of the kernel
    const DensityField* z_final = nullptr;  // free-growth density at T; computed if null
};

/// Runs the two fixed-boundary solves and checks
///   sup_t ||u^(k) - u^(m)||_1  <=  2 eta(k,m) e^{c~ T} * (1 + margin).
DistanceReport continuity_estimate_check(const PiecewiseBoundary& k, const PiecewiseBoundary& m,
                                         const ContinuityCheckContext& ctx,
                                         double margin = 0.1);

// ---------------------------------------------------------------------------
// Hydrodynamic convergence study
// ---------------------------------------------------------------------------

struct StudyRow {
    std::size_t population = 0;
    std::size_t replicas = 0;        // successful replicas entering the means
    std::size_t failed_replicas = 0;
    std::string failure_reason;      // first recorded failure, if any
    double mean_distance = 0.0;
    double se_distance = 0.0;
    double mean_level_error = 0.0;
    double se_level_error = 0.0;
};

struct StudyOptions {
    std::vector<std::size_t> population_list;
    std::size_t replicas = 20;
    double T = 1.0;
    std::uint64_t master_seed = 1;
};

/// Mean distance between the empirical measure at T and the solver density,
/// and mean frontier error, per population size. Cells run in parallel with
/// independent streams keyed by (seed, cell index).
std::vector<StudyRow> convergence_study(const ModelSpec& spec, const StudyOptions& options,
                                        const Grid& grid, const FbpSolveResult& oracle);

}  // namespace fbp
