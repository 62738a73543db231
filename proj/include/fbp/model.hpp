#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fbp/geometry.hpp"
#include "fbp/rng.hpp"

namespace fbp {

// ---------------------------------------------------------------------------
// Fitness function F : R^d -> R
// ---------------------------------------------------------------------------

enum class FitnessType { linear, coordinate, custom };

struct FitnessFunction {
    FitnessType type = FitnessType::coordinate;
    std::vector<double> lambda;  // linear: F(x) = lambda . x
    std::size_t axis = 0;        // coordinate: F(x) = x[axis]
    std::function<double(std::span<const double>)> custom_eval;

    static FitnessFunction linear(std::vector<double> lambda);
    static FitnessFunction coordinate(std::size_t axis);
    static FitnessFunction custom(std::function<double(std::span<const double>)> eval);

    /// Evaluates F(x). Rejects non-finite inputs and non-finite results.
    double operator()(std::span<const double> x) const;
};

/// Evaluates F at x; identical to FitnessFunction::operator().
double fitness(const FitnessFunction& f, std::span<const double> x);

// ---------------------------------------------------------------------------
// Branching kernel rho(y, .) with dominating profile c~ * rho~(x - y)
// ---------------------------------------------------------------------------

enum class KernelType {
    gaussian,      // isotropic displacement N(0, sigma^2 I)
    uniform_cube,  // displacement uniform on [0,1]^d; d=1 is the one-sided [y, y+1] kernel
    custom
};

struct BranchingKernel {
    KernelType type = KernelType::uniform_cube;
    std::size_t dimension = 1;
    double sigma = 1.0;                 // gaussian only
    double dominating_constant = 1.0;   // c~ >= 1

    std::function<double(std::span<const double>, std::span<const double>)> custom_density;
    std::function<Point(std::span<const double>, RandomStream&)> custom_sampler;
    std::function<double(std::span<const double>)> custom_profile;  // rho~(v)

    static BranchingKernel gaussian_isotropic(std::size_t dimension, double sigma);
    static BranchingKernel uniform_displacement(std::size_t dimension);

    double density(std::span<const double> y, std::span<const double> x) const;
    Point sample(std::span<const double> y, RandomStream& rng) const;
    /// Dominating profile rho~ evaluated at a displacement v = x - y.
    double profile(std::span<const double> v) const;

    /// Built-in kernels factor across axes; the operator builder exploits this.
    bool separable() const { return type != KernelType::custom; }
    /// CDF of the per-axis displacement for separable kernels.
    double axis_cdf(double t) const;
    /// Box containing the support (or effective support) of rho(y, .).
    Box support_box(std::span<const double> y) const;
};

double kernel_density(const BranchingKernel& k, std::span<const double> y,
                      std::span<const double> x);
Point kernel_sample(const BranchingKernel& k, std::span<const double> y, RandomStream& rng);

// ---------------------------------------------------------------------------
// Initial condition (u0, lambda0)
// ---------------------------------------------------------------------------

enum class InitialType { uniform_box, tabulated };

struct InitialCondition {
    InitialType type = InitialType::uniform_box;
    double lambda0 = 0.0;

    Box support;  // uniform_box: u0 = 1/|support| on support

    // tabulated: piecewise-constant density on a uniform grid over tab_window
    Box tab_window;
    std::vector<std::size_t> tab_resolution;
    std::vector<double> tab_values;

    static InitialCondition uniform(Box support, double lambda0);
    static InitialCondition tabulated(Box window, std::vector<std::size_t> resolution,
                                      std::vector<double> values, double lambda0);

    double density(std::span<const double> x) const;
    Point sample(RandomStream& rng) const;

private:
    std::vector<double> tab_cdf_;  // cumulative cell masses for sampling
    void build_tab_cdf();
};

// ---------------------------------------------------------------------------
// Tie-break order: lexicographic by coordinates, then by label
// ---------------------------------------------------------------------------

struct TieOrder {
    /// Strict total order on (point, label); -1, 0, +1. Zero only for
    /// identical coordinates and equal labels.
    int compare(std::span<const double> a, std::uint32_t label_a,
                std::span<const double> b, std::uint32_t label_b) const;
};

int tie_compare(const TieOrder& order, std::span<const double> a, std::uint32_t label_a,
                std::span<const double> b, std::uint32_t label_b);

// ---------------------------------------------------------------------------
// Model spec and validation
// ---------------------------------------------------------------------------

struct ModelSpec {
    std::size_t dimension = 1;
    FitnessFunction fitness;
    BranchingKernel kernel;
    InitialCondition initial;
    TieOrder order;
};

struct ValidationClause {
    std::string name;
    bool pass = false;
    bool informational = false;  // recorded, never gates
    double slack = 0.0;
    std::string detail;
};

struct ValidationReport {
    std::vector<ValidationClause> clauses;
    bool all_passed() const;
    const ValidationClause* find(const std::string& name) const;
};

struct ValidationOptions {
    std::vector<double> level_ladder;  // empty: derived from u0 support
    std::vector<double> shell_widths;  // empty: derived from u0 support
    double quadrature_tol = 1e-6;
};

/// Checks every numerically decidable model assumption: kernel normalization
/// by quadrature, domination by the declared profile, initial mass and
/// support, shell positivity above lambda0, and the total-order laws for the
/// tie break. Unbounded-range conditions on F and the uniform continuity of
/// rho have no finite test and are recorded as informational entries only.
ValidationReport validate_model(const ModelSpec& spec, const Box& window,
                                std::size_t samples,
                                const ValidationOptions& options = {});

}  // namespace fbp
