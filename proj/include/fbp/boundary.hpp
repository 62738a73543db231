#pragma once

#include <functional>
#include <utility>
#include <vector>

namespace fbp {

/// Cadlag piecewise-constant record of the frontier level over time.
struct BoundaryPath {
    double start_time = 0.0;
    double start_level = 0.0;
    double end_time = 0.0;
    std::vector<std::pair<double, double>> jumps;  // (time, new level)

    /// Right-continuous evaluation.
    double value_at(double t) const;
    double left_limit_at(double t) const;
    double final_level() const;
    bool nondecreasing() const;
    /// Records a jump at time t if the level changed.
    void append(double t, double level);
};

/// Element of the piecewise-constant boundary class: constant on each
/// [j*delta, (j+1)*delta) with values on the epsilon lattice, nondecreasing.
struct PiecewiseBoundary {
    double delta = 0.0;
    double epsilon = 0.0;
    std::vector<double> levels;

    std::size_t intervals() const { return levels.size(); }
    double horizon() const { return delta * double(levels.size()); }
    double value_at(double t) const;
    bool valid() const;
};

/// Lattice snap-down: max{y in eps*Z : y <= x} (tolerant of roundoff on
/// inputs already on the lattice).
double snap_down(double x, double eps);
/// Lattice snap-up: min{y in eps*Z : y >= x}.
double snap_up(double x, double eps);

/// Lower/upper envelopes of a frontier path: on each interval the lower path
/// is the snapped-down running infimum minus eps and the upper path the
/// snapped-up supremum plus eps, so that lower < path < upper on [0, T).
std::pair<PiecewiseBoundary, PiecewiseBoundary> envelope_paths(const BoundaryPath& path,
                                                               double delta, double eps,
                                                               double T);

/// w_T(f, delta) = sup |f(t) - f(s)| over 0 <= s <= t <= (s+delta) ^ T,
/// exact for step paths.
double modulus_of_continuity(const BoundaryPath& path, double delta, double T);
/// Sampled variant for arbitrary paths (sliding-window max minus min).
double modulus_of_continuity(const std::function<double(double)>& f, double delta, double T,
                             std::size_t samples = 4096);

}  // namespace fbp
