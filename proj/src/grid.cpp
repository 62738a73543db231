#include "fbp/grid.hpp"

#include <algorithm>
#include <cstring>
#include <numeric>
#include <stdexcept>

#include "fbp/io.hpp"

namespace fbp {

double Grid::center(std::size_t cell, std::size_t axis) const {
    return window.lo[axis] + (double(axis_index(cell, axis)) + 0.5) * spacing[axis];
}

Point Grid::cell_center(std::size_t cell) const {
    Point x(dimension());
    for (std::size_t k = 0; k < dimension(); ++k) x[k] = center(cell, k);
    return x;
}

std::size_t Grid::axis_index(std::size_t cell, std::size_t axis) const {
    // Row-major: the last axis varies fastest.
    std::size_t stride = 1;
    for (std::size_t k = dimension() - 1; k > axis; --k) stride *= resolution[k];
    return (cell / stride) % resolution[axis];
}

std::uint64_t Grid::hash() const {
    Fnv64 h;
    for (std::size_t k = 0; k < dimension(); ++k) {
        h.add(window.lo[k]);
        h.add(window.hi[k]);
        h.add(std::uint64_t(resolution[k]));
    }
    // Fitness enters through the per-cell values; hash a deterministic subsample.
    const std::size_t n = fitness_values.size();
    for (std::size_t i = 0; i < std::min<std::size_t>(n, 64); ++i)
        h.add(fitness_values[(i * 2654435761u) % n]);
    return h.value();
}

Grid build_grid(const Box& window, const std::vector<std::size_t>& resolution,
                const FitnessFunction& fitness) {
    if (window.empty()) throw std::invalid_argument("build_grid: degenerate window");
    if (resolution.size() != window.dimension())
        throw std::invalid_argument("build_grid: resolution/window dimension mismatch");
    for (std::size_t n : resolution)
        if (n < 2) throw std::invalid_argument("build_grid: resolution must be >= 2 per axis");

    Grid g;
    g.window = window;
    g.resolution = resolution;
    const std::size_t d = resolution.size();
    g.spacing.resize(d);
    g.cell_volume = 1.0;
    std::size_t cells = 1;
    for (std::size_t k = 0; k < d; ++k) {
        g.spacing[k] = (window.hi[k] - window.lo[k]) / double(resolution[k]);
        g.cell_volume *= g.spacing[k];
        cells *= resolution[k];
    }

    g.fitness_values.resize(cells);
    Point x(d);
    for (std::size_t c = 0; c < cells; ++c) {
        for (std::size_t k = 0; k < d; ++k) x[k] = g.center(c, k);
        g.fitness_values[c] = fitness(x);
    }

    g.fitness_order.resize(cells);
    std::iota(g.fitness_order.begin(), g.fitness_order.end(), 0u);
    std::stable_sort(g.fitness_order.begin(), g.fitness_order.end(),
                     [&](std::uint32_t a, std::uint32_t b) {
                         if (g.fitness_values[a] != g.fitness_values[b])
                             return g.fitness_values[a] < g.fitness_values[b];
                         return a < b;
                     });
    return g;
}

double field_mass(const Grid& grid, const DensityField& u) {
    double s = 0.0;
    for (double v : u.values) s += v;
    return s * grid.cell_volume;
}

DensityField discretize(const Grid& grid, const InitialCondition& init) {
    DensityField u;
    u.values.resize(grid.cell_count());
    for (std::size_t c = 0; c < grid.cell_count(); ++c)
        u.values[c] = init.density(grid.cell_center(c));
    return u;
}

}  // namespace fbp
