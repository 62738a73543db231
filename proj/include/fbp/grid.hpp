#pragma once

#include <cstdint>
#include <vector>

#include "fbp/geometry.hpp"
#include "fbp/model.hpp"

namespace fbp {

/// Uniform tensor grid over a bounded window, with per-cell fitness values
/// and a permutation of cells sorted by ascending fitness.
struct Grid {
    Box window;
    std::vector<std::size_t> resolution;  // cells per axis
    std::vector<double> spacing;          // per axis
    double cell_volume = 0.0;
    std::vector<double> fitness_values;     // per cell, row-major
    std::vector<std::uint32_t> fitness_order;  // cell indices by ascending (F, index)

    std::size_t dimension() const { return resolution.size(); }
    std::size_t cell_count() const { return fitness_values.size(); }

    double center(std::size_t cell, std::size_t axis) const;
    Point cell_center(std::size_t cell) const;
    std::size_t axis_index(std::size_t cell, std::size_t axis) const;

    std::uint64_t hash() const;  // stable key for operator caching
};

Grid build_grid(const Box& window, const std::vector<std::size_t>& resolution,
                const FitnessFunction& fitness);

/// Non-negative density sampled on a grid.
struct DensityField {
    std::vector<double> values;
    double time = 0.0;
};

double field_mass(const Grid& grid, const DensityField& u);

/// Discretizes a closed-form density onto cell centers. Does not normalize.
DensityField discretize(const Grid& grid, const InitialCondition& init);

}  // namespace fbp
