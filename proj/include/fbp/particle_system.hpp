#pragma once

#include <cstdint>
#include <functional>
#include <set>
#include <span>
#include <vector>

#include "fbp/model.hpp"
#include "fbp/rng.hpp"

namespace fbp {

/// N labeled particles with an ordered index keyed by (fitness, tie order)
/// supporting O(log N) minimum extraction and replacement.
class ParticleSystem {
public:
    ParticleSystem(std::size_t dimension, std::size_t count);

    static ParticleSystem init(const ModelSpec& spec, std::size_t count, RandomStream& rng);
    /// Builds a system from prescribed positions (count * dimension, flat).
    static ParticleSystem from_positions(std::size_t dimension, const std::vector<double>& flat,
                                         const FitnessFunction& fitness);

    std::size_t dimension() const { return dimension_; }
    std::size_t count() const { return count_; }
    double time() const { return time_; }
    void set_time(double t) { time_ = t; }

    std::span<const double> position(std::uint32_t label) const;
    double fitness_of(std::uint32_t label) const { return fvals_[label - 1]; }
    const std::vector<double>& coordinates() const { return coords_; }

    /// Label and fitness of the least-fit particle (ties by the fixed order).
    std::pair<std::uint32_t, double> min_fitness() const;

    /// Compares a candidate (position, fitness, label) against the current
    /// minimum in (fitness, tie) order; negative if the candidate is least.
    int compare_with_min(double f, std::span<const double> x, std::uint32_t label) const;

    /// Transfers `label` to a new position (the removal+birth composite).
    void replace(std::uint32_t label, std::span<const double> x, double f);

private:
    struct Entry {
        double f;
        std::vector<double> pos;
        std::uint32_t label;
        bool operator<(const Entry& o) const;
    };

    std::size_t dimension_;
    std::size_t count_;
    std::vector<double> coords_;  // label l occupies [ (l-1)*d, l*d )
    std::vector<double> fvals_;
    std::set<Entry> index_;
    double time_ = 0.0;

    void set_position(std::uint32_t label, std::span<const double> x, double f);
    friend struct ParticleSystemTestAccess;
};

std::pair<std::uint32_t, double> min_fitness(const ParticleSystem& sys);

/// Uniform probability measure on the particle positions.
struct DiscreteMeasure {
    std::size_t dimension = 1;
    std::vector<double> coords;  // count * dimension
    std::vector<double> weights;  // per atom; uniform 1/N for empirical measures

    std::size_t count() const { return dimension ? coords.size() / dimension : 0; }
    double total_mass() const;
    double integrate(const std::function<double(std::span<const double>)>& g) const;
};

DiscreteMeasure empirical_measure(const ParticleSystem& sys);

}  // namespace fbp
