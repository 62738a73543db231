#include "fbp/particle_system.hpp"

#include <algorithm>
#include <stdexcept>

namespace fbp {

bool ParticleSystem::Entry::operator<(const Entry& o) const {
    if (f != o.f) return f < o.f;
    int c = lex_compare(pos, o.pos);
    if (c != 0) return c < 0;
    return label < o.label;
}

ParticleSystem::ParticleSystem(std::size_t dimension, std::size_t count)
    : dimension_(dimension), count_(count), coords_(dimension * count, 0.0),
      fvals_(count, 0.0) {
    if (count == 0) throw std::invalid_argument("particle system: count must be >= 1");
}

ParticleSystem ParticleSystem::init(const ModelSpec& spec, std::size_t count,
                                    RandomStream& rng) {
    ParticleSystem sys(spec.dimension, count);
    for (std::uint32_t label = 1; label <= count; ++label) {
        Point x = spec.initial.sample(rng);
        sys.set_position(label, x, spec.fitness(x));
    }
    return sys;
}

ParticleSystem ParticleSystem::from_positions(std::size_t dimension,
                                              const std::vector<double>& flat,
                                              const FitnessFunction& fitness) {
    if (dimension == 0 || flat.size() % dimension != 0)
        throw std::invalid_argument("from_positions: bad coordinate array");
    ParticleSystem sys(dimension, flat.size() / dimension);
    for (std::uint32_t label = 1; label <= sys.count(); ++label) {
        std::span<const double> x(flat.data() + std::size_t(label - 1) * dimension, dimension);
        sys.set_position(label, x, fitness(x));
    }
    return sys;
}

std::span<const double> ParticleSystem::position(std::uint32_t label) const {
    return {coords_.data() + std::size_t(label - 1) * dimension_, dimension_};
}

std::pair<std::uint32_t, double> ParticleSystem::min_fitness() const {
    const Entry& e = *index_.begin();
    return {e.label, e.f};
}

int ParticleSystem::compare_with_min(double f, std::span<const double> x,
                                     std::uint32_t label) const {
    const Entry& m = *index_.begin();
    if (f != m.f) return f < m.f ? -1 : 1;
    int c = lex_compare(x, m.pos);
    if (c != 0) return c;
    return label < m.label ? -1 : (label > m.label ? 1 : 0);
}

void ParticleSystem::set_position(std::uint32_t label, std::span<const double> x, double f) {
    std::copy(x.begin(), x.end(), coords_.begin() + std::size_t(label - 1) * dimension_);
    fvals_[label - 1] = f;
    index_.insert(Entry{f, {x.begin(), x.end()}, label});
}

void ParticleSystem::replace(std::uint32_t label, std::span<const double> x, double f) {
    Entry old{fvals_[label - 1], {}, label};
    auto pos = position(label);
    old.pos.assign(pos.begin(), pos.end());
    auto it = index_.find(old);
    if (it == index_.end()) throw std::logic_error("particle system: index out of sync");
    index_.erase(it);
    set_position(label, x, f);
}

std::pair<std::uint32_t, double> min_fitness(const ParticleSystem& sys) {
    return sys.min_fitness();
}

double DiscreteMeasure::total_mass() const {
    double m = 0.0;
    for (double w : weights) m += w;
    return m;
}

double DiscreteMeasure::integrate(
    const std::function<double(std::span<const double>)>& g) const {
    double s = 0.0;
    for (std::size_t i = 0; i < count(); ++i)
        s += weights[i] * g(std::span<const double>(coords.data() + i * dimension, dimension));
    return s;
}

DiscreteMeasure empirical_measure(const ParticleSystem& sys) {
    DiscreteMeasure m;
    m.dimension = sys.dimension();
    m.coords = sys.coordinates();
    m.weights.assign(sys.count(), 1.0 / double(sys.count()));
    return m;
}

}  // namespace fbp
