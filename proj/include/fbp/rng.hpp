#pragma once

#include <cstdint>
#include <random>
#include <vector>

namespace fbp {

/// Reproducible random stream. All distributions are implemented on top of
/// the raw engine output so that a (seed, stream_id) pair produces the same
/// draw sequence on every platform and standard library.
class RandomStream {
public:
    RandomStream() : RandomStream(0, 0) {}
    RandomStream(std::uint64_t master_seed, std::uint64_t stream_id);

    /// Uniform on [0, 1), 53-bit resolution.
    double uniform();
    /// Uniform on [a, b).
    double uniform(double a, double b);
    /// Uniform integer in [0, n), n >= 1.
    std::uint64_t uniform_index(std::uint64_t n);
    /// Exponential with the given rate (mean 1/rate).
    double exponential(double rate);
    /// Standard normal (Box-Muller, stateless: two uniforms per draw).
    double normal();
    double normal(double mean, double stddev);

    std::uint64_t raw() { return engine_(); }

    std::uint64_t master_seed() const { return master_seed_; }
    std::uint64_t stream_id() const { return stream_id_; }

private:
    std::mt19937_64 engine_;
    std::uint64_t master_seed_ = 0;
    std::uint64_t stream_id_ = 0;
};

/// Independent, reproducible substream for (replica, role) bookkeeping:
/// same (seed, id) always yields the same stream.
RandomStream seed_stream(std::uint64_t master_seed, std::uint64_t stream_id);

}  // namespace fbp
