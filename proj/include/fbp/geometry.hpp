#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace fbp {

using Point = std::vector<double>;

/// Axis-aligned box in R^d.
struct Box {
    std::vector<double> lo;
    std::vector<double> hi;

    std::size_t dimension() const { return lo.size(); }
    bool empty() const;
    double volume() const;
    bool contains(std::span<const double> x) const;
};

/// Lexicographic comparison of coordinate vectors; -1, 0 or +1.
int lex_compare(std::span<const double> a, std::span<const double> b);

}  // namespace fbp
