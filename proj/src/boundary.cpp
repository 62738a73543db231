#include "fbp/boundary.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <stdexcept>

namespace fbp {

double BoundaryPath::value_at(double t) const {
    double level = start_level;
    for (const auto& [tau, v] : jumps) {
        if (tau > t) break;
        level = v;
    }
    return level;
}

double BoundaryPath::left_limit_at(double t) const {
    double level = start_level;
    for (const auto& [tau, v] : jumps) {
        if (tau >= t) break;
        level = v;
    }
    return level;
}

double BoundaryPath::final_level() const {
    return jumps.empty() ? start_level : jumps.back().second;
}

bool BoundaryPath::nondecreasing() const {
    double level = start_level;
    double t = start_time;
    for (const auto& [tau, v] : jumps) {
        if (tau < t || v < level) return false;
        t = tau;
        level = v;
    }
    return true;
}

void BoundaryPath::append(double t, double level) {
    end_time = t;
    if (level != final_level()) jumps.emplace_back(t, level);
}

double PiecewiseBoundary::value_at(double t) const {
    if (levels.empty()) throw std::logic_error("piecewise boundary: empty");
    auto j = std::size_t(std::max(0.0, std::floor(t / delta + 1e-9)));
    return levels[std::min(j, levels.size() - 1)];
}

bool PiecewiseBoundary::valid() const {
    if (!(delta > 0.0) || !(epsilon > 0.0) || levels.empty()) return false;
    double prev = -std::numeric_limits<double>::infinity();
    for (double a : levels) {
        if (a < prev) return false;
        double q = a / epsilon;
        if (std::abs(q - std::round(q)) > 1e-6) return false;
        prev = a;
    }
    return true;
}

double snap_down(double x, double eps) {
    if (!(eps > 0.0)) throw std::invalid_argument("snap_down: eps must be positive");
    return eps * std::floor(x / eps + 1e-9);
}

double snap_up(double x, double eps) {
    if (!(eps > 0.0)) throw std::invalid_argument("snap_up: eps must be positive");
    return eps * std::ceil(x / eps - 1e-9);
}

std::pair<PiecewiseBoundary, PiecewiseBoundary> envelope_paths(const BoundaryPath& path,
                                                               double delta, double eps,
                                                               double T) {
    double j_real = T / delta;
    auto J = std::size_t(std::round(j_real));
    if (J == 0 || std::abs(j_real - double(J)) > 1e-9)
        throw std::invalid_argument("envelope_paths: T/delta must be a positive integer");

    PiecewiseBoundary lower{delta, eps, {}}, upper{delta, eps, {}};
    lower.levels.resize(J);
    upper.levels.resize(J);
    for (std::size_t j = 0; j < J; ++j) {
        double t0 = double(j) * delta;
        double t1 = double(j + 1) * delta;
        // Nondecreasing cadlag path: infimum at the left end, supremum at the
        // left limit of the right end.
        double inf_j = path.value_at(t0);
        double sup_j = path.left_limit_at(std::min(t1, T));
        lower.levels[j] = snap_down(inf_j, eps) - eps;
        upper.levels[j] = snap_up(sup_j, eps) + eps;
    }
    return {lower, upper};
}

double modulus_of_continuity(const BoundaryPath& path, double delta, double T) {
    if (!(delta > 0.0)) throw std::invalid_argument("modulus: delta must be positive");
    double w = 0.0;
    for (const auto& [tau, v] : path.jumps) {
        if (tau > T) break;
        w = std::max(w, v - path.value_at(std::max(path.start_time, tau - delta)));
    }
    return w;
}

double modulus_of_continuity(const std::function<double(double)>& f, double delta, double T,
                             std::size_t samples) {
    if (samples < 2) throw std::invalid_argument("modulus: need at least 2 samples");
    const double h = T / double(samples - 1);
    const auto width = std::size_t(std::max(1.0, std::round(delta / h)));
    std::deque<std::size_t> maxq, minq;
    std::vector<double> vals(samples);
    for (std::size_t i = 0; i < samples; ++i) vals[i] = f(double(i) * h);
    double w = 0.0;
    for (std::size_t i = 0; i < samples; ++i) {
        while (!maxq.empty() && vals[maxq.back()] <= vals[i]) maxq.pop_back();
        maxq.push_back(i);
        while (!minq.empty() && vals[minq.back()] >= vals[i]) minq.pop_back();
        minq.push_back(i);
        // window is [i - width, i]
        while (maxq.front() + width < i) maxq.pop_front();
        while (minq.front() + width < i) minq.pop_front();
        w = std::max(w, vals[maxq.front()] - vals[minq.front()]);
    }
    return w;
}

}  // namespace fbp
