#include "fbp/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "fbp/simulate.hpp"

namespace fbp {

double l1_distance(const Grid& grid, const DensityField& u, const DensityField& v) {
    if (u.values.size() != grid.cell_count() || v.values.size() != grid.cell_count())
        throw std::invalid_argument("l1_distance: grid mismatch");
    double s = 0.0;
    for (std::size_t c = 0; c < u.values.size(); ++c)
        s += std::abs(u.values[c] - v.values[c]);
    return s * grid.cell_volume;
}

DistanceReport truncated_l1_check(const DensityField& u, const DensityField& v, double ell,
                                  double m, const Grid& grid, double mass_tolerance) {
    DistanceReport r;
    r.metric = "truncated_l1";
    const double mu = field_mass(grid, u);
    const double mv = field_mass(grid, v);
    const double cut = std::max(ell, m);

    // Preconditions: each field vanishes below its own frontier, equal mass.
    double stray = 0.0;
    for (std::size_t c = 0; c < grid.cell_count(); ++c) {
        if (grid.fitness_values[c] <= ell) stray = std::max(stray, std::abs(u.values[c]));
        if (grid.fitness_values[c] <= m) stray = std::max(stray, std::abs(v.values[c]));
    }
    if (stray > 0.0 || std::abs(mu - mv) > mass_tolerance) {
        r.skipped = true;
        r.pass = false;
        std::ostringstream os;
        os << "precondition violated: stray mass below frontier " << stray
           << ", |mass(u)-mass(v)| = " << std::abs(mu - mv);
        r.context = os.str();
        return r;
    }

    double full = 0.0, above = 0.0;
    for (std::size_t c = 0; c < grid.cell_count(); ++c) {
        const double d = std::abs(u.values[c] - v.values[c]);
        full += d;
        if (grid.fitness_values[c] > cut) above += d;
    }
    full *= grid.cell_volume;
    above *= grid.cell_volume;

    const double slack = std::abs(mu - mv) + 1e-12;
    r.value = full;
    r.bound = 2.0 * above + slack;
    r.pass = r.value <= r.bound;
    std::ostringstream os;
    os << "cut level " << cut << ", mass slack " << std::abs(mu - mv);
    r.context = os.str();
    return r;
}

DiscreteMeasure grid_measure(const Grid& grid, const DensityField& u, bool normalize) {
    DiscreteMeasure m;
    m.dimension = grid.dimension();
    m.coords.reserve(grid.cell_count() * m.dimension);
    m.weights.reserve(grid.cell_count());
    double total = 0.0;
    for (std::size_t c = 0; c < grid.cell_count(); ++c) {
        if (u.values[c] == 0.0) continue;
        Point x = grid.cell_center(c);
        m.coords.insert(m.coords.end(), x.begin(), x.end());
        m.weights.push_back(u.values[c] * grid.cell_volume);
        total += m.weights.back();
    }
    if (normalize && total > 0.0)
        for (double& w : m.weights) w /= total;
    return m;
}

namespace {

double cdf_l1_distance(const DiscreteMeasure& mu, const DiscreteMeasure& nu) {
    struct Atom {
        double x, w;
        int which;
    };
    std::vector<Atom> atoms;
    atoms.reserve(mu.count() + nu.count());
    for (std::size_t i = 0; i < mu.count(); ++i)
        atoms.push_back({mu.coords[i], mu.weights[i], 0});
    for (std::size_t i = 0; i < nu.count(); ++i)
        atoms.push_back({nu.coords[i], nu.weights[i], 1});
    std::sort(atoms.begin(), atoms.end(), [](const Atom& a, const Atom& b) { return a.x < b.x; });
    double f0 = 0.0, f1 = 0.0, dist = 0.0;
    for (std::size_t i = 0; i + 1 <= atoms.size(); ++i) {
        if (atoms[i].which == 0)
            f0 += atoms[i].w;
        else
            f1 += atoms[i].w;
        if (i + 1 < atoms.size()) dist += std::abs(f0 - f1) * (atoms[i + 1].x - atoms[i].x);
    }
    return dist;
}

double dictionary_distance(const DiscreteMeasure& mu, const DiscreteMeasure& nu) {
    // Fixed dictionary of Lip-1, bound-1 test functions: clipped radial cones
    // around lattice centers at several radii, plus clipped coordinates.
    const std::size_t d = mu.dimension;
    Box bounds;
    bounds.lo.assign(d, std::numeric_limits<double>::infinity());
    bounds.hi.assign(d, -std::numeric_limits<double>::infinity());
    auto grow = [&](const DiscreteMeasure& m) {
        for (std::size_t i = 0; i < m.count(); ++i)
            for (std::size_t k = 0; k < d; ++k) {
                bounds.lo[k] = std::min(bounds.lo[k], m.coords[i * d + k]);
                bounds.hi[k] = std::max(bounds.hi[k], m.coords[i * d + k]);
            }
    };
    grow(mu);
    grow(nu);

    double worst = 0.0;
    auto probe = [&](const std::function<double(std::span<const double>)>& f) {
        worst = std::max(worst, std::abs(mu.integrate(f) - nu.integrate(f)));
    };
    // Clipped coordinate ramps at lattice offsets.
    const int knots = 5;
    for (std::size_t k = 0; k < d; ++k) {
        for (int j = 0; j <= knots; ++j) {
            double c = bounds.lo[k] + (bounds.hi[k] - bounds.lo[k]) * double(j) / double(knots);
            probe([k, c](std::span<const double> x) {
                return std::clamp(x[k] - c, -1.0, 1.0);
            });
        }
    }
    // Radial cones at lattice centers.
    const int per_axis = 4;
    std::vector<double> radii = {0.5, 1.0, 2.0};
    std::vector<std::size_t> idx(d, 0);
    while (true) {
        Point c(d);
        for (std::size_t k = 0; k < d; ++k)
            c[k] = bounds.lo[k] +
                   (bounds.hi[k] - bounds.lo[k]) * (double(idx[k]) + 0.5) / double(per_axis);
        for (double r : radii) {
            probe([c, r](std::span<const double> x) {
                double q = 0.0;
                for (std::size_t k = 0; k < c.size(); ++k)
                    q += (x[k] - c[k]) * (x[k] - c[k]);
                return std::clamp(r - std::sqrt(q), 0.0, 1.0);
            });
        }
        std::size_t k = 0;
        for (; k < d; ++k) {
            if (++idx[k] < per_axis) break;
            idx[k] = 0;
        }
        if (k == d) break;
    }
    return worst;
}

}  // namespace

double measure_distance(const DiscreteMeasure& mu, const DiscreteMeasure& nu) {
    return measure_distance_report(mu, nu).value;
}

DistanceReport measure_distance_report(const DiscreteMeasure& mu, const DiscreteMeasure& nu) {
    if (mu.dimension != nu.dimension)
        throw std::invalid_argument("measure_distance: dimension mismatch");
    if (std::abs(mu.total_mass() - 1.0) > 1e-9 || std::abs(nu.total_mass() - 1.0) > 1e-9)
        throw std::invalid_argument("measure_distance: inputs must be probability measures");
    DistanceReport r;
    if (mu.dimension == 1) {
        r.metric = "cdf_l1";
        r.value = cdf_l1_distance(mu, nu);
    } else {
        r.metric = "bl_dictionary";
        r.value = dictionary_distance(mu, nu);
    }
    r.pass = true;
    return r;
}

namespace {

// Prefix masses over cells ordered by ascending fitness.
struct SortedMass {
    std::vector<double> levels;
    std::vector<double> prefix;  // prefix[i] = mass of the first i sorted cells

    SortedMass(const DensityField& u, const Grid& grid) {
        levels.reserve(grid.cell_count());
        prefix.reserve(grid.cell_count() + 1);
        prefix.push_back(0.0);
        for (std::uint32_t c : grid.fitness_order) {
            levels.push_back(grid.fitness_values[c]);
            prefix.push_back(prefix.back() + u.values[c] * grid.cell_volume);
        }
    }

    double mass_between(double lo, double hi, bool closed_right) const {
        auto first = std::upper_bound(levels.begin(), levels.end(), lo);
        auto last = closed_right ? std::upper_bound(levels.begin(), levels.end(), hi)
                                 : std::lower_bound(levels.begin(), levels.end(), hi);
        if (last < first) last = first;
        return prefix[std::size_t(last - levels.begin())] -
               prefix[std::size_t(first - levels.begin())];
    }
};

}  // namespace

double shell_mass(const DensityField& u, const Grid& grid, double lo, double hi,
                  bool closed_right) {
    return SortedMass(u, grid).mass_between(lo, hi, closed_right);
}

ShellFunction shell_function(const DensityField& z, const Grid& grid,
                             const std::vector<double>& kappas,
                             const std::vector<double>& b_grid) {
    SortedMass sm(z, grid);
    ShellFunction out;
    out.kappas = kappas;
    out.values.reserve(kappas.size());
    for (double kappa : kappas) {
        double worst = 0.0;
        for (double b : b_grid) worst = std::max(worst, sm.mass_between(b, b + kappa, false));
        out.values.push_back(worst);
    }
    return out;
}

double eta_between(const DensityField& z, const Grid& grid, const PiecewiseBoundary& a,
                   const PiecewiseBoundary& b) {
    if (a.intervals() != b.intervals() || a.delta != b.delta)
        throw std::invalid_argument("eta_between: boundaries on different meshes");
    SortedMass sm(z, grid);
    double eta = 0.0;
    for (std::size_t j = 0; j < a.intervals(); ++j) {
        double lo = std::min(a.levels[j], b.levels[j]);
        double hi = std::max(a.levels[j], b.levels[j]);
        eta = std::max(eta, sm.mass_between(lo, hi, /*closed_right=*/true));
    }
    return eta;
}

DistanceReport continuity_estimate_check(const PiecewiseBoundary& k, const PiecewiseBoundary& m,
                                         const ContinuityCheckContext& ctx, double margin) {
    if (!ctx.grid || !ctx.op) throw std::invalid_argument("continuity check: missing context");
    const Grid& grid = *ctx.grid;

    // Free-growth density at T bounds both solutions.
    DensityField z_final;
    if (ctx.z_final) {
        z_final = *ctx.z_final;
    } else {
        SolveOptions zopts = ctx.solve;
        zopts.observer = nullptr;
        z_final = solve_free(grid, *ctx.op, ctx.u0, ctx.T, zopts).final_field;
    }
    const double eta = eta_between(z_final, grid, k, m);
    const double bound = 2.0 * eta * std::exp(ctx.c_tilde * ctx.T);

    // Lockstep comparison: store the k-run, stream the m-run against it.
    std::vector<DensityField> k_path;
    SolveOptions kopts = ctx.solve;
    kopts.snapshot_times.clear();
    kopts.observer = [&](std::size_t, double, const DensityField& u) { k_path.push_back(u); };
    auto k_run = solve_fixed_boundary(grid, *ctx.op, ctx.u0, ctx.lambda0, k, ctx.T, kopts);

    double sup = l1_distance(grid, trim_copy(ctx.u0, k.value_at(0.0), grid),
                             trim_copy(ctx.u0, m.value_at(0.0), grid));
    std::size_t at = 0;
    SolveOptions mopts = ctx.solve;
    mopts.snapshot_times.clear();
    mopts.observer = [&](std::size_t, double, const DensityField& u) {
        sup = std::max(sup, l1_distance(grid, k_path.at(at), u));
        ++at;
    };
    auto m_run = solve_fixed_boundary(grid, *ctx.op, ctx.u0, ctx.lambda0, m, ctx.T, mopts);
    (void)k_run;
    (void)m_run;

    DistanceReport r;
    r.metric = "fixed_boundary_continuity";
    r.value = sup;
    r.bound = bound * (1.0 + margin);
    r.pass = r.value <= r.bound;
    std::ostringstream os;
    os << "eta = " << eta << ", c~ = " << ctx.c_tilde << ", T = " << ctx.T << ", margin "
       << margin;
    r.context = os.str();
    return r;
}

std::vector<StudyRow> convergence_study(const ModelSpec& spec, const StudyOptions& options,
                                        const Grid& grid, const FbpSolveResult& oracle) {
    if (options.population_list.empty() || options.replicas == 0)
        throw std::invalid_argument("convergence_study: empty plan");
    const double ell_T = oracle.boundary.final_level();
    DiscreteMeasure target = grid_measure(grid, oracle.final_field, /*normalize=*/true);

    const std::size_t rows = options.population_list.size();
    const std::size_t cells = rows * options.replicas;
    std::vector<double> dist(cells, 0.0), lerr(cells, 0.0);
    std::vector<std::string> failure(cells);

#pragma omp parallel for schedule(dynamic)
    for (long cell = 0; cell < long(cells); ++cell) {
        const std::size_t row = std::size_t(cell) / options.replicas;
        const std::size_t n = options.population_list[row];
        try {
            RandomStream rng = seed_stream(options.master_seed, std::uint64_t(cell) + 1);
            Trajectory traj = simulate(spec, n, options.T, rng);
            const Snapshot& last = traj.snapshots.back();
            DiscreteMeasure empirical;
            empirical.dimension = last.dimension;
            empirical.coords = last.coords;
            empirical.weights.assign(last.coords.size() / last.dimension,
                                     1.0 / double(last.coords.size() / last.dimension));
            dist[std::size_t(cell)] = measure_distance(empirical, target);
            lerr[std::size_t(cell)] = std::abs(traj.ell_path.final_level() - ell_T);
        } catch (const std::exception& e) {
            failure[std::size_t(cell)] = e.what();
        }
    }
    std::vector<StudyRow> table;
    for (std::size_t row = 0; row < rows; ++row) {
        StudyRow r;
        r.population = options.population_list[row];
        std::vector<std::size_t> good;
        for (std::size_t i = 0; i < options.replicas; ++i) {
            const std::size_t cell = row * options.replicas + i;
            if (failure[cell].empty()) {
                good.push_back(cell);
            } else {
                ++r.failed_replicas;
                if (r.failure_reason.empty()) r.failure_reason = failure[cell];
            }
        }
        r.replicas = good.size();
        auto stats = [&](const std::vector<double>& v, double& mean, double& se) {
            if (good.empty()) return;
            double s = 0.0;
            for (std::size_t cell : good) s += v[cell];
            mean = s / double(good.size());
            double q = 0.0;
            for (std::size_t cell : good) q += (v[cell] - mean) * (v[cell] - mean);
            se = good.size() > 1
                     ? std::sqrt(q / double(good.size() - 1) / double(good.size()))
                     : 0.0;
        };
        stats(dist, r.mean_distance, r.se_distance);
        stats(lerr, r.mean_level_error, r.se_level_error);
        table.push_back(r);
    }
    return table;
}

}  // namespace fbp
