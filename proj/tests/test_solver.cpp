#include <doctest.h>

#include <cmath>

#include "fbp/analysis.hpp"
#include "fbp/solver.hpp"
#include "test_helpers.hpp"

using namespace fbp;
using fbp::testing::SolverFixture;

TEST_CASE("step_free grows mass by the growth factor minus leakage") {
    SolverFixture fx;
    const double dt = 1e-2;
    DensityField next = step_free(fx.u0, dt, fx.op);
    const double leaked = dt * fx.op.leaked_mass(fx.grid, fx.u0);
    CHECK(field_mass(fx.grid, next) ==
          doctest::Approx(field_mass(fx.grid, fx.u0) * (1.0 + dt) - leaked).epsilon(1e-10));

    DensityField zero;
    zero.values.assign(fx.grid.cell_count(), 0.0);
    DensityField z2 = step_free(zero, dt, fx.op);
    for (double v : z2.values) CHECK(v == 0.0);
}

TEST_CASE("heun mass error is second order in dt") {
    SolverFixture fx(768, -0.5, 6.5);  // wide window: leakage cannot pollute the order check
    SolveOptions coarse{.dt = 2e-2, .scheme = TimeScheme::heun};
    SolveOptions fine{.dt = 1e-2, .scheme = TimeScheme::heun};
    auto a = solve_free(fx.grid, fx.op, fx.u0, 0.5, coarse);
    auto b = solve_free(fx.grid, fx.op, fx.u0, 0.5, fine);
    // Quartering of the defect from exp growth when halving dt (no leakage
    // reaches the window edge by T=0.5 in this fixture).
    const double target = std::exp(0.5);
    const double ea = std::abs(a.mass.back() - target);
    const double eb = std::abs(b.mass.back() - target);
    CHECK(ea / eb == doctest::Approx(4.0).epsilon(0.15));
}

TEST_CASE("euler self-convergence is first order") {
    SolverFixture fx;
    SolveOptions o1{.dt = 4e-3}, o2{.dt = 2e-3}, o3{.dt = 1e-3};
    auto u1 = solve_free(fx.grid, fx.op, fx.u0, 1.0, o1).final_field;
    auto u2 = solve_free(fx.grid, fx.op, fx.u0, 1.0, o2).final_field;
    auto u3 = solve_free(fx.grid, fx.op, fx.u0, 1.0, o3).final_field;
    const double d12 = l1_distance(fx.grid, u1, u2);
    const double d23 = l1_distance(fx.grid, u2, u3);
    CHECK(d12 / d23 == doctest::Approx(2.0).epsilon(0.2));
}

TEST_CASE("trim edge cases") {
    SolverFixture fx(64, 0.0, 1.0);
    DensityField u;
    u.values.assign(64, 1.0);

    DensityField below = trim_copy(u, -5.0, fx.grid);
    CHECK(below.values == u.values);

    DensityField above = trim_copy(u, 5.0, fx.grid);
    for (double v : above.values) CHECK(v == 0.0);

    DensityField half = trim_copy(u, 0.5, fx.grid);
    CHECK(std::abs(field_mass(fx.grid, half) - 0.5) <= fx.grid.cell_volume + 1e-12);
}

TEST_CASE("boundary_from_mass against a brute-force scan") {
    SolverFixture fx(64, 0.0, 1.0);
    DensityField u;
    u.values.assign(64, 1.0);

    auto r = boundary_from_mass(u, fx.grid, 0.5);
    CHECK(r.trimmed);
    CHECK(std::abs(r.level - 0.5) <= fx.grid.spacing[0] + 1e-12);
    CHECK(r.achieved_mass <= 0.5 + 1e-12);

    // Oracle: smallest realized level whose trim is at or below target.
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < fx.grid.cell_count(); ++c) {
        double level = fx.grid.fitness_values[c];
        if (field_mass(fx.grid, trim_copy(u, level, fx.grid)) <= 0.5 && level < best)
            best = level;
    }
    CHECK(r.level == best);
    CHECK(field_mass(fx.grid, trim_copy(u, r.level, fx.grid)) ==
          doctest::Approx(r.achieved_mass).epsilon(1e-12));
}

TEST_CASE("boundary_from_mass degenerate targets") {
    SolverFixture fx(64, 0.0, 1.0);
    DensityField u;
    u.values.assign(64, 1.0);
    const double mass = field_mass(fx.grid, u);

    auto no_trim = boundary_from_mass(u, fx.grid, mass);
    CHECK_FALSE(no_trim.trimmed);
    CHECK(no_trim.level == -std::numeric_limits<double>::infinity());
    CHECK(no_trim.achieved_mass == doctest::Approx(mass));

    auto all = boundary_from_mass(u, fx.grid, 0.0);
    CHECK(all.trimmed);
    CHECK(all.achieved_mass == 0.0);
    CHECK(all.level >= fx.grid.fitness_values[fx.grid.fitness_order.back()] - 1e-12);

    CHECK_THROWS_AS((void)boundary_from_mass(u, fx.grid, mass + 0.1), SolverError);
}

TEST_CASE("fixed boundary below the window is exactly free growth") {
    SolverFixture fx;
    SolveOptions so{.dt = 2e-3};
    PiecewiseBoundary wall{0.1, 0.05, std::vector<double>(10, -10.0)};
    auto fixed = solve_fixed_boundary(fx.grid, fx.op, fx.u0, 0.0, wall, 1.0, so);
    auto free_run = solve_free(fx.grid, fx.op, fx.u0, 1.0, so);
    REQUIRE(fixed.final_field.values.size() == free_run.final_field.values.size());
    CHECK(fixed.final_field.values == free_run.final_field.values);
}

TEST_CASE("a wall jump above the window max kills the field") {
    SolverFixture fx;
    SolveOptions so{.dt = 2e-3};
    std::vector<double> levels(10, -10.0);
    for (std::size_t j = 1; j < levels.size(); ++j) levels[j] = 100.0;
    PiecewiseBoundary wall{0.1, 0.05, levels};
    auto fixed = solve_fixed_boundary(fx.grid, fx.op, fx.u0, 0.0, wall, 1.0, so);
    for (double v : fixed.final_field.values) CHECK(v == 0.0);
}

TEST_CASE("fixed boundary run matches a finer-dt oracle within 2x Richardson") {
    SolverFixture fx;
    PiecewiseBoundary wall{0.1, 0.05, std::vector<double>(10, 0.25)};
    SolveOptions c1{.dt = 4e-3}, c2{.dt = 2e-3}, c3{.dt = 1e-3};
    auto u1 = solve_fixed_boundary(fx.grid, fx.op, fx.u0, 0.0, wall, 1.0, c1).final_field;
    auto u2 = solve_fixed_boundary(fx.grid, fx.op, fx.u0, 0.0, wall, 1.0, c2).final_field;
    auto u3 = solve_fixed_boundary(fx.grid, fx.op, fx.u0, 0.0, wall, 1.0, c3).final_field;
    const double richardson = 2.0 * l1_distance(fx.grid, u1, u2);
    CHECK(l1_distance(fx.grid, u1, u3) <= 2.0 * richardson);
}

TEST_CASE("free boundary solve on the reference setup") {
    SolverFixture fx;
    SolveOptions so{.dt = 2e-3};
    auto r = solve_fbp(fx.grid, fx.op, fx.u0, 0.0, 1.0, so);
    CHECK(r.boundary.nondecreasing());
    CHECK(r.boundary.final_level() > 0.0);
    for (std::size_t i = 0; i < r.mass.size(); ++i) {
        CHECK(r.pin_deficit[i] >= -1e-12);
        CHECK(r.pin_deficit[i] <= r.pin_quantum[i] + r.leaked_cumulative[i] +
                                      r.vanishing_loss_cumulative[i] + 1e-12);
    }
    // The field vanishes at and below the frontier.
    const double ell = r.boundary.final_level();
    for (std::size_t c = 0; c < fx.grid.cell_count(); ++c)
        if (fx.grid.fitness_values[c] <= ell) CHECK(r.final_field.values[c] == 0.0);
}

TEST_CASE("near-identity kernel: trimmed mass balances the growth") {
    SolverFixture fx(512, -0.5, 2.0);
    auto op = build_kernel(fx.grid, BranchingKernel::gaussian_isotropic(1, 0.02));
    SolveOptions so{.dt = 2e-3};
    auto r = solve_fbp(fx.grid, op, fx.u0, 0.0, 1.0, so);
    CHECK(r.boundary.final_level() > 0.0);
    // Mass pinned at one: the trim must discard growth at unit rate.
    double trimmed_total = 0.0;
    double prev = 1.0, prev_leak = 0.0;
    for (std::size_t i = 0; i < r.mass.size(); ++i) {
        const double leak_step = r.leaked_cumulative[i] - prev_leak;
        const double pre_trim = prev * (1.0 + so.dt) - leak_step;
        trimmed_total += pre_trim - r.mass[i];
        prev = r.mass[i];
        prev_leak = r.leaked_cumulative[i];
    }
    CHECK(trimmed_total == doctest::Approx(1.0).epsilon(0.05));
}

TEST_CASE("free growth reaches e and dominates the pinned solution") {
    SolverFixture fx;
    SolveOptions so{.dt = 1e-3};
    auto z = solve_free(fx.grid, fx.op, fx.u0, 1.0, so);
    const double expected = std::exp(1.0);
    CHECK(std::abs(z.mass.back() - expected) <=
          3.0 * z.accumulated_leak + expected * 2.0 * so.dt);
    for (double v : z.final_field.values) CHECK(v >= 0.0);

    auto u = solve_fbp(fx.grid, fx.op, fx.u0, 0.0, 1.0, so);
    for (std::size_t c = 0; c < fx.grid.cell_count(); ++c)
        CHECK(u.final_field.values[c] <= z.final_field.values[c] + 1e-10);
}

TEST_CASE("fbp richardson self-convergence") {
    SolverFixture fx(1024, -0.5, 6.5);
    SolveOptions o1{.dt = 1e-2}, o2{.dt = 5e-3}, o3{.dt = 2.5e-3};
    auto u1 = solve_fbp(fx.grid, fx.op, fx.u0, 0.0, 1.0, o1).final_field;
    auto u2 = solve_fbp(fx.grid, fx.op, fx.u0, 0.0, 1.0, o2).final_field;
    auto u3 = solve_fbp(fx.grid, fx.op, fx.u0, 0.0, 1.0, o3).final_field;
    const double d12 = l1_distance(fx.grid, u1, u2);
    const double d23 = l1_distance(fx.grid, u2, u3);
    CHECK(d12 / d23 > 1.4);
    CHECK(d12 / d23 < 2.6);
}

TEST_CASE("leakage budget aborts with a diagnostic") {
    SolverFixture fx(128, -0.5, 1.5);  // deliberately cramped window
    SolveOptions so{.dt = 5e-3};
    so.leakage_budget = 1e-4;
    CHECK_THROWS_AS((void)solve_free(fx.grid, fx.op, fx.u0, 1.0, so), SolverError);
}
