#include <doctest.h>

#include <cmath>

#include "fbp/analysis.hpp"
#include "fbp/simulate.hpp"
#include "test_helpers.hpp"

using namespace fbp;
using fbp::testing::SolverFixture;

TEST_CASE("l1 distance basics and triangle inequality") {
    SolverFixture fx(64, 0.0, 1.0);
    DensityField ones, zeros;
    ones.values.assign(64, 1.0);
    zeros.values.assign(64, 0.0);
    CHECK(l1_distance(fx.grid, ones, ones) == 0.0);
    CHECK(l1_distance(fx.grid, ones, zeros) == doctest::Approx(1.0));

    RandomStream rng = seed_stream(41, 0);
    for (int trial = 0; trial < 200; ++trial) {
        DensityField a, b, c;
        a.values.resize(64);
        b.values.resize(64);
        c.values.resize(64);
        for (std::size_t i = 0; i < 64; ++i) {
            a.values[i] = rng.uniform();
            b.values[i] = rng.uniform();
            c.values[i] = rng.uniform();
        }
        const double ab = l1_distance(fx.grid, a, b);
        const double bc = l1_distance(fx.grid, b, c);
        const double ac = l1_distance(fx.grid, a, c);
        CHECK(ac <= ab + bc + 1e-12);
        CHECK(ab == doctest::Approx(l1_distance(fx.grid, b, a)));  // symmetry
    }
}

TEST_CASE("truncated L1 inequality on solver outputs") {
    SolverFixture fx;
    SolveOptions coarse{.dt = 4e-3}, fine{.dt = 2e-3};
    auto a = solve_fbp(fx.grid, fx.op, fx.u0, 0.0, 1.0, coarse);
    auto b = solve_fbp(fx.grid, fx.op, fx.u0, 0.0, 1.0, fine);

    auto same = truncated_l1_check(a.final_field, a.final_field, a.boundary.final_level(),
                                   a.boundary.final_level(), fx.grid);
    CHECK(same.pass);
    CHECK(same.value == 0.0);

    auto r = truncated_l1_check(a.final_field, b.final_field, a.boundary.final_level(),
                                b.boundary.final_level(), fx.grid);
    CHECK_FALSE(r.skipped);
    CHECK(r.pass);
    CHECK(r.value <= r.bound);

    // Free growth has mass e: rejected by the equal-mass precondition.
    auto z = solve_free(fx.grid, fx.op, fx.u0, 1.0, fine);
    auto bad = truncated_l1_check(a.final_field, z.final_field, a.boundary.final_level(), -10.0,
                                  fx.grid);
    CHECK(bad.skipped);
    CHECK_FALSE(bad.pass);
}

TEST_CASE("measure distance in one dimension") {
    DiscreteMeasure at0{1, {0.0}, {1.0}};
    DiscreteMeasure ath{1, {0.4}, {1.0}};
    CHECK(measure_distance(at0, at0) == 0.0);
    CHECK(measure_distance(at0, ath) == doctest::Approx(0.4));

    DiscreteMeasure heavy{1, {0.0}, {2.0}};
    CHECK_THROWS(measure_distance(at0, heavy));
}

TEST_CASE("measure distance report names the metric") {
    DiscreteMeasure a{2, {0.0, 0.0}, {1.0}};
    DiscreteMeasure b{2, {0.5, 0.0}, {1.0}};
    auto r = measure_distance_report(a, b);
    CHECK(r.metric == "bl_dictionary");
    CHECK(r.value > 0.0);
    CHECK(measure_distance(a, a) == 0.0);
}

TEST_CASE("empirical measures approach their density as N grows") {
    SolverFixture fx(512, -0.5, 1.5);
    DiscreteMeasure density = grid_measure(fx.grid, fx.u0, true);
    auto sample_distance = [&](std::size_t n) {
        RandomStream rng = seed_stream(43, n);
        DiscreteMeasure emp;
        emp.dimension = 1;
        for (std::size_t i = 0; i < n; ++i) {
            emp.coords.push_back(rng.uniform());
            emp.weights.push_back(1.0 / double(n));
        }
        return measure_distance(emp, density);
    };
    const double d100 = sample_distance(100);
    const double d10000 = sample_distance(10000);
    CHECK(d10000 < d100);
}

TEST_CASE("shell function tabulation") {
    SolverFixture fx(400, 0.0, 1.0);
    DensityField z;
    z.values.assign(400, 1.0);
    auto sf = shell_function(z, fx.grid, {0.0, 0.1, 0.25, 0.5}, {-0.5, 0.0, 0.25, 0.5, 0.9});
    REQUIRE(sf.values.size() == 4);
    CHECK(sf.values[0] <= fx.grid.cell_volume + 1e-12);  // kappa = 0
    for (std::size_t i = 1; i < sf.values.size(); ++i) CHECK(sf.values[i] >= sf.values[i - 1]);
    CHECK(sf.values[2] == doctest::Approx(0.25).epsilon(0.02));
}

TEST_CASE("eta between boundary pairs") {
    SolverFixture fx(400, 0.0, 1.0);
    DensityField z;
    z.values.assign(400, 1.0);
    PiecewiseBoundary a{0.1, 0.05, std::vector<double>(10, 0.2)};
    PiecewiseBoundary b{0.1, 0.05, std::vector<double>(10, 0.45)};
    CHECK(eta_between(z, fx.grid, a, b) == doctest::Approx(0.25).epsilon(0.02));
    CHECK(eta_between(z, fx.grid, a, a) == 0.0);
}

TEST_CASE("fixed-boundary continuity estimate") {
    SolverFixture fx;
    ContinuityCheckContext ctx;
    ctx.grid = &fx.grid;
    ctx.op = &fx.op;
    ctx.u0 = fx.u0;
    ctx.lambda0 = 0.0;
    ctx.T = 0.5;
    ctx.solve.dt = 5e-3;
    ctx.c_tilde = fx.spec.kernel.dominating_constant;

    PiecewiseBoundary k{0.1, 0.05, std::vector<double>(5, 0.1)};

    SUBCASE("identical boundaries give zero distance") {
        auto r = continuity_estimate_check(k, k, ctx);
        CHECK(r.pass);
        CHECK(r.value == 0.0);
    }
    SUBCASE("one-lattice-step separation") {
        PiecewiseBoundary m{0.1, 0.05, std::vector<double>(5, 0.15)};
        auto r = continuity_estimate_check(k, m, ctx);
        INFO(r.context);
        CHECK(r.pass);
        CHECK(r.value > 0.0);
    }
    SUBCASE("wide separation keeps the (loose) bound") {
        PiecewiseBoundary m{0.1, 0.05, std::vector<double>(5, 0.8)};
        auto r = continuity_estimate_check(k, m, ctx);
        INFO(r.context);
        CHECK(r.pass);
    }
}

TEST_CASE("convergence study: reproducible table, decreasing trend") {
    SolverFixture fx;
    SolveOptions so{.dt = 2e-3};
    auto oracle = solve_fbp(fx.grid, fx.op, fx.u0, 0.0, 1.0, so);

    StudyOptions opts;
    opts.population_list = {100, 2000};
    opts.replicas = 8;
    opts.T = 1.0;
    opts.master_seed = 99;
    auto table = convergence_study(fx.spec, opts, fx.grid, oracle);
    REQUIRE(table.size() == 2);
    CHECK(table[0].mean_distance > table[1].mean_distance);
    CHECK(table[0].mean_level_error > table[1].mean_level_error);

    auto again = convergence_study(fx.spec, opts, fx.grid, oracle);
    CHECK(again[0].mean_distance == table[0].mean_distance);
    CHECK(again[1].se_level_error == table[1].se_level_error);

    StudyOptions single;
    single.population_list = {150};
    single.replicas = 1;
    single.master_seed = 7;
    auto one = convergence_study(fx.spec, single, fx.grid, oracle);
    REQUIRE(one.size() == 1);
    CHECK(one[0].replicas == 1);
    CHECK(one[0].se_distance == 0.0);
}
