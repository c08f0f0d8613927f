#include "doctest.h"

#include "d2d/errors.hpp"
#include "d2d/model.hpp"
#include "d2d/opt_exact.hpp"
#include "d2d/opt_unbiased.hpp"

#include <cmath>
#include <cstddef>
#include <random>
#include <stdexcept>
#include <vector>

using d2d::CachingStrategy;
using d2d::GridSpec;
using d2d::GroupProfile;
using d2d::SystemParams;

namespace {

SystemParams default_params(double alpha = 3.0, double gamma_db = 3.0) {
    return SystemParams::from_db(alpha, gamma_db, 15.0, 20.0, 1e-4, 15.0);
}

// two-group scenario with strongly split trust
const GroupProfile kSplit2({0.02, 0.02}, {0.1, 0.9});
// three-group variant
const GroupProfile kSplit3({0.02, 0.02, 0.02}, {0.1, 0.4, 0.5});

double dot(const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

double sum(const std::vector<double>& a) {
    double s = 0.0;
    for (double x : a) s += x;
    return s;
}

}  // namespace

TEST_CASE("y window degenerates for equal weights") {
    const auto [lo, hi] = d2d::y_bounds({1.0, 1.0}, {0.05, 0.05}, 0.02);
    CHECK(lo == doctest::Approx(0.02).epsilon(1e-15));
    CHECK(hi == doctest::Approx(0.02).epsilon(1e-15));
}

TEST_CASE("y window clips to the weighted cap") {
    const auto [lo, hi] = d2d::y_bounds({0.2, 0.8}, {0.03, 0.03}, 0.04);
    CHECK(lo == doctest::Approx(0.008).epsilon(1e-14));
    CHECK(hi == doctest::Approx(0.030).epsilon(1e-14));
    const auto [lo0, hi0] = d2d::y_bounds({0.2, 0.8}, {0.03, 0.03}, 0.0);
    CHECK(lo0 == 0.0);
    CHECK(hi0 == 0.0);
}

TEST_CASE("y window reference values for the split-trust pair") {
    const auto v = kSplit2.weights(3.0);
    CHECK(v[0] == doctest::Approx(0.2154434690031884).epsilon(1e-14));
    CHECK(v[1] == doctest::Approx(0.9321697517861577).epsilon(1e-14));
    const auto [lo, hi] = d2d::y_bounds(v, kSplit2.lambda, 0.02);
    CHECK(lo == doctest::Approx(0.004308869380063768).epsilon(1e-14));
    CHECK(hi == doctest::Approx(0.018643395035723154).epsilon(1e-14));
}

TEST_CASE("feasible point construction satisfies both totals") {
    const auto c = d2d::feasible_init({0.2, 0.8}, {0.03, 0.03}, 0.04, 0.02);
    REQUIRE(c.has_value());
    CHECK(c->c[0] == doctest::Approx(0.02).epsilon(1e-12));
    CHECK(c->c[1] == doctest::Approx(0.02).epsilon(1e-12));
}

TEST_CASE("feasible point construction detects unreachable pairs") {
    // the requested y sits inside the loose window but outside the box range
    const std::vector<double> v = {0.2, 0.8};
    const std::vector<double> lam = {0.03, 0.03};
    CHECK(!d2d::feasible_init(v, lam, 0.04, 0.007).has_value());
    CHECK(!d2d::feasible_init(v, lam, 0.04, 0.029).has_value());
    const auto edge = d2d::feasible_init(v, lam, 0.04, 0.026);
    REQUIRE(edge.has_value());
    CHECK(edge->c[0] == doctest::Approx(0.01).epsilon(1e-12));
    CHECK(edge->c[1] == doctest::Approx(0.03).epsilon(1e-12));
}

TEST_CASE("feasible point construction spreads evenly under equal weights") {
    const auto c = d2d::feasible_init({0.5, 0.5}, {0.03, 0.03}, 0.04, 0.02);
    REQUIRE(c.has_value());
    CHECK(c->c[0] == doctest::Approx(0.02).epsilon(1e-14));
    CHECK(c->c[1] == doctest::Approx(0.02).epsilon(1e-14));
    CHECK(!d2d::feasible_init({0.5, 0.5}, {0.03, 0.03}, 0.04, 0.021).has_value());
}

TEST_CASE("feasible point construction hits random reachable targets") {
    const auto v = kSplit3.weights(3.0);
    std::mt19937 rng(42);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<double> probe(3);
        double x = 0.0;
        for (std::size_t m = 0; m < 3; ++m) {
            probe[m] = unit(rng) * kSplit3.lambda[m];
            x += probe[m];
        }
        const double y = dot(v, probe);
        const auto c = d2d::feasible_init(v, kSplit3.lambda, x, y);
        REQUIRE(c.has_value());
        CHECK(sum(c->c) == doctest::Approx(x).epsilon(1e-10));
        CHECK(dot(v, c->c) == doctest::Approx(y).epsilon(1e-10));
        for (std::size_t m = 0; m < 3; ++m) {
            CHECK(c->c[m] >= -1e-15);
            CHECK(c->c[m] <= kSplit3.lambda[m] + 1e-15);
        }
    }
}

TEST_CASE("pinned active ratios, reference values") {
    const SystemParams p = default_params();
    const auto v = kSplit2.weights(3.0);
    const double y_mid = 0.011476132207893461;
    const auto rho = d2d::rho_from_totals(p, v, 0.04, 0.02, y_mid);
    CHECK(rho[0] == doctest::Approx(0.2999882081595614).epsilon(1e-12));
    CHECK(rho[1] == doctest::Approx(0.7366537156387987).epsilon(1e-12));
    // no caching or no requesters: nobody transmits
    CHECK(d2d::rho_from_totals(p, v, 0.04, 0.02, 0.0) == std::vector<double>{0.0, 0.0});
    CHECK(d2d::rho_from_totals(p, v, 0.04, 0.04, y_mid) == std::vector<double>{0.0, 0.0});
}

TEST_CASE("pinned active ratios equal the strategy-level chain") {
    const SystemParams p = default_params();
    const GroupProfile g({0.1, 0.1, 0.1}, {0.1, 0.3, 0.6});
    const CachingStrategy s{{0.05, 0.09, 0.08}};
    const auto v = g.weights(3.0);
    const auto rho_xy =
        d2d::rho_from_totals(p, v, g.total_density(), sum(s.c), dot(v, s.c));
    const auto rho_full = d2d::active_ratio(p, g, s, d2d::assoc_prob(p, g, s));
    for (std::size_t m = 0; m < 3; ++m)
        CHECK(rho_xy[m] == doctest::Approx(rho_full[m]).epsilon(1e-12));
}

TEST_CASE("inner gradient matches finite differences") {
    const SystemParams p = default_params();
    const auto v = kSplit3.weights(3.0);
    const double x_bar = 0.03;
    const double y_bar = 0.015;
    const auto rho = d2d::rho_from_totals(p, v, 0.06, x_bar, y_bar);
    std::mt19937 rng(11);
    std::uniform_real_distribution<double> unit(0.1, 0.9);
    for (int trial = 0; trial < 100; ++trial) {
        std::vector<double> c(3);
        for (auto& cm : c) cm = unit(rng) * 0.02;
        const auto g = d2d::inner_gradient(p, v, y_bar, rho, c);
        for (std::size_t m = 0; m < 3; ++m) {
            const double h = 1e-6;
            std::vector<double> up = c, dn = c;
            up[m] += h;
            dn[m] -= h;
            const double fd = (d2d::inner_objective(p, v, y_bar, rho, up) -
                               d2d::inner_objective(p, v, y_bar, rho, dn)) /
                              (2.0 * h);
            CHECK(std::abs(fd - g[m]) / std::abs(g[m]) <= 1e-6);
        }
    }
}

TEST_CASE("inner curvature is strictly negative") {
    const SystemParams p = default_params();
    const auto v = kSplit3.weights(3.0);
    const auto rho = d2d::rho_from_totals(p, v, 0.06, 0.03, 0.015);
    std::mt19937 rng(13);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (int trial = 0; trial < 100; ++trial) {
        std::vector<double> c(3);
        for (std::size_t m = 0; m < 3; ++m) c[m] = unit(rng) * kSplit3.lambda[m];
        const auto h = d2d::inner_hessian_diag(p, v, 0.015, rho, c);
        for (double hm : h) CHECK(hm < 0.0);
    }
}

TEST_CASE("projected direction annihilates both constraint rows") {
    const auto v = kSplit3.weights(3.0);
    std::mt19937 rng(17);
    std::uniform_real_distribution<double> unit(-1.0, 1.0);
    for (int trial = 0; trial < 100; ++trial) {
        std::vector<double> g(3);
        for (auto& gm : g) gm = unit(rng);
        const auto p = d2d::project_direction(v, g);
        CHECK(std::abs(sum(p)) <= 1e-12);
        CHECK(std::abs(dot(v, p)) <= 1e-12);
        // applying the projector again must not move the vector
        const auto pp = d2d::project_direction(v, p);
        for (std::size_t m = 0; m < 3; ++m) CHECK(std::abs(pp[m] - p[m]) <= 1e-10);
    }
}

TEST_CASE("projection falls back to the mass constraint for equal weights") {
    const std::vector<double> g = {0.3, 0.7, 0.2};
    const auto p = d2d::project_direction({0.5, 0.5, 0.5}, g);
    const double mean = (0.3 + 0.7 + 0.2) / 3.0;
    for (std::size_t m = 0; m < 3; ++m)
        CHECK(p[m] == doctest::Approx(g[m] - mean).epsilon(1e-14));
    // one group: fully pinned
    const auto p1 = d2d::project_direction({0.7}, {0.9});
    CHECK(p1[0] == 0.0);
}

TEST_CASE("projection rejects nearly dependent constraint rows") {
    CHECK_THROWS_AS(d2d::project_direction({1.0, 1.0 + 3e-10}, {0.1, 0.2}),
                    d2d::singular_projection_error);
}

TEST_CASE("inner ascent is trivial for a single group") {
    const SystemParams p = default_params();
    const GroupProfile g({0.05}, {1.0});
    const auto res = d2d::inner_maximize(p, g, 0.02, 0.02, GridSpec{});
    CHECK(res.iterations == 0);
    CHECK(res.c.c[0] == doctest::Approx(0.02).epsilon(1e-12));
}

TEST_CASE("inner ascent matches a brute-force segment sweep, two groups") {
    const SystemParams p = default_params();
    const auto v = kSplit2.weights(3.0);
    const double x_bar = 0.02;
    const auto [y_lo, y_hi] = d2d::y_bounds(v, kSplit2.lambda, x_bar);

    // column maximum over the y grid, as the outer solver would see it
    double col_best = -1.0;
    const GridSpec spec{};
    for (int k = 0; k <= 200; ++k) {
        const double y = y_lo + (y_hi - y_lo) * k / 200.0;
        const auto init = d2d::feasible_init(v, kSplit2.lambda, x_bar, y);
        if (!init) continue;
        const auto res = d2d::inner_maximize(p, kSplit2, x_bar, y, spec, init);
        col_best = std::max(col_best, res.objective);
    }

    // direct sweep of the one-degree segment sum c = x, box
    double seg_best = -1.0;
    for (int i = 0; i <= 4000; ++i) {
        const double c1 = kSplit2.lambda[0] * i / 4000.0;
        const double c2 = x_bar - c1;
        if (c2 < 0.0 || c2 > kSplit2.lambda[1]) continue;
        const std::vector<double> c = {c1, c2};
        const double y = dot(v, c);
        const auto rho = d2d::rho_from_totals(p, v, kSplit2.total_density(), x_bar, y);
        seg_best = std::max(seg_best, d2d::inner_objective(p, v, y, rho, c));
    }
    CHECK(std::abs(col_best - seg_best) <= 1e-4);
}

TEST_CASE("inner ascent matches the reduced segment, three groups") {
    const SystemParams p = default_params();
    const auto v = kSplit3.weights(3.0);
    const double x_bar = 0.02;
    const auto [y_lo, y_hi] = d2d::y_bounds(v, kSplit3.lambda, x_bar);
    const double y_bar = 0.5 * (y_lo + y_hi);
    const auto res = d2d::inner_maximize(p, kSplit3, x_bar, y_bar, GridSpec{});
    const auto rho = d2d::rho_from_totals(p, v, kSplit3.total_density(), x_bar, y_bar);

    // both totals fixed: c_3 parameterizes the remaining line
    double seg_best = -1.0;
    for (int i = 0; i <= 20000; ++i) {
        const double c3 = kSplit3.lambda[2] * i / 20000.0;
        const double a = x_bar - c3;
        const double b = y_bar - v[2] * c3;
        const double c2 = (b - v[0] * a) / (v[1] - v[0]);
        const double c1 = a - c2;
        if (c1 < 0.0 || c1 > kSplit3.lambda[0] || c2 < 0.0 || c2 > kSplit3.lambda[1])
            continue;
        seg_best =
            std::max(seg_best, d2d::inner_objective(p, v, y_bar, rho, {c1, c2, c3}));
    }
    REQUIRE(seg_best > 0.0);
    CHECK(res.objective >= seg_best - 1e-6);
    CHECK(res.objective <= seg_best + 1e-6);
    CHECK(sum(res.c.c) == doctest::Approx(x_bar).epsilon(1e-8));
    CHECK(dot(v, res.c.c) == doctest::Approx(y_bar).epsilon(1e-8));
}

TEST_CASE("inner ascent never backtracks") {
    const SystemParams p = default_params();
    const double x_bar = 0.025;
    const auto v = kSplit3.weights(3.0);
    const auto [y_lo, y_hi] = d2d::y_bounds(v, kSplit3.lambda, x_bar);
    const auto res =
        d2d::inner_maximize(p, kSplit3, x_bar, 0.5 * (y_lo + y_hi), GridSpec{});
    double prev = -1.0;
    for (double f : res.objective_trace) {
        CHECK(f >= prev - 1e-12);
        prev = f;
    }
}

TEST_CASE("inner ascent accepts a warm start at the optimum") {
    const SystemParams p = default_params();
    const double x_bar = 0.02;
    const auto v = kSplit3.weights(3.0);
    const auto [y_lo, y_hi] = d2d::y_bounds(v, kSplit3.lambda, x_bar);
    const double y_bar = 0.5 * (y_lo + y_hi);
    const auto first = d2d::inner_maximize(p, kSplit3, x_bar, y_bar, GridSpec{});
    const auto again =
        d2d::inner_maximize(p, kSplit3, x_bar, y_bar, GridSpec{}, first.c);
    CHECK(again.iterations <= 2);
    // one vanishing correction step is allowed before the delta stop fires
    for (std::size_t m = 0; m < 3; ++m)
        CHECK(std::abs(again.c.c[m] - first.c.c[m]) <= 1e-10);
}

TEST_CASE("outer solver handles an empty network") {
    const SystemParams p = default_params();
    const GroupProfile g({0.0, 0.0}, {0.4, 0.6});
    const auto sol = d2d::solve_exact(p, g);
    CHECK(sol.gain == 0.0);
    CHECK(sol.c_star.c == std::vector<double>{0.0, 0.0});
}

TEST_CASE("outer solver rejects negative steps") {
    const SystemParams p = default_params();
    CHECK_THROWS_AS(d2d::solve_exact(p, kSplit2, GridSpec{-1.0, 0.0, 1e-9}),
                    std::domain_error);
    CHECK_THROWS_AS(d2d::solve_exact(p, kSplit2, GridSpec{0.0, 0.0, 0.0}),
                    std::domain_error);
}

TEST_CASE("outer solver result is internally consistent") {
    const SystemParams p = default_params();
    const auto sol = d2d::solve_exact(p, kSplit2);
    CHECK(sol.gain > 0.0);
    const auto v = kSplit2.weights(3.0);
    CHECK(sum(sol.c_star.c) == doctest::Approx(sol.x_star).epsilon(1e-8));
    CHECK(dot(v, sol.c_star.c) == doctest::Approx(sol.y_star).epsilon(1e-8));
    for (std::size_t m = 0; m < 2; ++m) {
        CHECK(sol.c_star.c[m] >= 0.0);
        CHECK(sol.c_star.c[m] <= kSplit2.lambda[m] + 1e-12);
    }
    // the reported gain is the trace maximum and reproduces the metric chain
    double trace_max = 0.0;
    double prev_x = -1.0;
    for (const auto& pt : sol.grid_trace) {
        CHECK(pt.x >= prev_x);
        prev_x = std::max(prev_x, pt.x);
        trace_max = std::max(trace_max, pt.gain);
    }
    CHECK(sol.gain == trace_max);
    const d2d::Metrics m = d2d::offload_gain(p, kSplit2, sol.c_star);
    CHECK(m.offload_gain == doctest::Approx(sol.gain).epsilon(1e-6));
}

TEST_CASE("outer solver is deterministic") {
    const SystemParams p = default_params();
    const GridSpec spec{0.0005, 0.0005, 1e-9};
    const auto a = d2d::solve_exact(p, kSplit2, spec);
    const auto b = d2d::solve_exact(p, kSplit2, spec);
    CHECK(a.gain == b.gain);
    CHECK(a.x_star == b.x_star);
    CHECK(a.y_star == b.y_star);
    CHECK(a.c_star.c == b.c_star.c);
    CHECK(a.grid_trace.size() == b.grid_trace.size());
}

TEST_CASE("outer solver agrees with the equal-bias sweep") {
    const SystemParams p = default_params();
    const GroupProfile g({0.02, 0.02}, {0.5, 0.5});
    const double step = 1e-4;
    const auto exact = d2d::solve_exact(p, g, GridSpec{step, 0.0, 1e-9});
    const auto unb = d2d::solve_unbiased(p, g, step);
    CHECK(std::abs(exact.x_star - unb.x_star) <= step + 1e-12);
    CHECK(std::abs(exact.gain - unb.gain) <= 0.005 * unb.gain);
}
