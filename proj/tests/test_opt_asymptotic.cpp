#include "doctest.h"

#include "d2d/errors.hpp"
#include "d2d/model.hpp"
#include "d2d/numerics.hpp"
#include "d2d/opt_asymptotic.hpp"
#include "d2d/opt_unbiased.hpp"

#include <cmath>
#include <cstddef>
#include <random>
#include <stdexcept>
#include <vector>

using d2d::CachingStrategy;
using d2d::GroupProfile;
using d2d::SorOptions;
using d2d::SystemParams;

namespace {

SystemParams default_params(double alpha = 3.0, double gamma_db = 3.0, double R = 15.0) {
    return SystemParams::from_db(alpha, gamma_db, 15.0, 20.0, 1e-4, R);
}

const GroupProfile kSplit2({0.02, 0.02}, {0.1, 0.9});
const GroupProfile kSplit3({0.02, 0.02, 0.02}, {0.1, 0.4, 0.5});
const GroupProfile kRef({0.1, 0.1, 0.1}, {0.1, 0.3, 0.6});
const CachingStrategy kRefCache{{0.05, 0.09, 0.08}};

double vsum(const std::vector<double>& a) {
    double s = 0.0;
    for (double x : a) s += x;
    return s;
}

double lower_objective(const SystemParams& p, const GroupProfile& g,
                       const std::vector<double>& c, double x_bar) {
    return d2d::ps_infinity_lower(p, g, CachingStrategy{c}, x_bar);
}

}  // namespace

TEST_CASE("unbounded active ratio vanishes without requesters or caching") {
    const auto zero_req = d2d::rho_asymptotic({0.5, 0.5}, 0.04, {0.02, 0.02}, 0.04);
    CHECK(zero_req == std::vector<double>{0.0, 0.0});
    const auto zero_cache = d2d::rho_asymptotic({0.5, 0.5}, 0.04, {0.0, 0.0}, 0.0);
    CHECK(zero_cache == std::vector<double>{0.0, 0.0});
}

TEST_CASE("unbounded active ratio saturates under heavy demand") {
    const auto rho = d2d::rho_asymptotic({1.0}, 1000.0, {0.001}, 0.001);
    CHECK(rho[0] >= 1.0 - 1e-6);
    CHECK(rho[0] <= 1.0);
}

TEST_CASE("unbounded active ratio, reference values and wide-range agreement") {
    const SystemParams p = default_params(3.0, 3.0, 1e4);
    const GroupProfile g({0.05, 0.03, 0.02}, {0.2, 0.5, 0.3});
    const CachingStrategy s{{0.02, 0.011, 0.006}};
    const double x_bar = 0.037;
    const auto rho = d2d::rho_asymptotic(p, g, s, x_bar);
    CHECK(rho[0] == doctest::Approx(0.6711388885283671).epsilon(1e-12));
    CHECK(rho[1] == doctest::Approx(0.8402933867021547).epsilon(1e-12));
    CHECK(rho[2] == doctest::Approx(0.7524135586409183).epsilon(1e-12));
    const auto rho_full = d2d::active_ratio(p, g, s, d2d::assoc_prob(p, g, s));
    for (std::size_t m = 0; m < 3; ++m)
        CHECK(std::abs(rho[m] - rho_full[m]) <= 1e-3);
}

TEST_CASE("least weighted total follows the ascending fill") {
    const auto [y, c] = d2d::y_min({0.2, 0.8}, {0.03, 0.03}, 0.04);
    CHECK(y == doctest::Approx(0.014).epsilon(1e-14));
    CHECK(c[0] == doctest::Approx(0.03).epsilon(1e-14));
    CHECK(c[1] == doctest::Approx(0.01).epsilon(1e-13));
    // exhaustive check on the same instance
    for (int i = 0; i <= 300; ++i) {
        const double c1 = 0.03 * i / 300.0;
        const double c2 = 0.04 - c1;
        if (c2 < 0.0 || c2 > 0.03) continue;
        CHECK(y <= 0.2 * c1 + 0.8 * c2 + 1e-12);
    }
}

TEST_CASE("least weighted total, ties and degenerate inputs") {
    const auto [yt, ct] = d2d::y_min({0.5, 0.5}, {0.01, 0.05}, 0.02);
    CHECK(yt == doctest::Approx(0.01).epsilon(1e-14));
    CHECK(ct[0] == doctest::Approx(0.01).epsilon(1e-14));
    CHECK(ct[1] == doctest::Approx(0.01).epsilon(1e-14));
    const auto [y0, c0] = d2d::y_min({0.3, 0.7}, {0.01, 0.01}, 0.0);
    CHECK(y0 == 0.0);
    CHECK(c0 == std::vector<double>{0.0, 0.0});
    CHECK_THROWS_AS(d2d::y_min({0.3, 0.7}, {0.01, 0.01}, 0.05), std::domain_error);
    CHECK_THROWS_AS(d2d::y_min({0.3, 0.7}, {0.01, 0.01}, -0.01), std::domain_error);
}

TEST_CASE("ratio bound dominates the unbounded ratio on random splits") {
    const SystemParams p = default_params();
    const double x_bar = 0.015;
    const auto rho_bar = d2d::rho_upper_bound(p, kSplit3, x_bar);
    std::mt19937 rng(31);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<double> c(3);
        double raw = 0.0;
        for (auto& cm : c) {
            cm = unit(rng) + 1e-3;
            raw += cm;
        }
        for (auto& cm : c) cm *= x_bar / raw;
        const auto rho = d2d::rho_asymptotic(p, kSplit3, CachingStrategy{c}, x_bar);
        for (std::size_t m = 0; m < 3; ++m) CHECK(rho_bar[m] >= rho[m] - 1e-15);
    }
}

TEST_CASE("ratio bound, reference values") {
    const SystemParams p = default_params();
    const auto rho_bar = d2d::rho_upper_bound(p, kRef, 0.22);
    CHECK(rho_bar[0] == doctest::Approx(0.1874653572843814).epsilon(1e-12));
    CHECK(rho_bar[1] == doctest::Approx(0.3421617286836339).epsilon(1e-12));
    CHECK(rho_bar[2] == doctest::Approx(0.4744412457299104).epsilon(1e-12));
    CHECK(d2d::rho_upper_bound(p, kRef, 0.0) == std::vector<double>(3, 0.0));
}

TEST_CASE("asymptotic success probability, reference values and bound order") {
    const SystemParams p = default_params();
    const double ps = d2d::ps_infinity(p, kRef, kRefCache, 0.22);
    const double ps_low = d2d::ps_infinity_lower(p, kRef, kRefCache, 0.22);
    CHECK(ps == doctest::Approx(0.7073232305917405).epsilon(1e-12));
    CHECK(ps_low == doctest::Approx(0.6646024954646175).epsilon(1e-12));
    CHECK(ps_low <= ps);
    CHECK(d2d::ps_infinity(p, kRef, CachingStrategy{{0.0, 0.0, 0.0}}, 0.0) == 0.0);
}

TEST_CASE("asymptotic success probability approaches one in the clean limit") {
    const SystemParams p = SystemParams::from_db(3.0, -300.0, 15.0, 20.0, 0.0, 15.0);
    const GroupProfile g({0.05}, {1.0});
    const double ps = d2d::ps_infinity_lower(p, g, CachingStrategy{{0.02}}, 0.02);
    CHECK(ps >= 1.0 - 1e-6);
    CHECK(ps <= 1.0);
}

TEST_CASE("bound stays below the unbounded variant on random splits") {
    const SystemParams p = default_params();
    std::mt19937 rng(37);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (int trial = 0; trial < 100; ++trial) {
        std::vector<double> c(3);
        double raw = 0.0;
        for (auto& cm : c) {
            cm = unit(rng) + 1e-3;
            raw += cm;
        }
        const double x_bar = 0.01 + 0.008 * unit(rng);
        for (auto& cm : c) cm *= x_bar / raw;
        const CachingStrategy s{c};
        CHECK(d2d::ps_infinity_lower(p, kSplit3, s, x_bar) <=
              d2d::ps_infinity(p, kSplit3, s, x_bar) + 1e-15);
    }
}

TEST_CASE("distance-limited and asymptotic success probabilities converge") {
    const double ps_limit = d2d::ps_infinity(default_params(), kRef, kRefCache, 0.22);
    double prev_gap = 1.0;
    for (double R : {5.0, 10.0, 15.0, 20.0, 30.0}) {
        const SystemParams p = default_params(3.0, 3.0, R);
        const double gap = std::abs(d2d::success_prob(p, kRef, kRefCache).success_prob -
                                    ps_limit);
        // the tail collapses below double resolution past R=10
        CHECK(gap <= prev_gap + 1e-12);
        prev_gap = gap;
    }
    const SystemParams p5 = default_params(3.0, 3.0, 5.0);
    CHECK(std::abs(d2d::success_prob(p5, kRef, kRefCache).success_prob - ps_limit) >= 1e-7);
}

TEST_CASE("linearized subproblem fills by index on equal coefficients") {
    const SystemParams p = default_params();
    const GroupProfile g({0.01, 0.05, 0.05}, {1.0 / 3, 1.0 / 3, 1.0 / 3});
    d2d::SorState state;
    state.weights = g.weights(p.alpha);
    state.u.assign(3, 1.0);
    state.beta.assign(3, 0.0);
    state.rho_bar.assign(3, 0.0);
    const auto c = d2d::sor_inner_lp(p, state, g, 0.03);
    CHECK(c.c[0] == doctest::Approx(0.01).epsilon(1e-14));
    CHECK(c.c[1] == doctest::Approx(0.02).epsilon(1e-14));
    CHECK(c.c[2] == 0.0);
}

TEST_CASE("linearized subproblem matches segment enumeration") {
    const SystemParams p = default_params();
    std::mt19937 rng(53);
    std::uniform_real_distribution<double> unit(0.1, 1.0);
    const auto v = kSplit2.weights(p.alpha);
    for (int trial = 0; trial < 20; ++trial) {
        d2d::SorState state;
        state.weights = v;
        state.u = {unit(rng) * 50.0, unit(rng) * 50.0};
        state.beta = {0.4 * unit(rng), 0.4 * unit(rng)};
        state.rho_bar = {unit(rng), unit(rng)};
        const double x_bar = 0.02;
        const auto got = d2d::sor_inner_lp(p, state, kSplit2, x_bar);
        auto objective = [&](const std::vector<double>& c) {
            const auto phi = d2d::sor_phi(p, v, state.rho_bar, c);
            double out = 0.0;
            for (std::size_t m = 0; m < 2; ++m)
                out += state.u[m] * (c[m] * v[m] - state.beta[m] * phi[m]);
            return out;
        };
        double best = -1e300;
        for (int i = 0; i <= 200; ++i) {
            const double c1 = 0.02 * i / 200.0;
            best = std::max(best, objective({c1, x_bar - c1}));
        }
        CHECK(objective(got.c) >= best - 1e-12);
    }
}

TEST_CASE("linearized subproblem is pinned when everything must be cached") {
    const SystemParams p = default_params();
    d2d::SorState state;
    state.weights = kSplit2.weights(p.alpha);
    state.u = {3.0, 55.0};
    state.beta = {0.9, 0.01};
    state.rho_bar = {0.2, 0.8};
    const auto c = d2d::sor_inner_lp(p, state, kSplit2, 0.04);
    CHECK(c.c[0] == doctest::Approx(0.02).epsilon(1e-14));
    CHECK(c.c[1] == doctest::Approx(0.02).epsilon(1e-14));
}

TEST_CASE("multiplier iteration rejects bad controls") {
    const SystemParams p = default_params();
    CHECK_THROWS_AS(d2d::solve_sor(p, kSplit2, 0.02, SorOptions{0.0, 0.01, 1e-8, 500}),
                    std::domain_error);
    CHECK_THROWS_AS(d2d::solve_sor(p, kSplit2, 0.02, SorOptions{1.0, 0.01, 1e-8, 500}),
                    std::domain_error);
    CHECK_THROWS_AS(d2d::solve_sor(p, kSplit2, 0.02, SorOptions{0.5, 1.0, 1e-8, 500}),
                    std::domain_error);
    CHECK_THROWS_AS(d2d::solve_sor(p, kSplit2, 0.02, SorOptions{0.5, 0.01, 0.0, 500}),
                    std::domain_error);
    CHECK_THROWS_AS(d2d::solve_sor(p, kSplit2, 0.02, SorOptions{0.5, 0.01, 1e-8, 0}),
                    std::domain_error);
    CHECK_THROWS_AS(d2d::solve_sor(p, kSplit2, 0.05), std::domain_error);
    CHECK_THROWS_AS(
        d2d::solve_sor(p, kSplit2, 0.02, SorOptions{}, CachingStrategy{{0.02, 0.02}}),
        std::domain_error);
}

TEST_CASE("multiplier iteration is immediate at the forced extremes") {
    const SystemParams p = default_params();
    const auto full = d2d::solve_sor(p, kSplit2, 0.04);
    CHECK(full.converged);
    CHECK(full.iterations <= 2);
    CHECK(full.c.c[0] == doctest::Approx(0.02).epsilon(1e-12));
    CHECK(full.c.c[1] == doctest::Approx(0.02).epsilon(1e-12));
    const auto empty = d2d::solve_sor(p, kSplit2, 0.0);
    CHECK(empty.converged);
    CHECK(empty.iterations <= 2);
    CHECK(empty.c.c == std::vector<double>{0.0, 0.0});
}

TEST_CASE("multiplier iteration reaches the brute-force optimum, two groups") {
    const SystemParams p = default_params();
    const double x_bar = 0.02;
    const auto state = d2d::solve_sor(p, kSplit2, x_bar);
    CHECK(state.converged);
    CHECK(state.iterations <= 500);

    for (std::size_t k = 1; k < state.beta_sum_trace.size(); ++k)
        CHECK(state.beta_sum_trace[k] >= state.beta_sum_trace[k - 1] - 1e-12);

    // converged multipliers reproduce the per-group ratios
    for (std::size_t m = 0; m < 2; ++m) {
        CHECK(std::abs(state.u[m] * state.phi[m] - 1.0) <= 1e-8);
        CHECK(std::abs(state.beta[m] * state.phi[m] -
                       state.c.c[m] * state.weights[m]) <= 1e-8);
    }
    // the ratio residual divides by phi, so the sum tracks the objective at
    // tol / min(phi) resolution
    const double ps_low = d2d::ps_infinity_lower(p, kSplit2, state.c, x_bar);
    CHECK(std::abs(vsum(state.beta) - ps_low) <= 1e-5);

    double brute = -1.0;
    for (int i = 0; i <= 100; ++i) {
        const double c1 = 0.02 * i / 100.0;
        brute = std::max(brute, lower_objective(p, kSplit2, {c1, x_bar - c1}, x_bar));
    }
    CHECK(std::abs(vsum(state.beta) - brute) <= 0.01 * brute);
}

TEST_CASE("multiplier iteration reaches the brute-force optimum, three groups") {
    const SystemParams p = default_params();
    const double x_bar = 0.02;
    const auto state = d2d::solve_sor(p, kSplit3, x_bar);
    CHECK(state.converged);
    for (std::size_t k = 1; k < state.beta_sum_trace.size(); ++k)
        CHECK(state.beta_sum_trace[k] >= state.beta_sum_trace[k - 1] - 1e-12);

    double brute = -1.0;
    for (int i = 0; i <= 100; ++i) {
        const double c1 = 0.02 * i / 100.0;
        for (int j = 0; i * 0.0002 + j * 0.0002 <= x_bar + 1e-12 && j <= 100; ++j) {
            const double c2 = 0.02 * j / 100.0;
            const double c3 = x_bar - c1 - c2;
            if (c3 < 0.0 || c3 > 0.02) continue;
            brute = std::max(brute, lower_objective(p, kSplit3, {c1, c2, c3}, x_bar));
        }
    }
    CHECK(std::abs(vsum(state.beta) - brute) <= 0.01 * brute);
}

TEST_CASE("multiplier iteration lands on one limit from any start") {
    const SystemParams p = default_params();
    const double x_bar = 0.02;
    const double reference = vsum(d2d::solve_sor(p, kSplit2, x_bar).beta);
    for (double split : {0.3, 0.77}) {
        const CachingStrategy init{{split * x_bar, (1.0 - split) * x_bar}};
        const auto state = d2d::solve_sor(p, kSplit2, x_bar, SorOptions{}, init);
        CHECK(state.converged);
        CHECK(std::abs(vsum(state.beta) - reference) <= 1e-6 * reference);
    }
}

TEST_CASE("multiplier iteration spreads evenly across equal trust") {
    const SystemParams p = default_params();
    const GroupProfile g({0.02, 0.02}, {0.5, 0.5});
    const auto even = d2d::solve_sor(p, g, 0.02);
    CHECK(even.converged);
    CHECK(even.iterations <= 2);
    CHECK(even.c.c[0] == doctest::Approx(0.01).epsilon(1e-12));
    const auto skew = d2d::solve_sor(p, g, 0.02, SorOptions{},
                                     CachingStrategy{{0.018, 0.002}});
    CHECK(skew.converged);
    CHECK(std::abs(skew.c.c[0] - 0.01) <= 1e-6);
    CHECK(std::abs(skew.c.c[1] - 0.01) <= 1e-6);
}

TEST_CASE("multiplier iteration reports a residual when starved of iterations") {
    const SystemParams p = default_params();
    CHECK_THROWS_AS(d2d::solve_sor(p, kSplit2, 0.02, SorOptions{0.5, 0.01, 1e-8, 1}),
                    d2d::non_convergence_error);
}

TEST_CASE("asymptotic sweep handles an empty network") {
    const SystemParams p = default_params();
    const GroupProfile g({0.0, 0.0}, {0.4, 0.6});
    const auto sol = d2d::solve_asymptotic(p, g);
    CHECK(sol.gain_lower == 0.0);
    CHECK(sol.c_star.c == std::vector<double>{0.0, 0.0});
}

TEST_CASE("asymptotic sweep matches a one-dimensional oracle, single group") {
    const SystemParams p = default_params();
    const GroupProfile g({0.05}, {1.0});
    const double step = 0.05 / 2000.0;
    const auto sol = d2d::solve_asymptotic(p, g, step);
    auto gain = [&](double x) {
        if (x <= 0.0 || x >= 0.05) return 0.0;
        return (0.05 - x) * lower_objective(p, g, {x}, x);
    };
    const double x_oracle = d2d::golden_section_max(gain, 0.0, 0.05, 1e-10);
    CHECK(std::abs(sol.gain_lower - gain(x_oracle)) <= 1e-6);
    CHECK(std::abs(sol.x_star - x_oracle) <= step);
    CHECK(sol.c_star.c[0] == doctest::Approx(sol.x_star).epsilon(1e-12));
}

TEST_CASE("asymptotic sweep result is internally consistent") {
    const SystemParams p = default_params();
    const auto sol = d2d::solve_asymptotic(p, kSplit2);
    CHECK(sol.gain_lower > 0.0);
    CHECK(sol.gain_unbounded >= sol.gain_lower - 1e-15);
    CHECK(vsum(sol.c_star.c) == doctest::Approx(sol.x_star).epsilon(1e-9));
    for (std::size_t m = 0; m < 2; ++m) {
        CHECK(sol.c_star.c[m] >= 0.0);
        CHECK(sol.c_star.c[m] <= kSplit2.lambda[m] + 1e-12);
    }
    CHECK(sol.gain_lower ==
          doctest::Approx((kSplit2.total_density() - sol.x_star) *
                          d2d::ps_infinity_lower(p, kSplit2, sol.c_star, sol.x_star))
              .epsilon(1e-12));
    for (std::size_t k = 1; k < sol.beta_sum_trace.size(); ++k)
        CHECK(sol.beta_sum_trace[k] >= sol.beta_sum_trace[k - 1] - 1e-12);
    CHECK(sol.iterations_total > 0);
}

TEST_CASE("asymptotic sweep tracks the exhaustive gain with distinct trust") {
    const SystemParams p = default_params();
    const auto sol = d2d::solve_asymptotic(p, kSplit2);
    // dense exhaustive maximization of the same surrogate objective
    double brute = -1.0;
    for (int k = 0; k <= 400; ++k) {
        const double x = 0.04 * k / 400.0;
        for (int i = 0; i <= 200; ++i) {
            const double c1 = std::min(0.02, x) * i / 200.0;
            const double c2 = x - c1;
            if (c2 < 0.0 || c2 > 0.02) continue;
            brute = std::max(brute, (0.04 - x) * lower_objective(p, kSplit2, {c1, c2}, x));
        }
    }
    CHECK(std::abs(sol.gain_lower - brute) <= 0.01 * brute);
}

TEST_CASE("asymptotic sweep agrees with the even-spread scan on equal trust") {
    const SystemParams p = default_params();
    const GroupProfile g({0.02, 0.02}, {0.5, 0.5});
    const double step = 1e-4;
    const auto sol = d2d::solve_asymptotic(p, g, step);
    double best_gain = -1.0, best_x = 0.0;
    for (double x = 0.0; x < 0.04; x += step) {
        const auto c = d2d::inner_allocate(g.lambda, x);
        const double gain = (0.04 - x) * lower_objective(p, g, c.c, x);
        if (gain > best_gain) {
            best_gain = gain;
            best_x = x;
        }
    }
    CHECK(std::abs(sol.x_star - best_x) <= step + 1e-12);
    CHECK(std::abs(sol.gain_lower - best_gain) <= 1e-6);
}

TEST_CASE("asymptotic sweep is deterministic") {
    const SystemParams p = default_params();
    const auto a = d2d::solve_asymptotic(p, kSplit3, 0.06 / 50.0);
    const auto b = d2d::solve_asymptotic(p, kSplit3, 0.06 / 50.0);
    CHECK(a.gain_lower == b.gain_lower);
    CHECK(a.x_star == b.x_star);
    CHECK(a.c_star.c == b.c_star.c);
    CHECK(a.iterations_total == b.iterations_total);
}
