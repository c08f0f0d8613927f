#include "d2d/figures.hpp"

#include "d2d/baselines.hpp"
#include "d2d/errors.hpp"
#include "d2d/opt_asymptotic.hpp"
#include "d2d/opt_exact.hpp"
#include "d2d/opt_unbiased.hpp"
#include "d2d/parallel.hpp"

#include <cmath>
#include <cstdio>
#include <stdexcept>
#include <utility>

namespace d2d {

namespace {

constexpr double kZ99 = 2.5758293035489004;
constexpr std::uint64_t kSaltInit = 0x696e6974ULL;

void set_group(ExperimentConfig& cfg, std::size_t index1, double lambda, double bias) {
    if (cfg.groups.size() < index1) cfg.groups.resize(index1);
    cfg.groups[index1 - 1].lambda = lambda;
    cfg.groups[index1 - 1].bias = bias;
}

std::vector<double> grid_or(const ExperimentConfig& cfg, std::vector<double> fallback) {
    return cfg.sweep_values.empty() ? std::move(fallback) : cfg.sweep_values;
}

std::string alpha_tag(double alpha) {
    char buf[24];
    std::snprintf(buf, sizeof buf, "a%g", alpha);
    return buf;
}

std::string r_tag(double r) {
    char buf[24];
    std::snprintf(buf, sizeof buf, "r%g", r);
    return buf;
}

CachingStrategy required_strategy(const ExperimentConfig& cfg) {
    const auto strategy = make_strategy(cfg);
    if (!strategy)
        throw config_error("groups: this figure needs groups.<m>.cache densities");
    return *strategy;
}

// figs 1 and 3: published threshold sweep on the three-group reference config
FigureTable fig_threshold_validation(const ExperimentConfig& cfg) {
    FigureTable out;
    const std::vector<double> gammas = grid_or(cfg, {0.0, 2.0, 4.0, 6.0, 8.0, 10.0});
    const GroupProfile groups = make_groups(cfg);
    const CachingStrategy strategy = required_strategy(cfg);

    for (double alpha : {3.0, 4.0}) {
        ExperimentConfig point = cfg;
        point.alpha = alpha;
        std::vector<double> gamma_linear;
        for (double g : gammas) {
            point.gamma_th_db = g;
            const SystemParams p = make_system(point);
            gamma_linear.push_back(p.gamma_th);
            out.rows.push_back(
                {g, "analytic_" + alpha_tag(alpha),
                 success_prob(p, groups, strategy).success_prob, std::nullopt});
        }
        const auto curve = mc_success_curve(make_system(point), gamma_linear, groups,
                                            strategy, make_sim(cfg));
        for (std::size_t k = 0; k < gammas.size(); ++k)
            out.rows.push_back({gammas[k], "simulated_" + alpha_tag(alpha), curve[k].mean,
                                curve[k].ci99_half});
    }
    return out;
}

ExperimentConfig with_uniform_density(const ExperimentConfig& cfg, double lambda) {
    ExperimentConfig point = cfg;
    for (GroupSpec& g : point.groups) {
        g.lambda = lambda;
        g.cache = 0.5 * lambda;
    }
    return point;
}

FigureTable fig_density_validation(const ExperimentConfig& cfg) {
    FigureTable out;
    const std::vector<double> lambdas = grid_or(cfg, {0.02, 0.04, 0.06, 0.08, 0.1});
    for (double r : {5.0, 15.0, 30.0}) {
        for (double lambda : lambdas) {
            ExperimentConfig point = with_uniform_density(cfg, lambda);
            point.r_max = r;
            const SystemParams p = make_system(point);
            const GroupProfile groups = make_groups(point);
            const CachingStrategy strategy = required_strategy(point);
            out.rows.push_back({lambda, "analytic_" + r_tag(r),
                                success_prob(p, groups, strategy).success_prob,
                                std::nullopt});
            const SimEstimate est =
                estimate(p, groups, strategy, make_sim(point), SimMetric::success_prob);
            out.rows.push_back(
                {lambda, "simulated_" + r_tag(r), est.mean, est.ci99_half});
        }
    }
    return out;
}

double asymptotic_gap(const SystemParams& p, const GroupProfile& groups,
                      const CachingStrategy& strategy) {
    const double ps = success_prob(p, groups, strategy).success_prob;
    return std::abs(ps - ps_infinity(p, groups, strategy, strategy.total()));
}

FigureTable fig_gap_threshold(const ExperimentConfig& cfg) {
    FigureTable out;
    const std::vector<double> gammas = grid_or(cfg, {0.0, 2.0, 4.0, 6.0, 8.0, 10.0});
    const GroupProfile groups = make_groups(cfg);
    const CachingStrategy strategy = required_strategy(cfg);
    for (double alpha : {3.0, 4.0}) {
        for (double r : {5.0, 15.0}) {
            for (double g : gammas) {
                ExperimentConfig point = cfg;
                point.alpha = alpha;
                point.r_max = r;
                point.gamma_th_db = g;
                out.rows.push_back({g, "gap_" + alpha_tag(alpha) + "_" + r_tag(r),
                                    asymptotic_gap(make_system(point), groups, strategy),
                                    std::nullopt});
            }
        }
    }
    return out;
}

FigureTable fig_gap_density(const ExperimentConfig& cfg) {
    FigureTable out;
    const std::vector<double> lambdas = grid_or(cfg, {0.02, 0.04, 0.06, 0.08, 0.1});
    for (double r : {5.0, 15.0, 30.0}) {
        for (double lambda : lambdas) {
            ExperimentConfig point = with_uniform_density(cfg, lambda);
            point.r_max = r;
            out.rows.push_back({lambda, "gap_" + r_tag(r),
                                asymptotic_gap(make_system(point), make_groups(point),
                                               required_strategy(point)),
                                std::nullopt});
        }
    }
    return out;
}

// caps respected, total preserved; spill from saturated groups is
// redistributed over the remaining ones in proportion to the draws
CachingStrategy random_feasible(const std::vector<double>& lambda, double x_bar, Rng& rng) {
    const std::size_t m_count = lambda.size();
    std::vector<double> draw(m_count);
    for (double& d : draw) d = rng.next_exp();

    CachingStrategy out;
    out.c.assign(m_count, 0.0);
    std::vector<bool> open(m_count, true);
    double remaining = x_bar;
    for (std::size_t round = 0; round <= m_count && remaining > 1e-15; ++round) {
        double wsum = 0.0;
        for (std::size_t m = 0; m < m_count; ++m)
            if (open[m]) wsum += draw[m];
        if (wsum <= 0.0) break;
        double spill = 0.0;
        for (std::size_t m = 0; m < m_count; ++m) {
            if (!open[m]) continue;
            out.c[m] += remaining * draw[m] / wsum;
            if (out.c[m] >= lambda[m]) {
                spill += out.c[m] - lambda[m];
                out.c[m] = lambda[m];
                open[m] = false;
            }
        }
        remaining = spill;
    }
    return out;
}

FigureTable fig_traces(const ExperimentConfig& cfg) {
    FigureTable out;
    const SystemParams p = make_system(cfg);
    const GroupProfile groups = make_groups(cfg);
    const double x_bar = cfg.x_bar > 0.0 ? cfg.x_bar : 0.02;
    if (x_bar > groups.total_density())
        throw config_error("solver.x_bar: exceeds the total user density");
    const SorOptions options = make_sor(cfg);

    std::vector<std::pair<std::string, CachingStrategy>> starts;
    starts.emplace_back("uniform", inner_allocate(groups.lambda, x_bar));
    for (int k = 1; k <= 2; ++k) {
        Rng rng(cfg.seed, 0, kSaltInit, static_cast<std::uint64_t>(k));
        starts.emplace_back("random_" + std::to_string(k),
                            random_feasible(groups.lambda, x_bar, rng));
    }

    for (const auto& [name, init] : starts) {
        const SorState state = solve_sor(p, groups, x_bar, options, init);
        for (std::size_t k = 0; k < state.beta_sum_trace.size(); ++k)
            out.rows.push_back({static_cast<double>(k), name, state.beta_sum_trace[k],
                                std::nullopt});
    }
    return out;
}

FigureTable fig_gain_gap_vs_range(const ExperimentConfig& cfg) {
    FigureTable out;
    const std::vector<double> rs = grid_or(cfg, {5.0, 10.0, 15.0, 20.0, 25.0, 30.0});
    const GroupProfile groups = make_groups(cfg);
    for (double alpha : {3.0, 4.0}) {
        for (double r : rs) {
            ExperimentConfig point = cfg;
            point.alpha = alpha;
            point.r_max = r;
            const SystemParams p = make_system(point);
            out.rows.push_back({r, "exact_" + alpha_tag(alpha),
                                solve_exact(p, groups, make_grid(point)).gain,
                                std::nullopt});
            out.rows.push_back({r, "asymptotic_" + alpha_tag(alpha),
                                solve_asymptotic(p, groups, point.step_x, make_sor(point)).gain_lower,
                                std::nullopt});
        }
    }
    return out;
}

void policy_rows(FigureTable& out, double x, const ExperimentConfig& point) {
    const SystemParams p = make_system(point);
    const GroupProfile groups = make_groups(point);
    const double delta = delta_x(point);
    out.rows.push_back(
        {x, "exact", solve_exact(p, groups, make_grid(point)).gain, std::nullopt});
    out.rows.push_back({x, "asymptotic",
                        solve_asymptotic(p, groups, point.step_x, make_sor(point)).gain_lower, std::nullopt});
    out.rows.push_back({x, "uniform",
                        offload_gain(p, groups, policy_uniform(p, groups, delta)).offload_gain,
                        std::nullopt});
    out.rows.push_back({x, "one_ut",
                        offload_gain(p, groups, policy_one_ut(groups, delta)).offload_gain,
                        std::nullopt});
}

FigureTable fig_gain_vs_density(const ExperimentConfig& cfg) {
    FigureTable out;
    for (double lambda1 : grid_or(cfg, {0.02, 0.04, 0.06, 0.08, 0.1})) {
        ExperimentConfig point = cfg;
        point.groups[0].lambda = lambda1;
        policy_rows(out, lambda1, point);
    }
    return out;
}

FigureTable fig_gain_vs_bias(const ExperimentConfig& cfg) {
    FigureTable out;
    for (double b1 : grid_or(cfg, {0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9})) {
        ExperimentConfig point = cfg;
        point.groups[0].bias = b1;
        point.groups[1].bias = 1.0 - b1;
        policy_rows(out, b1, point);
    }
    return out;
}

FigureTable fig_gain_vs_threshold(const ExperimentConfig& cfg) {
    FigureTable out;
    for (double g : grid_or(cfg, {0.0, 2.0, 4.0, 6.0, 8.0, 10.0})) {
        ExperimentConfig point = cfg;
        point.gamma_th_db = g;
        policy_rows(out, g, point);
    }
    return out;
}

FigureTable fig_gain_vs_alpha(const ExperimentConfig& cfg) {
    FigureTable out;
    for (double alpha : grid_or(cfg, {3.0, 3.5, 4.0, 4.5, 5.0})) {
        ExperimentConfig point = cfg;
        point.alpha = alpha;
        policy_rows(out, alpha, point);
    }
    return out;
}

void caching_rows(FigureTable& out, double x, const std::string& suffix,
                  const ExperimentConfig& point) {
    const CachingStrategy c =
        solve_asymptotic(make_system(point), make_groups(point), point.step_x, make_sor(point)).c_star;
    out.rows.push_back({x, "c1_" + suffix, c.c[0], std::nullopt});
    out.rows.push_back({x, "c2_" + suffix, c.c[1], std::nullopt});
}

FigureTable fig_caching_vs_social(const ExperimentConfig& cfg) {
    FigureTable out;
    const double lambda2 = cfg.groups[1].lambda.value_or(0.1);
    for (double ratio : grid_or(cfg, {0.2, 0.4, 0.6, 0.8, 1.0, 1.2, 1.4, 1.6, 1.8, 2.0})) {
        ExperimentConfig point = cfg;
        point.groups[0].lambda = ratio * lambda2;
        caching_rows(out, ratio, "density", point);
    }
    for (double b1 : {0.1, 0.15, 0.2, 0.25, 0.3, 0.35, 0.4, 0.45, 0.5}) {
        ExperimentConfig point = cfg;
        point.groups[0].lambda = lambda2;
        point.groups[0].bias = b1;
        point.groups[1].bias = 1.0 - b1;
        caching_rows(out, b1 / (1.0 - b1), "bias", point);
    }
    return out;
}

FigureTable fig_caching_vs_radio(const ExperimentConfig& cfg) {
    FigureTable out;
    for (double g : grid_or(cfg, {0.0, 2.0, 4.0, 6.0, 8.0, 10.0})) {
        ExperimentConfig point = cfg;
        point.gamma_th_db = g;
        caching_rows(out, g, "gamma", point);
    }
    for (double alpha : {3.0, 3.5, 4.0, 4.5, 5.0}) {
        ExperimentConfig point = cfg;
        point.alpha = alpha;
        caching_rows(out, alpha, "alpha", point);
    }
    return out;
}

}  // namespace

ExperimentConfig figure_defaults(int figure_id) {
    ExperimentConfig cfg;
    cfg.figure_id = figure_id;
    switch (figure_id) {
        case 1:
        case 3:
            set_group(cfg, 1, 0.1, 0.1);
            set_group(cfg, 2, 0.1, 0.3);
            set_group(cfg, 3, 0.1, 0.6);
            cfg.groups[0].cache = 0.05;
            cfg.groups[1].cache = 0.09;
            cfg.groups[2].cache = 0.08;
            break;
        case 2:
        case 4:
            set_group(cfg, 1, 0.02, 0.1);
            set_group(cfg, 2, 0.02, 0.3);
            set_group(cfg, 3, 0.02, 0.6);
            for (GroupSpec& g : cfg.groups) g.cache = 0.01;
            break;
        case 5:
        case 6:
        case 7:
            set_group(cfg, 1, 0.02, 0.1);
            set_group(cfg, 2, 0.02, 0.9);
            break;
        case 8:
            set_group(cfg, 1, 0.04, 0.1);
            set_group(cfg, 2, 0.02, 0.9);
            break;
        case 9:
        case 10:
            set_group(cfg, 1, 0.03, 0.1);
            set_group(cfg, 2, 0.01, 0.9);
            break;
        case 11:
            set_group(cfg, 1, 0.02, 0.3);
            set_group(cfg, 2, 0.1, 0.7);
            break;
        case 12:
            set_group(cfg, 1, 0.05, 10.0 / 11.0);
            set_group(cfg, 2, 0.05, 1.0 / 11.0);
            break;
        default:
            throw config_error("figure.id: known figures are 1..12");
    }
    return cfg;
}

FigureTable build_figure(const ExperimentConfig& cfg) {
    const int id = cfg.figure_id;
    if ((id == 8 || id == 11 || id == 12) && cfg.groups.size() != 2)
        throw config_error("groups: figure " + std::to_string(id) +
                           " is defined for exactly two groups");
    switch (cfg.figure_id) {
        case 1: return fig_threshold_validation(cfg);
        case 2: return fig_density_validation(cfg);
        case 3: return fig_gap_threshold(cfg);
        case 4: return fig_gap_density(cfg);
        case 5: return fig_traces(cfg);
        case 6: return fig_gain_gap_vs_range(cfg);
        case 7: return fig_gain_vs_density(cfg);
        case 8: return fig_gain_vs_bias(cfg);
        case 9: return fig_gain_vs_threshold(cfg);
        case 10: return fig_gain_vs_alpha(cfg);
        case 11: return fig_caching_vs_social(cfg);
        case 12: return fig_caching_vs_radio(cfg);
        default: throw config_error("figure.id: known figures are 1..12");
    }
}

std::vector<CurvePoint> mc_success_curve(const SystemParams& params,
                                         const std::vector<double>& gamma_linear,
                                         const GroupProfile& groups,
                                         const CachingStrategy& strategy,
                                         const SimConfig& sim) {
    validate_sim_config(sim);
    validate_strategy(groups, strategy);
    const std::size_t k_count = gamma_linear.size();
    const std::size_t n = static_cast<std::size_t>(sim.realizations);

    std::vector<std::uint8_t> hit(n * k_count, 0);
    std::vector<std::exception_ptr> failures(n);
    parallel_for(n, [&](std::size_t r) {
        try {
            Realization real = draw_realization(params, groups, strategy, sim, r);
            real.probe = Point{sim.window_side / 2.0, sim.window_side / 2.0};
            real = associate(std::move(real), params);
            UrId probe;
            probe.probe = true;
            const auto sir = measure_sir(real, params, probe);
            for (std::size_t k = 0; k < k_count; ++k)
                hit[r * k_count + k] =
                    sir.has_value() && *sir >= gamma_linear[k] ? 1 : 0;
        } catch (...) {
            failures[r] = std::current_exception();
        }
    });
    for (std::size_t r = 0; r < n; ++r)
        if (failures[r]) std::rethrow_exception(failures[r]);

    std::vector<CurvePoint> out(k_count);
    for (std::size_t k = 0; k < k_count; ++k) {
        double sum = 0.0;
        for (std::size_t r = 0; r < n; ++r) sum += hit[r * k_count + k];
        const double mean = sum / static_cast<double>(n);
        double ss = 0.0;
        for (std::size_t r = 0; r < n; ++r) {
            const double d = hit[r * k_count + k] - mean;
            ss += d * d;
        }
        out[k].mean = mean;
        out[k].ci99_half =
            n > 1 ? kZ99 * std::sqrt(ss / static_cast<double>(n - 1)) /
                        std::sqrt(static_cast<double>(n))
                  : 0.0;
    }
    return out;
}

}  // namespace d2d
