#pragma once

#include "d2d/model.hpp"

#include <optional>
#include <utility>
#include <vector>

namespace d2d {

struct SorOptions {
    double zeta = 0.5;
    double eps = 0.01;
    double tol = 1e-8;
    int max_iterations = 500;
};

// joint iterate of the sum-of-ratios solver: caching vector plus the
// multiplier pair (u, beta) and the per-group denominators
struct SorState {
    CachingStrategy c;
    std::vector<double> u;
    std::vector<double> beta;
    std::vector<double> phi;
    std::vector<double> weights;
    std::vector<double> rho_bar;
    int iterations = 0;
    bool converged = false;
    std::vector<double> beta_sum_trace;
};

struct AsymptoticSolution {
    CachingStrategy c_star;
    double x_star = 0.0;
    double gain_lower = 0.0;
    double gain_unbounded = 0.0;
    std::vector<double> beta_sum_trace;
    long long iterations_total = 0;
};

// distance-free active ratio in the unbounded-range regime
std::vector<double> rho_asymptotic(const std::vector<double>& weights, double lambda_0,
                                   const std::vector<double>& c, double x_bar);
std::vector<double> rho_asymptotic(const SystemParams& params, const GroupProfile& groups,
                                   const CachingStrategy& strategy, double x_bar);

// least weighted caching total over {sum c = x_bar, box}; greedy ascending fill
std::pair<double, std::vector<double>> y_min(const std::vector<double>& weights,
                                             const std::vector<double>& lambda,
                                             double x_bar);

// group-wise bound on the active ratio built from y_min, valid for every
// feasible split of x_bar
std::vector<double> rho_upper_bound(const SystemParams& params, const GroupProfile& groups,
                                    double x_bar);

double ps_infinity(const SystemParams& params, const GroupProfile& groups,
                   const CachingStrategy& strategy, double x_bar);
double ps_infinity_lower(const SystemParams& params, const GroupProfile& groups,
                         const CachingStrategy& strategy, double x_bar);

std::vector<double> sor_phi(const SystemParams& params, const std::vector<double>& weights,
                            const std::vector<double>& rho_bar, const std::vector<double>& c);

// exact solver of the linearized subproblem: greedy fill in descending order
// of the coefficient of c_k, ties broken by group index
CachingStrategy sor_inner_lp(const SystemParams& params, const SorState& state,
                             const GroupProfile& groups, double x_bar);

SorState solve_sor(const SystemParams& params, const GroupProfile& groups, double x_bar,
                   const SorOptions& options = {},
                   const std::optional<CachingStrategy>& init = std::nullopt);

AsymptoticSolution solve_asymptotic(const SystemParams& params, const GroupProfile& groups,
                                    double step_x = 0.0, const SorOptions& options = {});

}  // namespace d2d
