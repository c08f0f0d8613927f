#pragma once

#include "d2d/model.hpp"

#include <optional>
#include <utility>
#include <vector>

namespace d2d {

struct GridSpec {
    double step_x = 0.0;       // <= 0 picks lambda_0/200
    double step_y = 0.0;       // <= 0 picks (y_high-y_low)/200 per x
    double convergence = 1e-9; // stop when the inner objective gains less than this
};

struct GridPoint {
    double x = 0.0;
    double y = 0.0;
    double gain = 0.0;
};

struct ExactSolution {
    CachingStrategy c_star;
    double x_star = 0.0;
    double y_star = 0.0;
    double gain = 0.0;
    std::vector<GridPoint> grid_trace;
    long long iterations_total = 0;
};

struct InnerResult {
    CachingStrategy c;
    double objective = 0.0;  // F = sum c_m f(phi_m), without the pi R^2 factor
    int iterations = 0;
    std::vector<double> objective_trace;  // F after each ascent step
};

// search window for the weighted density y at fixed total density x
std::pair<double, double> y_bounds(const std::vector<double>& weights,
                                   const std::vector<double>& lambda, double x_bar);

// any box point with sum c = x and sum v c = y, or nothing if the pair is
// unreachable; greedy exchange from the y-minimizing vertex
std::optional<CachingStrategy> feasible_init(const std::vector<double>& weights,
                                             const std::vector<double>& lambda, double x_bar,
                                             double y_bar);

// active ratios pinned by the totals (x, y) instead of the full strategy
std::vector<double> rho_from_totals(const SystemParams& params,
                                    const std::vector<double>& weights, double lambda_0,
                                    double x_bar, double y_bar);

double inner_objective(const SystemParams& params, const std::vector<double>& weights,
                       double y_bar, const std::vector<double>& rho,
                       const std::vector<double>& c);

std::vector<double> inner_gradient(const SystemParams& params,
                                   const std::vector<double>& weights, double y_bar,
                                   const std::vector<double>& rho,
                                   const std::vector<double>& c);

std::vector<double> inner_hessian_diag(const SystemParams& params,
                                       const std::vector<double>& weights, double y_bar,
                                       const std::vector<double>& rho,
                                       const std::vector<double>& c);

// null-space step of the two equality constraints sum c = x, sum v c = y;
// collapses to the single-constraint projector when all weights coincide
std::vector<double> project_direction(const std::vector<double>& weights,
                                      const std::vector<double>& gradient);

InnerResult inner_maximize(const SystemParams& params, const GroupProfile& groups, double x_bar,
                           double y_bar, const GridSpec& spec,
                           const std::optional<CachingStrategy>& init = std::nullopt);

ExactSolution solve_exact(const SystemParams& params, const GroupProfile& groups,
                          const GridSpec& spec = {});

}  // namespace d2d
