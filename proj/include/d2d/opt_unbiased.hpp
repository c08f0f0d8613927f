#pragma once

#include "d2d/model.hpp"

#include <utility>
#include <vector>

namespace d2d {

struct UnbiasedSolution {
    CachingStrategy c_star;
    double x_star = 0.0;
    double gain = 0.0;
    std::vector<std::pair<double, double>> trace;  // (x, gain at x)
};

// spreads a total density as evenly as the per-group caps allow
CachingStrategy inner_allocate(const std::vector<double>& lambda, double x_bar);
CachingStrategy inner_allocate(const GroupProfile& groups, double x_bar);

// shared active ratio of the equal-bias case, E(x) = 1 - exp(-pi R^2 x)
double unbiased_active_ratio(const SystemParams& params, const GroupProfile& groups,
                             double x_bar);

// offloading gain of the evenly-spread allocation at total density x_bar
double unbiased_gain_at(const SystemParams& params, const GroupProfile& groups, double x_bar);

// 1-D sweep over the total caching density; step_x <= 0 picks lambda_0/1000
UnbiasedSolution solve_unbiased(const SystemParams& params, const GroupProfile& groups,
                                double step_x = 0.0);

}  // namespace d2d
