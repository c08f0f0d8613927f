#include "d2d/opt_unbiased.hpp"

#include "d2d/errors.hpp"
#include "d2d/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <stdexcept>

namespace d2d {

CachingStrategy inner_allocate(const std::vector<double>& lambda, double x_bar) {
    const double lam0 = std::accumulate(lambda.begin(), lambda.end(), 0.0);
    const double slack = 1e-9 * std::max(1.0, lam0);
    if (!(x_bar >= -slack && x_bar <= lam0 + slack))
        throw std::domain_error("total caching density outside [0, lambda_0]");
    x_bar = std::clamp(x_bar, 0.0, lam0);

    const std::size_t M = lambda.size();
    std::vector<std::size_t> order(M);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return lambda[a] < lambda[b]; });

    // saturate the smallest caps until the even share fits under the next cap
    double assigned = 0.0;
    double level = 0.0;
    std::size_t saturated = 0;
    for (; saturated < M; ++saturated) {
        level = (x_bar - assigned) / static_cast<double>(M - saturated);
        if (level <= lambda[order[saturated]]) break;
        assigned += lambda[order[saturated]];
    }
    if (saturated == M) level = 0.0;

    CachingStrategy out;
    out.c.assign(M, 0.0);
    for (std::size_t k = 0; k < M; ++k) {
        const std::size_t g = order[k];
        out.c[g] = k < saturated ? lambda[g] : std::min(level, lambda[g]);
    }
    return out;
}

CachingStrategy inner_allocate(const GroupProfile& groups, double x_bar) {
    return inner_allocate(groups.lambda, x_bar);
}

double unbiased_active_ratio(const SystemParams& params, const GroupProfile& groups,
                             double x_bar) {
    if (x_bar <= 0.0) return 0.0;
    const double lam0 = groups.total_density();
    const double lam_ur = lam0 - x_bar;
    if (lam_ur <= 0.0) return 0.0;
    const double area_R = M_PI * params.R * params.R;
    const double reach = -std::expm1(-area_R * x_bar);
    const double head = std::pow(1.0 + lam_ur * reach / (3.5 * x_bar), -3.5);
    const double cut = 3.5 * x_bar / reach;
    const double num = lower_incomplete_gamma(3.5, (lam_ur + cut) * area_R);
    const double den = lower_incomplete_gamma(3.5, cut * area_R);
    return 1.0 - head * num / den;
}

double unbiased_gain_at(const SystemParams& params, const GroupProfile& groups, double x_bar) {
    const double lam0 = groups.total_density();
    if (x_bar <= 0.0 || x_bar >= lam0) return 0.0;
    const CachingStrategy c = inner_allocate(groups, x_bar);
    const double rho = unbiased_active_ratio(params, groups, x_bar);
    const double area_R = M_PI * params.R * params.R;
    double sum = 0.0;
    for (std::size_t m = 0; m < groups.size(); ++m) {
        const double phi = area_R * (x_bar + params.lambda_B * params.theta_B +
                                     c.c[m] * rho * params.theta_I);
        sum += c.c[m] * f_kernel(phi);
    }
    return (lam0 - x_bar) * area_R * sum;
}

UnbiasedSolution solve_unbiased(const SystemParams& params, const GroupProfile& groups,
                                double step_x) {
    for (std::size_t m = 1; m < groups.size(); ++m) {
        if (std::abs(groups.bias[m] - groups.bias[0]) > 1e-12)
            throw bias_mismatch_error("equal-bias solver called with distinct biases");
    }

    UnbiasedSolution out;
    const double lam0 = groups.total_density();
    if (lam0 <= 0.0) {
        out.c_star.c.assign(groups.size(), 0.0);
        out.trace.emplace_back(0.0, 0.0);
        return out;
    }

    const double step = step_x > 0.0 ? step_x : lam0 / 1000.0;
    std::vector<double> xs;
    for (double x = 0.0; x < lam0; x += step) xs.push_back(x);
    xs.push_back(lam0);

    std::vector<double> gains(xs.size());
    parallel_for(xs.size(),
                 [&](std::size_t i) { gains[i] = unbiased_gain_at(params, groups, xs[i]); });

    std::size_t best = 0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        out.trace.emplace_back(xs[i], gains[i]);
        if (gains[i] > gains[best]) best = i;
    }
    out.x_star = xs[best];
    out.gain = gains[best];
    out.c_star = inner_allocate(groups, xs[best]);
    return out;
}

}  // namespace d2d
