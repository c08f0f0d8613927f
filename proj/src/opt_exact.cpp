#include "d2d/opt_exact.hpp"

#include "d2d/errors.hpp"
#include "d2d/numerics.hpp"
#include "d2d/opt_unbiased.hpp"
#include "d2d/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace d2d {

namespace {

std::vector<std::size_t> ascending_by_weight(const std::vector<double>& v) {
    std::vector<std::size_t> order(v.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
    return order;
}

double phi_of(const SystemParams& params, double weight, double y_bar, double rho, double c) {
    const double area_R = M_PI * params.R * params.R;
    return area_R *
           (y_bar / weight + params.lambda_B * params.theta_B + rho * c * params.theta_I);
}

}  // namespace

std::pair<double, double> y_bounds(const std::vector<double>& weights,
                                   const std::vector<double>& lambda, double x_bar) {
    if (weights.empty() || weights.size() != lambda.size())
        throw std::domain_error("weights and lambda must be nonempty and equally sized");
    const double lam0 = std::accumulate(lambda.begin(), lambda.end(), 0.0);
    if (!(x_bar >= -1e-12 && x_bar <= lam0 + 1e-9 * std::max(1.0, lam0)))
        throw std::domain_error("total caching density outside [0, lambda_0]");
    x_bar = std::clamp(x_bar, 0.0, lam0);
    const auto [lo_it, hi_it] = std::minmax_element(weights.begin(), weights.end());
    double cap = 0.0;
    for (std::size_t m = 0; m < weights.size(); ++m) cap += weights[m] * lambda[m];
    return {*lo_it * x_bar, std::min(*hi_it * x_bar, cap)};
}

std::optional<CachingStrategy> feasible_init(const std::vector<double>& weights,
                                             const std::vector<double>& lambda, double x_bar,
                                             double y_bar) {
    const std::size_t M = weights.size();
    const auto [wlo, whi] = std::minmax_element(weights.begin(), weights.end());
    if (*whi - *wlo <= 1e-12 * std::max(1.0, *whi)) {
        // equal weights: y is not a free coordinate, start from the even spread
        if (std::abs(y_bar - *wlo * x_bar) > 1e-9 * std::max(1.0, x_bar)) return std::nullopt;
        return inner_allocate(lambda, x_bar);
    }
    const auto order = ascending_by_weight(weights);

    // phase 1: the y-minimizing vertex at total x
    std::vector<double> c(M, 0.0);
    double left = x_bar;
    for (std::size_t k = 0; k < M && left > 0.0; ++k) {
        const std::size_t g = order[k];
        const double take = std::min(left, lambda[g]);
        c[g] = take;
        left -= take;
    }
    if (left > 1e-12 * std::max(1.0, x_bar)) return std::nullopt;

    double y0 = 0.0;
    for (std::size_t m = 0; m < M; ++m) y0 += weights[m] * c[m];
    double need = y_bar - y0;
    const double tol = 1e-12 * std::max(1.0, std::abs(y_bar));
    if (need < -tol) return std::nullopt;

    // phase 2: trade mass from the lightest donors to the heaviest receivers
    std::size_t lo = 0;
    std::size_t hi = M;
    while (need > tol) {
        while (lo < M && c[order[lo]] <= 0.0) ++lo;
        while (hi > 0 && c[order[hi - 1]] >= lambda[order[hi - 1]]) --hi;
        if (lo >= M || hi == 0 || lo + 1 >= hi) break;
        const std::size_t d = order[lo];
        const std::size_t r = order[hi - 1];
        const double dv = weights[r] - weights[d];
        if (dv <= 0.0) break;
        const double t = std::min({c[d], lambda[r] - c[r], need / dv});
        if (!(t > 0.0)) break;
        c[d] -= t;
        c[r] += t;
        need -= t * dv;
    }
    if (need > tol) return std::nullopt;
    return CachingStrategy{std::move(c)};
}

std::vector<double> rho_from_totals(const SystemParams& params,
                                    const std::vector<double>& weights, double lambda_0,
                                    double x_bar, double y_bar) {
    const std::size_t M = weights.size();
    std::vector<double> rho(M, 0.0);
    const double lam_ur = lambda_0 - x_bar;
    if (y_bar <= 0.0 || lam_ur <= 0.0) return rho;
    const double area_R = M_PI * params.R * params.R;
    for (std::size_t m = 0; m < M; ++m) {
        if (weights[m] <= 0.0) continue;
        const double reach = -std::expm1(-area_R * y_bar / weights[m]);
        const double head = std::pow(1.0 + weights[m] * lam_ur * reach / (3.5 * y_bar), -3.5);
        const double cut = 3.5 * y_bar / (weights[m] * reach);
        const double num = lower_incomplete_gamma(3.5, (lam_ur + cut) * area_R);
        const double den = lower_incomplete_gamma(3.5, cut * area_R);
        rho[m] = 1.0 - head * num / den;
    }
    return rho;
}

double inner_objective(const SystemParams& params, const std::vector<double>& weights,
                       double y_bar, const std::vector<double>& rho,
                       const std::vector<double>& c) {
    double sum = 0.0;
    for (std::size_t m = 0; m < weights.size(); ++m) {
        if (weights[m] <= 0.0 || c[m] <= 0.0) continue;
        sum += c[m] * f_kernel(phi_of(params, weights[m], y_bar, rho[m], c[m]));
    }
    return sum;
}

std::vector<double> inner_gradient(const SystemParams& params,
                                   const std::vector<double>& weights, double y_bar,
                                   const std::vector<double>& rho,
                                   const std::vector<double>& c) {
    const double area_R = M_PI * params.R * params.R;
    std::vector<double> g(weights.size(), 0.0);
    for (std::size_t m = 0; m < weights.size(); ++m) {
        if (weights[m] <= 0.0) continue;
        const double phi = phi_of(params, weights[m], y_bar, rho[m], c[m]);
        g[m] = f_kernel(phi) + area_R * rho[m] * params.theta_I * c[m] * f_kernel_prime(phi);
    }
    return g;
}

std::vector<double> inner_hessian_diag(const SystemParams& params,
                                       const std::vector<double>& weights, double y_bar,
                                       const std::vector<double>& rho,
                                       const std::vector<double>& c) {
    const double area_R = M_PI * params.R * params.R;
    std::vector<double> h(weights.size(), 0.0);
    for (std::size_t m = 0; m < weights.size(); ++m) {
        if (weights[m] <= 0.0) continue;
        const double phi = phi_of(params, weights[m], y_bar, rho[m], c[m]);
        const double a = area_R * rho[m] * params.theta_I;
        h[m] = a * (2.0 * f_kernel_prime(phi) + c[m] * a * f_kernel_second(phi));
    }
    return h;
}

namespace {

// equality-constraint projection restricted to the unpinned components
void project_free(const std::vector<double>& weights, const std::vector<double>& g,
                  const std::vector<char>& pinned, std::vector<double>& p) {
    const std::size_t M = weights.size();
    std::fill(p.begin(), p.end(), 0.0);
    std::size_t k = 0;
    double vmin = std::numeric_limits<double>::infinity();
    double vmax = -vmin;
    double sv = 0.0, svv = 0.0, sg = 0.0, svg = 0.0;
    for (std::size_t m = 0; m < M; ++m) {
        if (pinned[m]) continue;
        ++k;
        vmin = std::min(vmin, weights[m]);
        vmax = std::max(vmax, weights[m]);
        sv += weights[m];
        svv += weights[m] * weights[m];
        sg += g[m];
        svg += weights[m] * g[m];
    }
    if (k <= 1) return;
    if (vmax - vmin <= 1e-12 * std::max(1.0, vmax)) {
        // both rows parallel: fall back to the single mass constraint
        const double mean = sg / static_cast<double>(k);
        for (std::size_t m = 0; m < M; ++m)
            if (!pinned[m]) p[m] = g[m] - mean;
        return;
    }
    const double kk = static_cast<double>(k);
    const double det = kk * svv - sv * sv;
    if (!(det > 1e-14 * kk * svv))
        throw singular_projection_error("constraint normal matrix is numerically singular");
    const double mu1 = (svv * sg - sv * svg) / det;
    const double mu2 = (kk * svg - sv * sg) / det;
    for (std::size_t m = 0; m < M; ++m)
        if (!pinned[m]) p[m] = g[m] - mu1 - mu2 * weights[m];
}

}  // namespace

std::vector<double> project_direction(const std::vector<double>& weights,
                                      const std::vector<double>& gradient) {
    if (weights.size() != gradient.size())
        throw std::domain_error("weights and gradient must be equally sized");
    std::vector<char> pinned(weights.size(), 0);
    std::vector<double> p(weights.size(), 0.0);
    project_free(weights, gradient, pinned, p);
    return p;
}

InnerResult inner_maximize(const SystemParams& params, const GroupProfile& groups, double x_bar,
                           double y_bar, const GridSpec& spec,
                           const std::optional<CachingStrategy>& init) {
    const std::vector<double> v = groups.weights(params.alpha);
    const std::size_t M = groups.size();
    std::optional<CachingStrategy> start =
        init ? init : feasible_init(v, groups.lambda, x_bar, y_bar);
    if (!start) throw std::domain_error("no feasible caching vector for the requested totals");

    InnerResult out;
    std::vector<double> c = start->c;
    const std::vector<double> rho =
        rho_from_totals(params, v, groups.total_density(), x_bar, y_bar);
    const double delta_c = spec.convergence > 0.0 ? spec.convergence : 1e-9;
    double F = inner_objective(params, v, y_bar, rho, c);

    constexpr int kMaxIterations = 1000;
    for (int it = 0; it < kMaxIterations; ++it) {
        const std::vector<double> g = inner_gradient(params, v, y_bar, rho, c);

        // pin bound components whose step would leave the box, then re-project
        std::vector<char> pinned(M, 0);
        std::vector<double> p(M, 0.0);
        for (std::size_t pass = 0; pass <= M; ++pass) {
            project_free(v, g, pinned, p);
            bool changed = false;
            for (std::size_t m = 0; m < M; ++m) {
                if (pinned[m]) continue;
                const double span = std::max(1.0, groups.lambda[m]);
                const bool at_low = c[m] <= 1e-15 * span;
                const bool at_high = c[m] >= groups.lambda[m] - 1e-15 * span;
                if ((at_low && p[m] < 0.0) || (at_high && p[m] > 0.0)) {
                    pinned[m] = 1;
                    changed = true;
                }
            }
            if (!changed) break;
        }

        double g_norm = 0.0, p_norm = 0.0;
        for (std::size_t m = 0; m < M; ++m) {
            g_norm = std::max(g_norm, std::abs(g[m]));
            p_norm = std::max(p_norm, std::abs(p[m]));
        }
        if (p_norm <= 1e-14 * std::max(1.0, g_norm)) break;

        double s_max = std::numeric_limits<double>::infinity();
        for (std::size_t m = 0; m < M; ++m) {
            if (p[m] > 0.0)
                s_max = std::min(s_max, (groups.lambda[m] - c[m]) / p[m]);
            else if (p[m] < 0.0)
                s_max = std::min(s_max, c[m] / -p[m]);
        }
        if (!(s_max > 0.0) || !std::isfinite(s_max)) break;

        std::vector<double> trial(M);
        const auto along = [&](double s) {
            for (std::size_t m = 0; m < M; ++m)
                trial[m] = std::clamp(c[m] + s * p[m], 0.0, groups.lambda[m]);
            return inner_objective(params, v, y_bar, rho, trial);
        };
        const double s_star = bisect_max(along, 0.0, s_max, std::max(1e-14, 1e-10 * s_max));
        for (std::size_t m = 0; m < M; ++m)
            c[m] = std::clamp(c[m] + s_star * p[m], 0.0, groups.lambda[m]);

        const double F_new = inner_objective(params, v, y_bar, rho, c);
        ++out.iterations;
        out.objective_trace.push_back(F_new);
        const bool done = F_new - F <= delta_c;
        F = std::max(F, F_new);
        if (done) break;
    }

    out.c.c = std::move(c);
    out.objective = F;
    return out;
}

ExactSolution solve_exact(const SystemParams& params, const GroupProfile& groups,
                          const GridSpec& spec) {
    if (spec.step_x < 0.0 || spec.step_y < 0.0 || !(spec.convergence > 0.0))
        throw std::domain_error("grid steps must be positive (or zero for defaults)");

    const std::size_t M = groups.size();
    const double lam0 = groups.total_density();
    ExactSolution out;
    out.c_star.c.assign(M, 0.0);
    if (lam0 <= 0.0) {
        out.grid_trace.push_back({0.0, 0.0, 0.0});
        return out;
    }

    const std::vector<double> v = groups.weights(params.alpha);
    const double area_R = M_PI * params.R * params.R;
    const double dx = spec.step_x > 0.0 ? spec.step_x : lam0 / 200.0;
    const std::size_t nx = static_cast<std::size_t>(std::floor(lam0 / dx + 1e-9)) + 1;

    struct ColumnResult {
        std::vector<GridPoint> trace;
        CachingStrategy c;
        double x = 0.0;
        double y = 0.0;
        double gain = -1.0;
        long long iterations = 0;
    };
    std::vector<ColumnResult> cols(nx);

    parallel_for(nx, [&](std::size_t i) {
        ColumnResult& col = cols[i];
        const double x = std::min(static_cast<double>(i) * dx, lam0);
        col.x = x;
        const auto [y_lo, y_hi] = y_bounds(v, groups.lambda, x);
        const double dy = spec.step_y > 0.0 ? spec.step_y : (y_hi - y_lo) / 200.0;
        std::vector<double> ys;
        if (!(dy > 0.0) || y_hi - y_lo <= 1e-15 * std::max(1.0, y_hi)) {
            ys.push_back(y_lo);
        } else {
            for (std::size_t k = 0;; ++k) {
                const double y = y_lo + static_cast<double>(k) * dy;
                if (y > y_hi + 1e-12 * std::max(1.0, y_hi)) break;
                ys.push_back(y);
            }
        }
        for (double y : ys) {
            const auto init = feasible_init(v, groups.lambda, x, y);
            if (!init) continue;
            const InnerResult inner = inner_maximize(params, groups, x, y, spec, init);
            const double gain = (lam0 - x) * area_R * inner.objective;
            col.trace.push_back({x, y, gain});
            col.iterations += inner.iterations;
            if (gain > col.gain) {
                col.gain = gain;
                col.y = y;
                col.c = inner.c;
            }
        }
    });

    out.gain = 0.0;
    bool found = false;
    for (std::size_t i = 0; i < nx; ++i) {
        const ColumnResult& col = cols[i];
        out.grid_trace.insert(out.grid_trace.end(), col.trace.begin(), col.trace.end());
        out.iterations_total += col.iterations;
        if (col.gain >= 0.0 && (!found || col.gain > out.gain)) {
            found = true;
            out.gain = col.gain;
            out.x_star = col.x;
            out.y_star = col.y;
            out.c_star = col.c;
        }
    }
    if (!found) out.grid_trace.push_back({0.0, 0.0, 0.0});
    return out;
}

}  // namespace d2d
