#include "d2d/opt_asymptotic.hpp"

#include "d2d/errors.hpp"
#include "d2d/numerics.hpp"
#include "d2d/opt_unbiased.hpp"
#include "d2d/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <exception>
#include <limits>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace d2d {

namespace {

double dot(const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

void check_ratio_sum(double p) {
    if (!(p >= -1e-9) || !(p <= 1.0 + 1e-9))
        throw internal_consistency_error("asymptotic success probability out of range");
}

double ps_with_rho(const SystemParams& params, const std::vector<double>& v,
                   const std::vector<double>& rho, const std::vector<double>& c) {
    const double y = dot(v, c);
    double ps = 0.0;
    for (std::size_t m = 0; m < c.size(); ++m) {
        if (c[m] <= 0.0 || v[m] <= 0.0) continue;
        const double denom =
            y + params.lambda_B * params.theta_B * v[m] + c[m] * rho[m] * params.theta_I * v[m];
        if (denom <= 0.0) continue;
        ps += c[m] * v[m] / denom;
    }
    check_ratio_sum(ps);
    return ps;
}

// direction for ascent over {sum c = const, box}: center the gradient on the
// free coordinates and pin any coordinate the step would push outside
std::vector<double> mass_projected_direction(const std::vector<double>& w,
                                             const std::vector<double>& c,
                                             const std::vector<double>& lambda) {
    const std::size_t m_count = w.size();
    std::vector<bool> free_coord(m_count, true);
    std::vector<double> p(m_count, 0.0);
    for (std::size_t pass = 0; pass <= m_count; ++pass) {
        std::size_t k = 0;
        double mean = 0.0;
        for (std::size_t m = 0; m < m_count; ++m)
            if (free_coord[m]) {
                mean += w[m];
                ++k;
            }
        if (k == 0) return std::vector<double>(m_count, 0.0);
        mean /= static_cast<double>(k);
        std::fill(p.begin(), p.end(), 0.0);
        for (std::size_t m = 0; m < m_count; ++m)
            if (free_coord[m]) p[m] = w[m] - mean;
        bool pinned = false;
        for (std::size_t m = 0; m < m_count; ++m) {
            if (!free_coord[m]) continue;
            const double span = std::max(1.0, lambda[m]);
            if ((c[m] <= 1e-15 * span && p[m] < 0.0) ||
                (c[m] >= lambda[m] - 1e-15 * span && p[m] > 0.0)) {
                free_coord[m] = false;
                pinned = true;
            }
        }
        if (!pinned) return p;
    }
    return p;
}

std::vector<double> lp_coefficients(const SystemParams& params, const SorState& state) {
    const std::size_t m_count = state.weights.size();
    const double ub = dot(state.u, state.beta);
    std::vector<double> w(m_count);
    for (std::size_t m = 0; m < m_count; ++m) {
        w[m] = state.weights[m] * state.u[m] - state.weights[m] * ub -
               state.u[m] * state.beta[m] * state.rho_bar[m] * params.theta_I * state.weights[m];
    }
    return w;
}

}  // namespace

std::vector<double> rho_asymptotic(const std::vector<double>& weights, double lambda_0,
                                   const std::vector<double>& c, double x_bar) {
    if (weights.size() != c.size())
        throw std::domain_error("weights and caching vector disagree in size");
    const std::size_t m_count = weights.size();
    const double y = dot(weights, c);
    if (y <= 0.0) return std::vector<double>(m_count, 0.0);
    const double lam_ur = std::max(0.0, lambda_0 - x_bar);
    std::vector<double> rho(m_count, 0.0);
    for (std::size_t m = 0; m < m_count; ++m)
        rho[m] = 1.0 - std::pow(1.0 + weights[m] * lam_ur / (3.5 * y), -3.5);
    return rho;
}

std::vector<double> rho_asymptotic(const SystemParams& params, const GroupProfile& groups,
                                   const CachingStrategy& strategy, double x_bar) {
    return rho_asymptotic(groups.weights(params.alpha), groups.total_density(), strategy.c,
                          x_bar);
}

std::pair<double, std::vector<double>> y_min(const std::vector<double>& weights,
                                             const std::vector<double>& lambda,
                                             double x_bar) {
    if (weights.size() != lambda.size())
        throw std::domain_error("weights and density vector disagree in size");
    const std::size_t m_count = weights.size();
    double lambda_0 = 0.0;
    for (double lam : lambda) lambda_0 += lam;
    const double slack = 1e-9 * std::max(1.0, lambda_0);
    if (x_bar < -slack || x_bar > lambda_0 + slack)
        throw std::domain_error("caching total outside [0, total density]");
    const double target = std::clamp(x_bar, 0.0, lambda_0);

    std::vector<std::size_t> order(m_count);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return weights[a] < weights[b]; });

    std::vector<double> c(m_count, 0.0);
    double left = target;
    for (std::size_t k : order) {
        const double take = std::min(lambda[k], left);
        c[k] = take;
        left -= take;
        if (left <= 0.0) break;
    }
    return {dot(weights, c), c};
}

std::vector<double> rho_upper_bound(const SystemParams& params, const GroupProfile& groups,
                                    double x_bar) {
    const auto v = groups.weights(params.alpha);
    const auto [y_low, c_witness] = y_min(v, groups.lambda, x_bar);
    (void)c_witness;
    const std::size_t m_count = v.size();
    if (y_low <= 0.0) return std::vector<double>(m_count, 0.0);
    const double lam_ur = std::max(0.0, groups.total_density() - x_bar);
    std::vector<double> rho(m_count, 0.0);
    for (std::size_t m = 0; m < m_count; ++m)
        rho[m] = 1.0 - std::pow(1.0 + v[m] * lam_ur / (3.5 * y_low), -3.5);
    return rho;
}

double ps_infinity(const SystemParams& params, const GroupProfile& groups,
                   const CachingStrategy& strategy, double x_bar) {
    const auto v = groups.weights(params.alpha);
    const auto rho = rho_asymptotic(v, groups.total_density(), strategy.c, x_bar);
    return ps_with_rho(params, v, rho, strategy.c);
}

double ps_infinity_lower(const SystemParams& params, const GroupProfile& groups,
                         const CachingStrategy& strategy, double x_bar) {
    const auto v = groups.weights(params.alpha);
    const auto rho = rho_upper_bound(params, groups, x_bar);
    return ps_with_rho(params, v, rho, strategy.c);
}

std::vector<double> sor_phi(const SystemParams& params, const std::vector<double>& weights,
                            const std::vector<double>& rho_bar, const std::vector<double>& c) {
    const std::size_t m_count = weights.size();
    const double y = dot(weights, c);
    std::vector<double> phi(m_count, 0.0);
    for (std::size_t m = 0; m < m_count; ++m) {
        phi[m] = y + params.lambda_B * params.theta_B * weights[m] +
                 rho_bar[m] * c[m] * params.theta_I * weights[m];
    }
    return phi;
}

CachingStrategy sor_inner_lp(const SystemParams& params, const SorState& state,
                             const GroupProfile& groups, double x_bar) {
    const std::size_t m_count = groups.size();
    const auto w = lp_coefficients(params, state);

    std::vector<std::size_t> order(m_count);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return w[a] > w[b]; });

    CachingStrategy out;
    out.c.assign(m_count, 0.0);
    double left = std::clamp(x_bar, 0.0, groups.total_density());
    for (std::size_t k : order) {
        const double take = std::min(groups.lambda[k], left);
        out.c[k] = take;
        left -= take;
        if (left <= 0.0) break;
    }
    return out;
}

SorState solve_sor(const SystemParams& params, const GroupProfile& groups, double x_bar,
                   const SorOptions& options, const std::optional<CachingStrategy>& init) {
    if (!(options.zeta > 0.0) || !(options.zeta < 1.0))
        throw std::domain_error("damping base must lie in (0,1)");
    if (!(options.eps > 0.0) || !(options.eps < 1.0))
        throw std::domain_error("contraction margin must lie in (0,1)");
    if (!(options.tol > 0.0)) throw std::domain_error("residual tolerance must be positive");
    if (options.max_iterations <= 0)
        throw std::domain_error("iteration budget must be positive");

    const double lambda_0 = groups.total_density();
    const double slack = 1e-9 * std::max(1.0, lambda_0);
    if (x_bar < -slack || x_bar > lambda_0 + slack)
        throw std::domain_error("caching total outside [0, total density]");
    const double target = std::clamp(x_bar, 0.0, lambda_0);
    const std::size_t m_count = groups.size();

    SorState state;
    state.weights = groups.weights(params.alpha);
    state.rho_bar = rho_upper_bound(params, groups, target);
    if (init) {
        if (init->c.size() != m_count)
            throw std::domain_error("initial caching vector has wrong size");
        double total = 0.0;
        for (std::size_t m = 0; m < m_count; ++m) {
            if (init->c[m] < -1e-12 || init->c[m] > groups.lambda[m] + 1e-12)
                throw std::domain_error("initial caching vector leaves the box");
            total += init->c[m];
        }
        if (std::abs(total - target) > 1e-9 * std::max(1.0, target))
            throw std::domain_error("initial caching vector does not sum to the target");
        state.c = *init;
    } else {
        state.c = inner_allocate(groups.lambda, target);
    }

    state.phi = sor_phi(params, state.weights, state.rho_bar, state.c.c);
    state.u.assign(m_count, 0.0);
    state.beta.assign(m_count, 0.0);
    for (std::size_t m = 0; m < m_count; ++m) {
        if (state.phi[m] > 0.0) {
            state.u[m] = 1.0 / state.phi[m];
            state.beta[m] = state.c.c[m] * state.weights[m] / state.phi[m];
        }
    }
    double beta_sum = 0.0;
    for (double b : state.beta) beta_sum += b;
    state.beta_sum_trace.push_back(beta_sum);

    std::vector<double> chi(m_count, 0.0), kappa(m_count, 0.0);
    std::vector<double> u_next(m_count, 0.0), beta_next(m_count, 0.0);
    std::vector<double> trial(m_count, 0.0);
    double residual = 0.0;

    for (int iter = 1; iter <= options.max_iterations; ++iter) {
        state.iterations = iter;

        // ascent step on the linearized objective, warm started at the
        // current point; the step length maximizes the true ratio sum so the
        // iterate can settle inside the box instead of hopping across corners
        const auto w = lp_coefficients(params, state);
        const auto p = mass_projected_direction(w, state.c.c, groups.lambda);
        double p_norm = 0.0, w_norm = 0.0;
        for (std::size_t m = 0; m < m_count; ++m) {
            p_norm = std::max(p_norm, std::abs(p[m]));
            w_norm = std::max(w_norm, std::abs(w[m]));
        }
        if (p_norm > 1e-14 * std::max(1.0, w_norm)) {
            double s_max = std::numeric_limits<double>::infinity();
            for (std::size_t m = 0; m < m_count; ++m) {
                if (p[m] > 0.0)
                    s_max = std::min(s_max, (groups.lambda[m] - state.c.c[m]) / p[m]);
                else if (p[m] < 0.0)
                    s_max = std::min(s_max, -state.c.c[m] / p[m]);
            }
            if (std::isfinite(s_max) && s_max > 0.0) {
                const auto& base = state.c.c;
                auto along = [&](double s) {
                    for (std::size_t m = 0; m < m_count; ++m)
                        trial[m] = std::clamp(base[m] + s * p[m], 0.0, groups.lambda[m]);
                    return ps_with_rho(params, state.weights, state.rho_bar, trial);
                };
                const double s_star =
                    bisect_max(along, 0.0, s_max, std::max(1e-14, 1e-10 * s_max));
                for (std::size_t m = 0; m < m_count; ++m)
                    state.c.c[m] = std::clamp(base[m] + s_star * p[m], 0.0, groups.lambda[m]);
            }
        }
        state.phi = sor_phi(params, state.weights, state.rho_bar, state.c.c);

        residual = 0.0;
        for (std::size_t m = 0; m < m_count; ++m) {
            if (state.phi[m] > 0.0) {
                chi[m] = -1.0 + state.u[m] * state.phi[m];
                kappa[m] = state.beta[m] * state.phi[m] - state.c.c[m] * state.weights[m];
            } else {
                chi[m] = 0.0;
                kappa[m] = 0.0;
            }
            residual = std::max(residual, std::max(std::abs(chi[m]), std::abs(kappa[m])));
        }
        if (residual <= options.tol) {
            state.converged = true;
            return state;
        }

        double s_old = 0.0;
        for (std::size_t m = 0; m < m_count; ++m)
            s_old += chi[m] * chi[m] + kappa[m] * kappa[m];
        for (int i = 1; i <= 60; ++i) {
            const double step = std::pow(options.zeta, i);
            double s_new = 0.0;
            for (std::size_t m = 0; m < m_count; ++m) {
                if (state.phi[m] > 0.0) {
                    u_next[m] = state.u[m] - step * chi[m] / state.phi[m];
                    beta_next[m] = state.beta[m] - step * kappa[m] / state.phi[m];
                } else {
                    u_next[m] = state.u[m];
                    beta_next[m] = state.beta[m];
                }
                const double chi_new = -1.0 + u_next[m] * state.phi[m];
                const double kappa_new =
                    beta_next[m] * state.phi[m] - state.c.c[m] * state.weights[m];
                s_new += chi_new * chi_new + kappa_new * kappa_new;
            }
            const double bound = 1.0 - options.eps * step;
            if (s_new <= bound * bound * s_old) break;
        }
        state.u = u_next;
        state.beta = beta_next;
        beta_sum = 0.0;
        for (double b : state.beta) beta_sum += b;
        state.beta_sum_trace.push_back(beta_sum);
    }

    std::ostringstream msg;
    msg << "multiplier residual " << residual << " above tolerance " << options.tol
        << " after " << options.max_iterations << " iterations at caching total " << target;
    throw non_convergence_error(msg.str());
}

AsymptoticSolution solve_asymptotic(const SystemParams& params, const GroupProfile& groups,
                                    double step_x, const SorOptions& options) {
    const std::size_t m_count = groups.size();
    const double lambda_0 = groups.total_density();

    AsymptoticSolution out;
    out.c_star.c.assign(m_count, 0.0);
    if (lambda_0 <= 0.0) {
        out.beta_sum_trace.push_back(0.0);
        return out;
    }

    const double step = step_x > 0.0 ? step_x : lambda_0 / 200.0;
    std::vector<double> xs;
    for (double x = 0.0; x < lambda_0; x += step) xs.push_back(x);
    xs.push_back(lambda_0);
    const std::size_t n = xs.size();

    std::vector<SorState> states(n);
    std::vector<double> gains_lower(n, 0.0), gains_unbounded(n, 0.0);
    std::vector<std::exception_ptr> failures(n);
    parallel_for(n, [&](std::size_t i) {
        try {
            states[i] = solve_sor(params, groups, xs[i], options);
            const double rest = lambda_0 - xs[i];
            gains_lower[i] = rest * ps_infinity_lower(params, groups, states[i].c, xs[i]);
            gains_unbounded[i] = rest * ps_infinity(params, groups, states[i].c, xs[i]);
        } catch (...) {
            failures[i] = std::current_exception();
        }
    });
    for (std::size_t i = 0; i < n; ++i)
        if (failures[i]) std::rethrow_exception(failures[i]);

    std::size_t best = 0;
    long long total_iterations = 0;
    for (std::size_t i = 0; i < n; ++i) {
        total_iterations += states[i].iterations;
        if (gains_lower[i] > gains_lower[best]) best = i;
    }

    out.c_star = states[best].c;
    out.x_star = xs[best];
    out.gain_lower = gains_lower[best];
    out.gain_unbounded = gains_unbounded[best];
    out.beta_sum_trace = states[best].beta_sum_trace;
    out.iterations_total = total_iterations;
    return out;
}

}  // namespace d2d
