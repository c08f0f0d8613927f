#include "d2d/model.hpp"

#include "d2d/errors.hpp"

#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

namespace d2d {

namespace {

constexpr double kProbSlack = 1e-9;

void check_probability(double p, const char* what) {
    if (!(p >= -kProbSlack && p <= 1.0 + kProbSlack)) {
        throw internal_consistency_error(std::string(what) + " = " + std::to_string(p) +
                                         " left [0,1]");
    }
}

}  // namespace

SystemParams::SystemParams(double alpha_, double gamma_th_, double p_t_, double p_B_,
                           double lambda_B_, double R_, const QuadratureSpec& spec)
    : alpha(alpha_),
      gamma_th(gamma_th_),
      p_t(p_t_),
      p_B(p_B_),
      lambda_B(lambda_B_),
      R(R_) {
    if (!(alpha > 2.0)) throw std::domain_error("alpha must exceed 2");
    if (!(gamma_th >= 0.0)) throw std::domain_error("gamma_th must be nonnegative");
    if (!(p_t > 0.0)) throw std::domain_error("p_t must be positive");
    if (!(p_B >= 0.0)) throw std::domain_error("p_B must be nonnegative");
    if (!(lambda_B >= 0.0)) throw std::domain_error("lambda_B must be nonnegative");
    if (!(R > 0.0)) throw std::domain_error("R must be positive");
    theta_I = theta_interference(alpha, gamma_th, spec);
    theta_B = theta_bs(alpha, gamma_th, p_B / p_t);
}

SystemParams SystemParams::from_db(double alpha, double gamma_th_db, double p_t_dbm,
                                   double p_B_dbm, double lambda_B, double R,
                                   const QuadratureSpec& spec) {
    const double gamma_th = std::pow(10.0, gamma_th_db / 10.0);
    const double p_t = 1e-3 * std::pow(10.0, p_t_dbm / 10.0);
    const double p_B = 1e-3 * std::pow(10.0, p_B_dbm / 10.0);
    return SystemParams(alpha, gamma_th, p_t, p_B, lambda_B, R, spec);
}

GroupProfile::GroupProfile(std::vector<double> lambda_, std::vector<double> bias_)
    : lambda(std::move(lambda_)), bias(std::move(bias_)) {
    if (lambda.empty()) throw std::domain_error("at least one group required");
    if (bias.size() != lambda.size())
        throw std::domain_error("bias and lambda must have the same length");
    double bias_sum = 0.0;
    for (std::size_t m = 0; m < lambda.size(); ++m) {
        if (!(lambda[m] >= 0.0))
            throw std::domain_error("lambda[" + std::to_string(m + 1) + "] must be nonnegative");
        if (!(bias[m] >= 0.0 && bias[m] <= 1.0))
            throw std::domain_error("bias[" + std::to_string(m + 1) + "] must lie in [0,1]");
        bias_sum += bias[m];
    }
    if (std::abs(bias_sum - 1.0) > 1e-9)
        throw std::domain_error("biases must sum to 1, got " + std::to_string(bias_sum));
}

double GroupProfile::total_density() const {
    return std::accumulate(lambda.begin(), lambda.end(), 0.0);
}

std::vector<double> GroupProfile::weights(double alpha) const {
    std::vector<double> v(bias.size());
    for (std::size_t m = 0; m < bias.size(); ++m) v[m] = std::pow(bias[m], 2.0 / alpha);
    return v;
}

double CachingStrategy::total() const {
    return std::accumulate(c.begin(), c.end(), 0.0);
}

void validate_strategy(const GroupProfile& groups, const CachingStrategy& strategy) {
    if (strategy.c.size() != groups.size())
        throw std::domain_error("caching vector length does not match group count");
    for (std::size_t m = 0; m < groups.size(); ++m) {
        const double slack = 1e-12 * std::max(1.0, groups.lambda[m]);
        if (!(strategy.c[m] >= -slack && strategy.c[m] <= groups.lambda[m] + slack))
            throw std::domain_error("c[" + std::to_string(m + 1) + "] outside [0, lambda]");
    }
}

std::vector<double> trust_bias_from_counts(const TrustCounts& counts) {
    double total = 0.0;
    for (double n : counts.counts) {
        if (!(n >= 0.0)) throw std::domain_error("trust counts must be nonnegative");
        total += n;
    }
    if (!(total > 0.0)) throw std::domain_error("at least one trust count must be positive");
    std::vector<double> bias(counts.counts.size());
    for (std::size_t m = 0; m < bias.size(); ++m) bias[m] = counts.counts[m] / total;
    return bias;
}

double f_kernel(double t) {
    if (!(t >= 0.0)) throw std::domain_error("f_kernel requires t >= 0");
    if (t < 1e-6) return 1.0 - t / 2.0 + t * t / 6.0;
    return -std::expm1(-t) / t;
}

double f_kernel_prime(double t) {
    if (!(t >= 0.0)) throw std::domain_error("f_kernel_prime requires t >= 0");
    if (t < 1e-3) return -0.5 + t / 3.0 - t * t / 8.0 + t * t * t / 30.0;
    return (std::exp(-t) * (t + 1.0) - 1.0) / (t * t);
}

double f_kernel_second(double t) {
    if (!(t >= 0.0)) throw std::domain_error("f_kernel_second requires t >= 0");
    if (t < 1e-2) return 1.0 / 3.0 - t / 4.0 + t * t / 10.0 - t * t * t / 36.0;
    return (2.0 - std::exp(-t) * (2.0 + t * (2.0 + t))) / (t * t * t);
}

std::vector<double> assoc_prob(const SystemParams& params, const GroupProfile& groups,
                               const CachingStrategy& strategy) {
    validate_strategy(groups, strategy);
    const std::vector<double> v = groups.weights(params.alpha);
    const std::size_t M = groups.size();
    double weighted = 0.0;  // sum_i c_i v_i
    for (std::size_t i = 0; i < M; ++i) weighted += strategy.c[i] * v[i];
    std::vector<double> p(M, 0.0);
    if (weighted <= 0.0) return p;
    for (std::size_t m = 0; m < M; ++m) {
        if (strategy.c[m] <= 0.0 || v[m] <= 0.0) continue;
        const double share = v[m] * strategy.c[m] / weighted;
        const double reach = -std::expm1(-M_PI * weighted * params.R * params.R / v[m]);
        p[m] = share * reach;
        check_probability(p[m], "assoc_prob");
    }
    return p;
}

std::vector<double> active_ratio(const SystemParams& params, const GroupProfile& groups,
                                 const CachingStrategy& strategy,
                                 const std::vector<double>& assoc) {
    validate_strategy(groups, strategy);
    if (assoc.size() != groups.size())
        throw std::domain_error("assoc vector length does not match group count");
    const std::size_t M = groups.size();
    double lambda_ur = 0.0;  // density of requesters
    for (std::size_t i = 0; i < M; ++i) lambda_ur += groups.lambda[i] - strategy.c[i];
    const double area_R = M_PI * params.R * params.R;
    std::vector<double> rho(M, 0.0);
    for (std::size_t m = 0; m < M; ++m) {
        const double c = strategy.c[m];
        if (c <= 0.0 || assoc[m] <= 0.0) continue;
        const double load = assoc[m] * lambda_ur / (3.5 * c);
        const double head = std::pow(1.0 + load, -3.5);
        const double cut = 3.5 * c / assoc[m];
        const double num = lower_incomplete_gamma(3.5, (lambda_ur + cut) * area_R);
        const double den = lower_incomplete_gamma(3.5, cut * area_R);
        rho[m] = 1.0 - head * num / den;
        check_probability(rho[m], "active_ratio");
    }
    return rho;
}

Metrics success_prob(const SystemParams& params, const GroupProfile& groups,
                     const CachingStrategy& strategy) {
    Metrics out;
    out.assoc_prob = assoc_prob(params, groups, strategy);
    out.active_ratio = active_ratio(params, groups, strategy, out.assoc_prob);
    const std::vector<double> v = groups.weights(params.alpha);
    const std::size_t M = groups.size();
    const double area_R = M_PI * params.R * params.R;
    double weighted = 0.0;
    for (std::size_t i = 0; i < M; ++i) weighted += strategy.c[i] * v[i];
    out.success_prob_given_group.assign(M, 0.0);
    double ps = 0.0;
    double assoc_sum = 0.0;
    for (std::size_t m = 0; m < M; ++m) {
        assoc_sum += out.assoc_prob[m];
        const double c = strategy.c[m];
        if (c <= 0.0 || v[m] <= 0.0) continue;
        const double phi = area_R * (weighted / v[m] + params.lambda_B * params.theta_B +
                                     c * out.active_ratio[m] * params.theta_I);
        ps += area_R * c * f_kernel(phi);
        if (out.assoc_prob[m] > 0.0) {
            const double pth = area_R * c / (out.assoc_prob[m] * phi) * (-std::expm1(-phi));
            check_probability(pth, "success_prob_given_group");
            out.success_prob_given_group[m] = pth;
        }
    }
    check_probability(assoc_sum, "sum of assoc_prob");
    check_probability(ps, "success_prob");
    out.success_prob = ps;
    return out;
}

Metrics offload_gain(const SystemParams& params, const GroupProfile& groups,
                     const CachingStrategy& strategy, double area) {
    Metrics out = success_prob(params, groups, strategy);
    const std::size_t M = groups.size();
    out.offload_gain_per_group.assign(M, 0.0);
    double requesters = 0.0;
    for (std::size_t m = 0; m < M; ++m) {
        const double rem = groups.lambda[m] - strategy.c[m];
        out.offload_gain_per_group[m] = out.success_prob * rem;
        requesters += rem;
    }
    out.offload_gain = requesters * out.success_prob;
    out.offload_gain_abs = out.offload_gain * area;
    return out;
}

}  // namespace d2d
