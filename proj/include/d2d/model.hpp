#pragma once

#include "d2d/numerics.hpp"

#include <cstddef>
#include <vector>

namespace d2d {

// Radio and deployment constants. theta_I and theta_B are cached at
// construction so the hot evaluation paths never touch quadrature.
struct SystemParams {
    double alpha;      // path-loss exponent, > 2
    double gamma_th;   // linear SIR threshold
    double p_t;        // device transmit power, W
    double p_B;        // base-station transmit power, W
    double lambda_B;   // base-station density, per m^2
    double R;          // max transmitter-receiver distance, m
    double theta_I;
    double theta_B;

    SystemParams(double alpha, double gamma_th, double p_t, double p_B,
                 double lambda_B, double R, const QuadratureSpec& spec = {});

    // gamma_th in dB, powers in dBm
    static SystemParams from_db(double alpha, double gamma_th_db, double p_t_dbm,
                                double p_B_dbm, double lambda_B, double R,
                                const QuadratureSpec& spec = {});
};

// Per-group user densities and trust biases. Biases must sum to one.
struct GroupProfile {
    std::vector<double> lambda;
    std::vector<double> bias;

    GroupProfile(std::vector<double> lambda, std::vector<double> bias);

    std::size_t size() const { return lambda.size(); }
    double total_density() const;
    // v_m = B_m^{2/alpha}
    std::vector<double> weights(double alpha) const;
};

struct CachingStrategy {
    std::vector<double> c;

    double total() const;
};

// throws std::domain_error unless 0 <= c_m <= lambda_m for every group
void validate_strategy(const GroupProfile& groups, const CachingStrategy& strategy);

struct TrustCounts {
    std::vector<double> counts;
};

struct Metrics {
    std::vector<double> assoc_prob;                // P_m
    std::vector<double> active_ratio;              // rho_m
    std::vector<double> success_prob_given_group;  // P^th_m
    std::vector<double> offload_gain_per_group;
    double success_prob = 0.0;
    double offload_gain = 0.0;      // density of successfully offloaded requesters
    double offload_gain_abs = 0.0;  // gain times area, when an area is supplied
};

std::vector<double> trust_bias_from_counts(const TrustCounts& counts);

// f(t) = (1 - e^{-t}) / t with f(0) = 1, plus its first two derivatives
double f_kernel(double t);
double f_kernel_prime(double t);
double f_kernel_second(double t);

std::vector<double> assoc_prob(const SystemParams& params, const GroupProfile& groups,
                               const CachingStrategy& strategy);

std::vector<double> active_ratio(const SystemParams& params, const GroupProfile& groups,
                                 const CachingStrategy& strategy,
                                 const std::vector<double>& assoc);

Metrics success_prob(const SystemParams& params, const GroupProfile& groups,
                     const CachingStrategy& strategy);

Metrics offload_gain(const SystemParams& params, const GroupProfile& groups,
                     const CachingStrategy& strategy, double area = 0.0);

}  // namespace d2d
