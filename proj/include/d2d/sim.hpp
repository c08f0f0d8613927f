#pragma once

#include "d2d/model.hpp"

#include <cstdint>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

namespace d2d {

// torus wraps distances so the window behaves like a stationary process;
// guard keeps plain distances and restricts statistics to the inner square
enum class Boundary { torus, guard };

struct SimConfig {
    double window_side = 100.0;
    int realizations = 2000;
    std::uint64_t seed = 1;
    Boundary boundary = Boundary::torus;
    double guard_margin = 0.0;  // guard mode only, must stay below window_side/2
};

// throws std::domain_error on out-of-domain fields
void validate_sim_config(const SimConfig& cfg);

// Counter-based generator: the state is a hash of (seed, stream, salt, a, b),
// so every draw can be reproduced in isolation, independent of evaluation
// order and thread schedule.
class Rng {
  public:
    Rng(std::uint64_t seed, std::uint64_t stream, std::uint64_t salt, std::uint64_t a = 0,
        std::uint64_t b = 0);

    std::uint64_t next_u64();
    double next_unit();  // uniform on (0,1)
    double next_exp();   // unit mean
    long next_poisson(double mean);

  private:
    std::uint64_t state_;
};

struct Point {
    double x = 0.0;
    double y = 0.0;
};

// serving transmitter of a requester; group < 0 means unassociated
struct Association {
    int group = -1;
    int index = -1;
};

// names a requester inside a realization; probe refers to the reference
// point added at the window centre
struct UrId {
    bool probe = false;
    int group = 0;
    int index = 0;
};

// One drawn network. Fading is not stored: each receiver-transmitter pair
// derives its unit-mean exponential draw from (seed, stream) and the two
// point identities, which keeps the dump small and the draws order-free.
struct Realization {
    std::vector<std::vector<Point>> ut;  // transmitters per group
    std::vector<std::vector<Point>> ur;  // requesters per group
    std::vector<Point> bs;
    std::vector<double> weight;  // v_m = B_m^{2/alpha}, fixed at draw time

    std::optional<Point> probe;  // reference requester, not part of the drawn process
    std::vector<std::vector<Association>> assoc;  // parallel to ur
    Association probe_assoc;
    std::vector<std::vector<std::uint8_t>> active;  // parallel to ut, set by drawn requesters

    std::uint64_t seed = 0;
    std::uint64_t stream = 0;
    double window_side = 0.0;
    Boundary boundary = Boundary::torus;
    double guard_margin = 0.0;
};

double pair_distance(const Realization& real, const Point& a, const Point& b);

// Poisson counts with uniform positions per group, thinned into transmitters
// with probability c_m / lambda_m, plus the base-station process. Identical
// (seed, stream_index) reproduce the realization bit for bit.
Realization draw_realization(const SystemParams& params, const GroupProfile& groups,
                             const CachingStrategy& strategy, const SimConfig& cfg,
                             std::uint64_t stream_index);

// Every requester, probe included, picks the transmitter within R that
// maximises the fading-averaged biased power B_g d^{-alpha}; a transmitter is
// active when at least one drawn requester selected it. The probe never sets
// activity: it stands for the typical point and must not load the process.
Realization associate(Realization real, const SystemParams& params);

// Eq-style SIR at one requester: serving power over same-group active
// transmitters (server excluded) plus all base stations, fresh unit-mean
// exponential fading per link. Unassociated requester yields nothing;
// an empty interference sum yields +infinity.
std::optional<double> measure_sir(const Realization& real, const SystemParams& params,
                                  const UrId& who);

enum class SimMetric { success_prob, assoc_prob, active_ratio, offload_gain };

const char* metric_name(SimMetric metric);
std::optional<SimMetric> parse_metric(const std::string& name);

struct SimEstimate {
    SimMetric metric = SimMetric::success_prob;
    double mean = 0.0;
    double ci99_half = 0.0;  // 99% normal-approximation half width
    int realizations = 0;    // contributing samples
    std::uint64_t seed = 0;
    // offload gain recomputed as (probe success frequency) * requester density
    std::optional<double> cross_check;
};

// Monte-Carlo mean of the chosen metric with the probe at the window centre.
// Realizations run in parallel; the reduction is serial over realization
// index, so results are identical for any worker count.
SimEstimate estimate(const SystemParams& params, const GroupProfile& groups,
                     const CachingStrategy& strategy, const SimConfig& cfg, SimMetric metric);

// one point per line: kind group x y, six decimals; base stations get group 0
void dump_realization(const Realization& real, std::ostream& os);

}  // namespace d2d
