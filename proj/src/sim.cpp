#include "d2d/sim.hpp"

#include "d2d/errors.hpp"
#include "d2d/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <exception>
#include <limits>
#include <stdexcept>

namespace d2d {

namespace {

constexpr std::uint64_t kGolden = 0x9e3779b97f4a7c15ULL;
constexpr std::uint64_t kSaltUsers = 0x75736572;
constexpr std::uint64_t kSaltBs = 0x62617365;
constexpr std::uint64_t kSaltFade = 0x66616465;
constexpr double kZ99 = 2.5758293035489004;

std::uint64_t mix(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

constexpr int kKindUt = 1;
constexpr int kKindBs = 2;
constexpr int kKindUr = 3;
constexpr int kKindProbe = 4;

std::uint64_t point_word(int kind, int group, int index) {
    return (static_cast<std::uint64_t>(kind) << 56) |
           (static_cast<std::uint64_t>(static_cast<std::uint32_t>(group + 1)) << 32) |
           static_cast<std::uint32_t>(index);
}

double link_fading(const Realization& real, std::uint64_t rx, std::uint64_t tx) {
    return Rng(real.seed, real.stream, kSaltFade, rx, tx).next_exp();
}

double pair_distance2(const Realization& real, const Point& a, const Point& b) {
    double dx = std::abs(a.x - b.x);
    double dy = std::abs(a.y - b.y);
    if (real.boundary == Boundary::torus) {
        const double side = real.window_side;
        if (dx > side / 2.0) dx = side - dx;
        if (dy > side / 2.0) dy = side - dy;
    }
    return dx * dx + dy * dy;
}

long knuth_poisson(Rng& rng, double mean) {
    const double limit = std::exp(-mean);
    long k = 0;
    double p = 1.0;
    do {
        ++k;
        p *= rng.next_unit();
    } while (p > limit);
    return k - 1;
}

// transmitters bucketed for the expanding-ring search; the ring bound only
// involves the cell edge, so the cell is sized off the population (a few
// transmitters per cell), not off the association radius
struct CellGrid {
    struct Entry {
        Point p;
        int group;
        int index;
    };

    int n = 1;
    double cell = 0.0;
    std::vector<std::vector<Entry>> cells;

    explicit CellGrid(const Realization& real) {
        const double side = real.window_side;
        std::size_t count = 0;
        for (const auto& g : real.ut) count += g.size();
        n = std::clamp(
            static_cast<int>(std::floor(std::sqrt(static_cast<double>(count)) / 2.0)), 1,
            512);
        cell = side / n;
        cells.resize(static_cast<std::size_t>(n) * n);
        for (std::size_t g = 0; g < real.ut.size(); ++g)
            for (std::size_t i = 0; i < real.ut[g].size(); ++i) {
                const Point& p = real.ut[g][i];
                cells[slot(p)].push_back(
                    {p, static_cast<int>(g), static_cast<int>(i)});
            }
    }

    std::size_t slot(const Point& p) const {
        const int ix = std::min(n - 1, std::max(0, static_cast<int>(p.x / cell)));
        const int iy = std::min(n - 1, std::max(0, static_cast<int>(p.y / cell)));
        return static_cast<std::size_t>(iy) * n + ix;
    }

    template <typename Fn>
    void visit_cell(bool wrap, int cx, int cy, Fn&& fn) const {
        if (wrap) {
            cx = ((cx % n) + n) % n;
            cy = ((cy % n) + n) % n;
        } else if (cx < 0 || cx >= n || cy < 0 || cy >= n) {
            return;
        }
        for (const auto& e : cells[static_cast<std::size_t>(cy) * n + cx]) fn(e);
    }

    // cells at Chebyshev distance exactly k; wrap-alias-free while 2k+1 <= n
    template <typename Fn>
    void visit_ring(bool wrap, int ix, int iy, int k, Fn&& fn) const {
        if (k == 0) {
            visit_cell(wrap, ix, iy, fn);
            return;
        }
        for (int dx = -k; dx <= k; ++dx) {
            visit_cell(wrap, ix + dx, iy - k, fn);
            visit_cell(wrap, ix + dx, iy + k, fn);
        }
        for (int dy = -k + 1; dy <= k - 1; ++dy) {
            visit_cell(wrap, ix - k, iy + dy, fn);
            visit_cell(wrap, ix + k, iy + dy, fn);
        }
    }
};

struct BestPick {
    Association a;
    double score = 0.0;
    double d2 = 0.0;
};

// Strongest biased mean power over every transmitter in the window; the
// requester associates only when this global winner lies within R, so an
// attractive but out-of-range transmitter leaves it unserved.
BestPick best_server(const Realization& real, const CellGrid& grid, const Point& p) {
    BestPick best;
    double w_max = 0.0;
    for (double w : real.weight) w_max = std::max(w_max, w);
    const auto consider = [&](const CellGrid::Entry& e) {
        const double w = real.weight[static_cast<std::size_t>(e.group)];
        if (w <= 0.0) return;
        const double d2 = pair_distance2(real, p, e.p);
        const double score = d2 > 0.0 ? w / d2 : std::numeric_limits<double>::infinity();
        const bool better =
            score > best.score ||
            (score == best.score && best.a.group >= 0 &&
             (e.group < best.a.group ||
              (e.group == best.a.group && e.index < best.a.index)));
        if (better) {
            best.a = {e.group, e.index};
            best.score = score;
            best.d2 = d2;
        }
    };
    if (grid.n >= 3) {
        const int ix = std::min(grid.n - 1, std::max(0, static_cast<int>(p.x / grid.cell)));
        const int iy = std::min(grid.n - 1, std::max(0, static_cast<int>(p.y / grid.cell)));
        const bool wrap = real.boundary == Boundary::torus;
        // a point past ring k-1 is at least (k-1) cell edges away, so the
        // search stops as soon as nothing farther out can beat the leader
        const int k_cap = wrap ? (grid.n - 1) / 2 : grid.n - 1;
        for (int k = 0; k <= k_cap; ++k) {
            if (k >= 2) {
                const double d_min = (k - 1) * grid.cell;
                if (best.score * d_min * d_min >= w_max) return best;
            }
            grid.visit_ring(wrap, ix, iy, k, consider);
        }
        if (!wrap) return best;
        // even cell counts leave one aliased row and column unscanned
        best = BestPick{};
    }
    for (std::size_t g = 0; g < real.ut.size(); ++g)
        for (std::size_t i = 0; i < real.ut[g].size(); ++i)
            consider({real.ut[g][i], static_cast<int>(g), static_cast<int>(i)});
    return best;
}

}  // namespace

void validate_sim_config(const SimConfig& cfg) {
    if (!(cfg.window_side > 0.0)) throw std::domain_error("window_side must be positive");
    if (cfg.realizations < 1) throw std::domain_error("realizations must be at least 1");
    if (cfg.boundary == Boundary::guard &&
        !(cfg.guard_margin >= 0.0 && cfg.guard_margin < cfg.window_side / 2.0))
        throw std::domain_error("guard margin must lie in [0, window_side/2)");
}

Rng::Rng(std::uint64_t seed, std::uint64_t stream, std::uint64_t salt, std::uint64_t a,
         std::uint64_t b) {
    std::uint64_t h = 0;
    for (std::uint64_t word : {seed, stream, salt, a, b}) h = mix(h + kGolden + word);
    state_ = h;
}

std::uint64_t Rng::next_u64() {
    state_ += kGolden;
    return mix(state_);
}

double Rng::next_unit() {
    return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
}

double Rng::next_exp() { return -std::log(next_unit()); }

long Rng::next_poisson(double mean) {
    if (!(mean >= 0.0) || !std::isfinite(mean))
        throw std::domain_error("poisson mean must be finite and nonnegative");
    long total = 0;
    // chunking keeps exp(-mean) away from underflow; partial sums stay Poisson
    while (mean > 30.0) {
        total += knuth_poisson(*this, 30.0);
        mean -= 30.0;
    }
    return total + knuth_poisson(*this, mean);
}

double pair_distance(const Realization& real, const Point& a, const Point& b) {
    return std::sqrt(pair_distance2(real, a, b));
}

Realization draw_realization(const SystemParams& params, const GroupProfile& groups,
                             const CachingStrategy& strategy, const SimConfig& cfg,
                             std::uint64_t stream_index) {
    validate_strategy(groups, strategy);
    validate_sim_config(cfg);
    const double side = cfg.window_side;
    const double area = side * side;
    const std::size_t M = groups.size();

    Realization real;
    real.seed = cfg.seed;
    real.stream = stream_index;
    real.window_side = side;
    real.boundary = cfg.boundary;
    real.guard_margin = cfg.guard_margin;
    real.weight = groups.weights(params.alpha);
    real.ut.resize(M);
    real.ur.resize(M);

    for (std::size_t m = 0; m < M; ++m) {
        Rng rng(cfg.seed, stream_index, kSaltUsers, m);
        const long count = rng.next_poisson(groups.lambda[m] * area);
        const double q = groups.lambda[m] > 0.0
                             ? std::clamp(strategy.c[m] / groups.lambda[m], 0.0, 1.0)
                             : 0.0;
        for (long i = 0; i < count; ++i) {
            const Point p{rng.next_unit() * side, rng.next_unit() * side};
            if (rng.next_unit() < q)
                real.ut[m].push_back(p);
            else
                real.ur[m].push_back(p);
        }
    }

    Rng rng(cfg.seed, stream_index, kSaltBs);
    const long count = rng.next_poisson(params.lambda_B * area);
    real.bs.reserve(static_cast<std::size_t>(count));
    for (long i = 0; i < count; ++i)
        real.bs.push_back({rng.next_unit() * side, rng.next_unit() * side});

    real.assoc.resize(M);
    real.active.resize(M);
    for (std::size_t m = 0; m < M; ++m) {
        real.assoc[m].assign(real.ur[m].size(), Association{});
        real.active[m].assign(real.ut[m].size(), 0);
    }
    return real;
}

Realization associate(Realization real, const SystemParams& params) {
    const std::size_t M = real.ut.size();
    real.assoc.resize(M);
    real.active.resize(M);
    for (std::size_t m = 0; m < M; ++m) {
        real.assoc[m].assign(real.ur[m].size(), Association{});
        real.active[m].assign(real.ut[m].size(), 0);
    }
    real.probe_assoc = Association{};

    const CellGrid grid(real);
    const double reach2 = params.R * params.R;
    const auto in_range = [&](const BestPick& pick) {
        return pick.a.group >= 0 && pick.d2 <= reach2 ? pick.a : Association{};
    };
    for (std::size_t m = 0; m < M; ++m)
        for (std::size_t i = 0; i < real.ur[m].size(); ++i) {
            const Association a = in_range(best_server(real, grid, real.ur[m][i]));
            real.assoc[m][i] = a;
            if (a.group >= 0) real.active[a.group][a.index] = 1;
        }
    if (real.probe) real.probe_assoc = in_range(best_server(real, grid, *real.probe));
    return real;
}

std::optional<double> measure_sir(const Realization& real, const SystemParams& params,
                                  const UrId& who) {
    const Point* rx = nullptr;
    Association a;
    std::uint64_t rx_word = 0;
    if (who.probe) {
        if (!real.probe) throw std::domain_error("realization carries no probe");
        rx = &*real.probe;
        a = real.probe_assoc;
        rx_word = point_word(kKindProbe, -1, 0);
    } else {
        if (who.group < 0 || static_cast<std::size_t>(who.group) >= real.ur.size() ||
            who.index < 0 ||
            static_cast<std::size_t>(who.index) >= real.ur[who.group].size())
            throw std::domain_error("requester id out of range");
        rx = &real.ur[who.group][who.index];
        a = real.assoc[who.group][who.index];
        rx_word = point_word(kKindUr, who.group, who.index);
    }
    if (a.group < 0) return std::nullopt;

    const double expo = -params.alpha / 2.0;
    const auto path = [&](const Point& p) {
        return std::pow(pair_distance2(real, *rx, p), expo);
    };
    const double h0 = link_fading(real, rx_word, point_word(kKindUt, a.group, a.index));
    const double signal = params.p_t * h0 * path(real.ut[a.group][a.index]);

    double interference = 0.0;
    const auto& mates = real.ut[a.group];
    const auto& flags = real.active[a.group];
    for (std::size_t j = 0; j < mates.size(); ++j) {
        if (static_cast<int>(j) == a.index || !flags[j]) continue;
        interference += params.p_t *
                        link_fading(real, rx_word, point_word(kKindUt, a.group,
                                                              static_cast<int>(j))) *
                        path(mates[j]);
    }
    for (std::size_t j = 0; j < real.bs.size(); ++j)
        interference +=
            params.p_B *
            link_fading(real, rx_word, point_word(kKindBs, 0, static_cast<int>(j))) *
            path(real.bs[j]);

    if (!(interference > 0.0)) return std::numeric_limits<double>::infinity();
    return signal / interference;
}

const char* metric_name(SimMetric metric) {
    switch (metric) {
        case SimMetric::success_prob: return "success_prob";
        case SimMetric::assoc_prob: return "assoc_prob";
        case SimMetric::active_ratio: return "active_ratio";
        case SimMetric::offload_gain: return "offload_gain";
    }
    return "unknown";
}

std::optional<SimMetric> parse_metric(const std::string& name) {
    if (name == "success_prob") return SimMetric::success_prob;
    if (name == "assoc_prob") return SimMetric::assoc_prob;
    if (name == "active_ratio") return SimMetric::active_ratio;
    if (name == "offload_gain") return SimMetric::offload_gain;
    return std::nullopt;
}

SimEstimate estimate(const SystemParams& params, const GroupProfile& groups,
                     const CachingStrategy& strategy, const SimConfig& cfg,
                     SimMetric metric) {
    validate_strategy(groups, strategy);
    validate_sim_config(cfg);
    const std::size_t n = static_cast<std::size_t>(cfg.realizations);
    const double side = cfg.window_side;
    const double inner_lo = cfg.boundary == Boundary::guard ? cfg.guard_margin : 0.0;
    const double inner_hi = side - inner_lo;
    const double area_used = (inner_hi - inner_lo) * (inner_hi - inner_lo);

    std::vector<double> value(n, 0.0);
    std::vector<double> probe_hit(n, 0.0);
    std::vector<std::uint8_t> counted(n, 1);
    std::vector<std::exception_ptr> failures(n);

    parallel_for(n, [&](std::size_t r) {
        try {
            Realization real = draw_realization(params, groups, strategy, cfg, r);
            real.probe = Point{side / 2.0, side / 2.0};
            real = associate(std::move(real), params);
            switch (metric) {
                case SimMetric::success_prob: {
                    const auto sir = measure_sir(real, params, UrId{true, 0, 0});
                    value[r] = sir && *sir >= params.gamma_th ? 1.0 : 0.0;
                    break;
                }
                case SimMetric::assoc_prob:
                    value[r] = real.probe_assoc.group >= 0 ? 1.0 : 0.0;
                    break;
                case SimMetric::active_ratio: {
                    long total = 0;
                    long on = 0;
                    for (const auto& flags : real.active)
                        for (const auto f : flags) {
                            ++total;
                            on += f;
                        }
                    if (total == 0)
                        counted[r] = 0;
                    else
                        value[r] = static_cast<double>(on) / static_cast<double>(total);
                    break;
                }
                case SimMetric::offload_gain: {
                    long hits = 0;
                    for (std::size_t g = 0; g < real.ur.size(); ++g)
                        for (std::size_t i = 0; i < real.ur[g].size(); ++i) {
                            const Point& p = real.ur[g][i];
                            if (p.x < inner_lo || p.x > inner_hi || p.y < inner_lo ||
                                p.y > inner_hi)
                                continue;
                            const auto sir = measure_sir(
                                real, params,
                                UrId{false, static_cast<int>(g), static_cast<int>(i)});
                            if (sir && *sir >= params.gamma_th) ++hits;
                        }
                    value[r] = static_cast<double>(hits) / area_used;
                    const auto sir = measure_sir(real, params, UrId{true, 0, 0});
                    probe_hit[r] = sir && *sir >= params.gamma_th ? 1.0 : 0.0;
                    break;
                }
            }
        } catch (...) {
            failures[r] = std::current_exception();
        }
    });
    for (const auto& failure : failures)
        if (failure) std::rethrow_exception(failure);

    long used = 0;
    double mean = 0.0;
    for (std::size_t r = 0; r < n; ++r)
        if (counted[r]) {
            ++used;
            mean += value[r];
        }
    if (used == 0)
        throw degenerate_estimate_error(std::string(metric_name(metric)) +
                                        ": conditioning event never occurred in " +
                                        std::to_string(n) + " realizations");
    mean /= static_cast<double>(used);
    double ss = 0.0;
    for (std::size_t r = 0; r < n; ++r)
        if (counted[r]) ss += (value[r] - mean) * (value[r] - mean);
    const double half =
        used > 1 ? kZ99 * std::sqrt(ss / (static_cast<double>(used) - 1.0)) /
                       std::sqrt(static_cast<double>(used))
                 : 0.0;

    SimEstimate out;
    out.metric = metric;
    out.mean = mean;
    out.ci99_half = half;
    out.realizations = static_cast<int>(used);
    out.seed = cfg.seed;
    if (metric == SimMetric::offload_gain) {
        double requesters = 0.0;
        for (std::size_t m = 0; m < groups.size(); ++m)
            requesters += std::max(0.0, groups.lambda[m] - strategy.c[m]);
        double hit_rate = 0.0;
        for (std::size_t r = 0; r < n; ++r) hit_rate += probe_hit[r];
        out.cross_check = requesters * hit_rate / static_cast<double>(n);
    }
    return out;
}

void dump_realization(const Realization& real, std::ostream& os) {
    char line[128];
    const auto put = [&](const char* kind, int group, const Point& p) {
        std::snprintf(line, sizeof line, "%s %d %.6f %.6f\n", kind, group, p.x, p.y);
        os << line;
    };
    for (std::size_t m = 0; m < real.ut.size(); ++m)
        for (const Point& p : real.ut[m]) put("UT", static_cast<int>(m) + 1, p);
    for (std::size_t m = 0; m < real.ur.size(); ++m)
        for (const Point& p : real.ur[m]) put("UR", static_cast<int>(m) + 1, p);
    for (const Point& p : real.bs) put("BS", 0, p);
}

}  // namespace d2d
