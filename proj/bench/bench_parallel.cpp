// Times the parallel kernels against their serial reference (the same code
// capped to one worker) and checks the outputs are bit-identical.

#include "d2d/figures.hpp"
#include "d2d/model.hpp"
#include "d2d/opt_asymptotic.hpp"
#include "d2d/opt_exact.hpp"
#include "d2d/parallel.hpp"
#include "d2d/sim.hpp"

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <functional>
#include <optional>
#include <string>
#include <vector>

using namespace d2d;

namespace {

struct Workload {
    std::string name;
    // returns a digest of the result so the two runs can be compared
    std::function<std::vector<double>()> run;
};

double time_once(const std::function<std::vector<double>()>& run,
                 std::vector<double>& digest) {
    const auto t0 = std::chrono::steady_clock::now();
    digest = run();
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

struct EnvGuard {
    std::optional<std::string> saved;
    EnvGuard() {
        if (const char* v = std::getenv("D2DCACHE_THREADS")) saved = v;
    }
    void cap_to_one() { setenv("D2DCACHE_THREADS", "1", 1); }
    void restore() {
        if (saved)
            setenv("D2DCACHE_THREADS", saved->c_str(), 1);
        else
            unsetenv("D2DCACHE_THREADS");
    }
    ~EnvGuard() { restore(); }
};

}  // namespace

int main(int argc, char** argv) {
    bool quick = false;
    for (int i = 1; i < argc; ++i) {
        if (std::strcmp(argv[i], "--quick") == 0) {
            quick = true;
        } else {
            std::fprintf(stderr, "usage: %s [--quick]\n", argv[0]);
            return 2;
        }
    }

    const GroupProfile three({0.1, 0.1, 0.1}, {0.1, 0.3, 0.6});
    const CachingStrategy cache{{0.05, 0.09, 0.08}};
    const GroupProfile skew({0.02, 0.1}, {0.1, 0.9});
    const SystemParams params = SystemParams::from_db(3.0, 3.0, 15.0, 20.0, 1e-4, 15.0);

    std::vector<Workload> workloads;
    {
        SimConfig sim;
        sim.window_side = quick ? 50.0 : 100.0;
        sim.realizations = quick ? 100 : 800;
        sim.seed = 5;
        const std::vector<double> gammas{1.0, 2.0, 4.0};
        workloads.push_back({"monte-carlo success curve", [=] {
                                 std::vector<double> digest;
                                 for (const CurvePoint& pt :
                                      mc_success_curve(params, gammas, three, cache, sim)) {
                                     digest.push_back(pt.mean);
                                     digest.push_back(pt.ci99_half);
                                 }
                                 return digest;
                             }});
    }
    {
        GridSpec spec;
        spec.step_x = three.total_density() / (quick ? 30 : 120);
        workloads.push_back({"gain grid search", [=] {
                                 const ExactSolution sol = solve_exact(params, three, spec);
                                 std::vector<double> digest{sol.x_star, sol.y_star, sol.gain};
                                 digest.insert(digest.end(), sol.c_star.c.begin(),
                                               sol.c_star.c.end());
                                 return digest;
                             }});
    }
    {
        const double step = skew.total_density() / (quick ? 100 : 400);
        workloads.push_back({"ratio-ladder sweep", [=] {
                                 const AsymptoticSolution sol =
                                     solve_asymptotic(params, skew, step);
                                 std::vector<double> digest{sol.x_star, sol.gain_lower,
                                                            sol.gain_unbounded};
                                 digest.insert(digest.end(), sol.c_star.c.begin(),
                                               sol.c_star.c.end());
                                 return digest;
                             }});
    }

    EnvGuard env;
    std::printf("%-28s %10s %10s %8s  %s\n", "workload", "serial", "parallel", "speedup",
                "identical");
    bool all_identical = true;
    for (const Workload& w : workloads) {
        env.cap_to_one();
        std::vector<double> serial_digest;
        const double serial = time_once(w.run, serial_digest);
        env.restore();
        std::vector<double> parallel_digest;
        const double parallel = time_once(w.run, parallel_digest);
        const bool same = serial_digest == parallel_digest;
        all_identical = all_identical && same;
        std::printf("%-28s %9.3fs %9.3fs %7.2fx  %s\n", w.name.c_str(), serial, parallel,
                    parallel > 0.0 ? serial / parallel : 0.0, same ? "yes" : "NO");
    }
    std::printf("workers available: %d\n", worker_count());
    return all_identical ? 0 : 1;
}
