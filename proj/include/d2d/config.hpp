#pragma once

#include "d2d/model.hpp"
#include "d2d/opt_asymptotic.hpp"
#include "d2d/opt_exact.hpp"
#include "d2d/sim.hpp"

#include <optional>
#include <string>
#include <vector>

namespace d2d {

struct GroupSpec {
    std::optional<double> lambda;
    std::optional<double> bias;
    std::optional<double> trust_count;
    std::optional<double> cache;

    bool operator==(const GroupSpec&) const = default;
};

// Parsed experiment file. dB fields stay in dB here so the file can be
// written back verbatim; make_system converts them exactly once.
struct ExperimentConfig {
    // system
    double alpha = 3.0;
    double gamma_th_db = 3.0;
    double p_t_dbm = 15.0;
    double p_b_dbm = 20.0;
    double lambda_b = 1e-4;
    double r_max = 15.0;

    // groups, 1-based in the file
    std::vector<GroupSpec> groups;

    // solver; zero step or tolerance defers to the per-solver default
    std::string algorithm = "exact";
    double step_x = 0.0;
    double step_y = 0.0;
    double tol = 0.0;
    double zeta = 0.5;
    double eps = 0.01;
    long max_iterations = 500;
    double x_bar = 0.0;  // fixed caching total for trace runs; 0 defers

    // sim
    double window = 100.0;
    long realizations = 2000;
    std::uint64_t seed = 1;
    std::string boundary = "torus";
    double margin = 0.0;
    std::string dump;  // empty disables the realization dump

    // figure command only; 0 means unset
    int figure_id = 0;

    // sweep; both fields set or both empty
    std::string sweep_parameter;
    std::vector<double> sweep_values;

    bool operator==(const ExperimentConfig&) const = default;
};

// `block.key = value` lines, `#` comments; throws config_error with the
// offending location
ExperimentConfig parse_config(const std::string& text,
                              const std::string& origin = "<config>");
ExperimentConfig load_config(const std::string& path);

// syntax-only variant; schema validation is the caller's job
ExperimentConfig parse_config_loose(const std::string& text,
                                    const std::string& origin = "<config>");

// the assignment lines of a config text in file order, comments stripped
std::vector<std::string> config_assignments(const std::string& text,
                                            const std::string& origin = "<config>");

// one assignment in the file grammar, as given to --set
void apply_override(ExperimentConfig& cfg, const std::string& assignment);

// writes one numeric field by path; rejects non-numeric targets
void apply_sweep_value(ExperimentConfig& cfg, const std::string& path, double value);

// full schema check; parse_config and load_config already run it
void validate_config(const ExperimentConfig& cfg);

// serialization that reloads to an identical configuration
std::string save_config(const ExperimentConfig& cfg);

SystemParams make_system(const ExperimentConfig& cfg);
GroupProfile make_groups(const ExperimentConfig& cfg);
std::optional<CachingStrategy> make_strategy(const ExperimentConfig& cfg);
SimConfig make_sim(const ExperimentConfig& cfg);
GridSpec make_grid(const ExperimentConfig& cfg);
SorOptions make_sor(const ExperimentConfig& cfg);

// density search step shared by the 1-D solvers and the one_ut probe density
double delta_x(const ExperimentConfig& cfg);

}  // namespace d2d
