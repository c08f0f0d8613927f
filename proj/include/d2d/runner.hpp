#pragma once

#include "d2d/config.hpp"

#include <iosfwd>
#include <string>
#include <vector>

namespace d2d {

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    std::string to_csv() const;
};

// analytic metrics for one config, one row per (metric, group);
// honours the sweep block by prefixing an x column
CsvTable run_eval(const ExperimentConfig& cfg);

// one row per algorithm; "all" expands to exact, asymptotic, uniform, one_ut
CsvTable run_optimize(const ExperimentConfig& cfg);

// Monte-Carlo estimates of all four metrics under one shared seed
CsvTable run_simulate(const ExperimentConfig& cfg);

// pre-defined experiment referenced by figure.id
CsvTable run_figure(const ExperimentConfig& cfg);

// figure configs start from the built-in defaults, then apply the file and
// the command-line overrides on top
ExperimentConfig load_figure_config(const std::string& path,
                                    const std::vector<std::string>& overrides);

// full command-line entry point, returns the process exit code
int cli_main(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace d2d
