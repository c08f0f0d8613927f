#pragma once

#include "d2d/config.hpp"

#include <optional>
#include <string>
#include <vector>

namespace d2d {

struct FigureRow {
    double x = 0.0;
    std::string series;
    double value = 0.0;
    std::optional<double> ci99_half;
};

struct FigureTable {
    std::vector<FigureRow> rows;
};

// base parameters of the published sweep; user directives layer on top
ExperimentConfig figure_defaults(int figure_id);

// reproduces the named sweep; cfg.sweep_values, when set, replaces the
// primary x grid
FigureTable build_figure(const ExperimentConfig& cfg);

struct CurvePoint {
    double mean = 0.0;
    double ci99_half = 0.0;
};

// success frequency against every threshold from one shared batch of
// realizations; the probe SIR is threshold-free so the grid costs one pass
std::vector<CurvePoint> mc_success_curve(const SystemParams& params,
                                         const std::vector<double>& gamma_linear,
                                         const GroupProfile& groups,
                                         const CachingStrategy& strategy,
                                         const SimConfig& sim);

}  // namespace d2d
