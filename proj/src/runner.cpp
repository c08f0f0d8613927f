#include "d2d/runner.hpp"

#include "d2d/baselines.hpp"
#include "d2d/errors.hpp"
#include "d2d/figures.hpp"
#include "d2d/opt_asymptotic.hpp"
#include "d2d/opt_exact.hpp"
#include "d2d/opt_unbiased.hpp"
#include "d2d/sim.hpp"

#include "CLI11.hpp"

#include <chrono>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace d2d {

namespace {

std::string num(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.12g", v);
    return buf;
}

std::string secs(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.3f", v);
    return buf;
}

double elapsed(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

CachingStrategy required_strategy(const ExperimentConfig& cfg) {
    auto strategy = make_strategy(cfg);
    if (!strategy)
        throw config_error(
            "groups: no caching densities set; run optimize or give groups.<m>.cache");
    return *strategy;
}

void eval_rows(const ExperimentConfig& point, const std::vector<std::string>& prefix,
               CsvTable& table) {
    const SystemParams params = make_system(point);
    const GroupProfile groups = make_groups(point);
    const CachingStrategy strategy = required_strategy(point);
    const Metrics m = offload_gain(params, groups, strategy);

    auto push = [&](const std::string& metric, const std::string& group, double value) {
        std::vector<std::string> row = prefix;
        row.insert(row.end(), {metric, group, num(value)});
        table.rows.push_back(std::move(row));
    };
    for (std::size_t g = 0; g < groups.size(); ++g) {
        const std::string tag = std::to_string(g + 1);
        push("assoc_prob", tag, m.assoc_prob[g]);
        push("active_ratio", tag, m.active_ratio[g]);
        push("success_prob_given_group", tag, m.success_prob_given_group[g]);
    }
    push("success_prob", "", m.success_prob);
    push("offload_gain", "", m.offload_gain);
}

std::string read_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw config_error(path + ": cannot open");
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

}  // namespace

std::string CsvTable::to_csv() const {
    std::string out;
    auto line = [&](const std::vector<std::string>& cells) {
        for (std::size_t i = 0; i < cells.size(); ++i) {
            if (i) out += ',';
            out += cells[i];
        }
        out += '\n';
    };
    line(header);
    for (const auto& row : rows) line(row);
    return out;
}

CsvTable run_eval(const ExperimentConfig& cfg) {
    CsvTable table;
    if (cfg.sweep_parameter.empty()) {
        table.header = {"metric", "group", "value"};
        eval_rows(cfg, {}, table);
        return table;
    }
    table.header = {"x", "metric", "group", "value"};
    for (double x : cfg.sweep_values) {
        ExperimentConfig point = cfg;
        point.sweep_parameter.clear();
        point.sweep_values.clear();
        apply_sweep_value(point, cfg.sweep_parameter, x);
        validate_config(point);
        eval_rows(point, {num(x)}, table);
    }
    return table;
}

CsvTable run_optimize(const ExperimentConfig& cfg) {
    if (!cfg.sweep_parameter.empty())
        throw config_error("sweep: optimize runs a single point; use the figure command");
    const SystemParams params = make_system(cfg);
    const GroupProfile groups = make_groups(cfg);
    const std::size_t m = groups.size();

    CsvTable table;
    table.header = {"algorithm", "x", "y", "gain"};
    for (std::size_t g = 1; g <= m; ++g) table.header.push_back("c_" + std::to_string(g));
    table.header.insert(table.header.end(), {"iters", "seconds"});

    auto push = [&](const std::string& name, double x, const std::string& y, double gain,
                    const CachingStrategy& c, long long iters, double seconds) {
        std::vector<std::string> row{name, num(x), y, num(gain)};
        for (double v : c.c) row.push_back(num(v));
        row.push_back(std::to_string(iters));
        row.push_back(secs(seconds));
        table.rows.push_back(std::move(row));
    };
    auto gain_of = [&](const CachingStrategy& c) {
        return offload_gain(params, groups, c).offload_gain;
    };

    double exact_gain = 0.0, uniform_gain = 0.0, one_ut_gain = 0.0;
    auto run_one = [&](const std::string& algo) {
        const auto t0 = std::chrono::steady_clock::now();
        if (algo == "exact") {
            const ExactSolution sol = solve_exact(params, groups, make_grid(cfg));
            exact_gain = sol.gain;
            push(algo, sol.x_star, num(sol.y_star), sol.gain, sol.c_star, sol.iterations_total,
                 elapsed(t0));
        } else if (algo == "asymptotic") {
            const AsymptoticSolution sol =
                solve_asymptotic(params, groups, cfg.step_x, make_sor(cfg));
            push(algo, sol.x_star, "", sol.gain_lower, sol.c_star, sol.iterations_total,
                 elapsed(t0));
        } else if (algo == "unbiased") {
            const UnbiasedSolution sol = solve_unbiased(params, groups, cfg.step_x);
            push(algo, sol.x_star, "", sol.gain, sol.c_star,
                 static_cast<long long>(sol.trace.size()), elapsed(t0));
        } else if (algo == "uniform") {
            const CachingStrategy c = policy_uniform(params, groups, cfg.step_x);
            uniform_gain = gain_of(c);
            push(algo, c.total(), "", uniform_gain, c, 0, elapsed(t0));
        } else if (algo == "one_ut") {
            const CachingStrategy c = policy_one_ut(groups, delta_x(cfg));
            one_ut_gain = gain_of(c);
            push(algo, c.total(), "", one_ut_gain, c, 0, elapsed(t0));
        } else {
            throw config_error("solver.algorithm: unknown algorithm " + algo);
        }
    };

    if (cfg.algorithm == "all") {
        for (const char* algo : {"exact", "asymptotic", "uniform", "one_ut"}) run_one(algo);
        if (exact_gain < uniform_gain - 1e-9 || exact_gain < one_ut_gain - 1e-9)
            throw internal_consistency_error("optimize: exhaustive search lost to a baseline");
    } else {
        run_one(cfg.algorithm);
    }
    return table;
}

CsvTable run_simulate(const ExperimentConfig& cfg) {
    if (!cfg.sweep_parameter.empty())
        throw config_error("sweep: simulate runs a single point; use the figure command");
    const SystemParams params = make_system(cfg);
    const GroupProfile groups = make_groups(cfg);
    const CachingStrategy strategy = required_strategy(cfg);
    const SimConfig sim = make_sim(cfg);

    if (!cfg.dump.empty()) {
        std::ofstream out(cfg.dump);
        if (!out) throw config_error("sim.dump: cannot write " + cfg.dump);
        const Realization real =
            associate(draw_realization(params, groups, strategy, sim, 0), params);
        dump_realization(real, out);
    }

    CsvTable table;
    table.header = {"metric", "mean", "ci99_half", "realizations", "seed"};
    for (SimMetric metric : {SimMetric::success_prob, SimMetric::assoc_prob,
                             SimMetric::active_ratio, SimMetric::offload_gain}) {
        const SimEstimate est = estimate(params, groups, strategy, sim, metric);
        table.rows.push_back({metric_name(metric), num(est.mean), num(est.ci99_half),
                              std::to_string(est.realizations), std::to_string(est.seed)});
    }
    return table;
}

CsvTable run_figure(const ExperimentConfig& cfg) {
    const FigureTable fig = build_figure(cfg);
    CsvTable table;
    table.header = {"x", "series", "value", "ci99_half"};
    for (const FigureRow& row : fig.rows)
        table.rows.push_back({num(row.x), row.series, num(row.value),
                              row.ci99_half ? num(*row.ci99_half) : std::string()});
    return table;
}

ExperimentConfig load_figure_config(const std::string& path,
                                    const std::vector<std::string>& overrides) {
    const std::string text = read_file(path);
    ExperimentConfig probe = parse_config_loose(text, path);
    for (const auto& assignment : overrides) apply_override(probe, assignment);
    if (probe.figure_id == 0) throw config_error("figure.id: required by the figure command");

    ExperimentConfig cfg = figure_defaults(probe.figure_id);
    for (const auto& assignment : config_assignments(text, path)) apply_override(cfg, assignment);
    for (const auto& assignment : overrides) apply_override(cfg, assignment);
    return cfg;
}

int cli_main(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"trust-biased D2D caching: analytic metrics, optimizers, Monte-Carlo"};
    app.require_subcommand(1);

    std::string config_path;
    std::vector<std::string> sets;
    std::string out_path;
    unsigned long long seed = 0;
    for (const auto& [name, what] :
         {std::pair<const char*, const char*>{"eval", "analytic metrics for one config"},
          {"optimize", "per-group caching densities maximizing the offloading gain"},
          {"simulate", "Monte-Carlo estimates of the analytic metrics"},
          {"figure", "pre-defined experiment selected by figure.id"}}) {
        CLI::App* sub = app.add_subcommand(name, what);
        sub->add_option("--config", config_path, "config file")->required();
        sub->add_option("--set", sets, "override, block.key=value");
        sub->add_option("--out", out_path, "also write the CSV here");
        sub->add_option("--seed", seed, "override sim.seed");
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        out << app.help();
        return 0;
    } catch (const CLI::CallForAllHelp& e) {
        out << app.help("", CLI::AppFormatMode::All);
        return 0;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << '\n';
        return 2;
    }

    CLI::App* sub = app.get_subcommands().front();
    const std::string command = sub->get_name();
    try {
        ExperimentConfig cfg;
        if (command == "figure") {
            cfg = load_figure_config(config_path, sets);
        } else {
            cfg = load_config(config_path);
            for (const auto& assignment : sets) apply_override(cfg, assignment);
        }
        if (sub->count("--seed") > 0) cfg.seed = seed;
        validate_config(cfg);

        CsvTable table;
        if (command == "eval")
            table = run_eval(cfg);
        else if (command == "optimize")
            table = run_optimize(cfg);
        else if (command == "simulate")
            table = run_simulate(cfg);
        else
            table = run_figure(cfg);

        const std::string text = table.to_csv();
        out << text;
        if (!out_path.empty()) {
            std::ofstream file(out_path);
            if (!file) throw config_error("--out: cannot write " + out_path);
            file << text;
        }
        return 0;
    } catch (const config_error& e) {
        err << "error: " << e.what() << '\n';
        return 2;
    } catch (const std::domain_error& e) {
        err << "error: " << e.what() << '\n';
        return 2;
    } catch (const non_convergence_error& e) {
        err << "error: " << e.what() << '\n';
        return 3;
    } catch (const degenerate_estimate_error& e) {
        err << "error: " << e.what() << '\n';
        return 4;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return 1;
    }
}

}  // namespace d2d
