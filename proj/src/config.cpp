#include "d2d/config.hpp"

#include "d2d/errors.hpp"

#include <cctype>
#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

namespace d2d {

namespace {

[[noreturn]] void fail(const std::string& where, const std::string& what) {
    throw config_error(where.empty() ? what : where + ": " + what);
}

std::string trim(const std::string& s) {
    std::size_t a = 0;
    std::size_t b = s.size();
    while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
    while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
    return s.substr(a, b - a);
}

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

double parse_number(const std::string& text, const std::string& where) {
    if (text.empty()) fail(where, "empty value");
    errno = 0;
    char* end = nullptr;
    const double v = std::strtod(text.c_str(), &end);
    if (end != text.c_str() + text.size() || errno == ERANGE)
        fail(where, "not a number '" + text + "'");
    return v;
}

long parse_long(const std::string& text, const std::string& where) {
    if (text.empty()) fail(where, "empty value");
    errno = 0;
    char* end = nullptr;
    const long v = std::strtol(text.c_str(), &end, 10);
    if (end != text.c_str() + text.size() || errno == ERANGE)
        fail(where, "not an integer '" + text + "'");
    return v;
}

std::uint64_t parse_u64(const std::string& text, const std::string& where) {
    if (text.empty() || text[0] == '-') fail(where, "not an unsigned integer '" + text + "'");
    errno = 0;
    char* end = nullptr;
    const unsigned long long v = std::strtoull(text.c_str(), &end, 10);
    if (end != text.c_str() + text.size() || errno == ERANGE)
        fail(where, "not an unsigned integer '" + text + "'");
    return v;
}

std::vector<double> parse_list(const std::string& text, const std::string& where) {
    std::vector<double> out;
    std::string item;
    std::istringstream in(text);
    while (std::getline(in, item, ',')) out.push_back(parse_number(trim(item), where));
    if (out.empty()) fail(where, "empty list");
    return out;
}

bool known_algorithm(const std::string& a) {
    return a == "exact" || a == "asymptotic" || a == "unbiased" || a == "uniform" ||
           a == "one_ut" || a == "all";
}

GroupSpec& group_slot(ExperimentConfig& cfg, const std::string& index_text,
                      const std::string& where) {
    const long index = parse_long(index_text, where);
    if (index < 1 || index > 100) fail(where, "group index must lie in 1..100");
    if (cfg.groups.size() < static_cast<std::size_t>(index))
        cfg.groups.resize(static_cast<std::size_t>(index));
    return cfg.groups[static_cast<std::size_t>(index) - 1];
}

void assign_key(ExperimentConfig& cfg, const std::string& key, const std::string& value,
                const std::string& origin) {
    const std::string where = origin.empty() ? key : origin + ": " + key;

    if (key == "system.alpha") { cfg.alpha = parse_number(value, where); return; }
    if (key == "system.gamma_th_db") { cfg.gamma_th_db = parse_number(value, where); return; }
    if (key == "system.p_t_dbm") { cfg.p_t_dbm = parse_number(value, where); return; }
    if (key == "system.p_b_dbm") { cfg.p_b_dbm = parse_number(value, where); return; }
    if (key == "system.lambda_b") { cfg.lambda_b = parse_number(value, where); return; }
    if (key == "system.r_max") { cfg.r_max = parse_number(value, where); return; }

    if (key == "solver.algorithm") {
        if (!known_algorithm(value))
            fail(where, "unknown algorithm '" + value +
                            "' (exact, asymptotic, unbiased, uniform, one_ut, all)");
        cfg.algorithm = value;
        return;
    }
    if (key == "solver.step_x") { cfg.step_x = parse_number(value, where); return; }
    if (key == "solver.step_y") { cfg.step_y = parse_number(value, where); return; }
    if (key == "solver.tol") { cfg.tol = parse_number(value, where); return; }
    if (key == "solver.zeta") { cfg.zeta = parse_number(value, where); return; }
    if (key == "solver.eps") { cfg.eps = parse_number(value, where); return; }
    if (key == "solver.max_iterations") { cfg.max_iterations = parse_long(value, where); return; }
    if (key == "solver.x_bar") { cfg.x_bar = parse_number(value, where); return; }

    if (key == "sim.window") { cfg.window = parse_number(value, where); return; }
    if (key == "sim.realizations") { cfg.realizations = parse_long(value, where); return; }
    if (key == "sim.seed") { cfg.seed = parse_u64(value, where); return; }
    if (key == "sim.boundary") {
        if (value != "torus" && value != "guard")
            fail(where, "boundary must be torus or guard");
        cfg.boundary = value;
        return;
    }
    if (key == "sim.margin") { cfg.margin = parse_number(value, where); return; }
    if (key == "sim.dump") { cfg.dump = value; return; }

    if (key == "figure.id") {
        cfg.figure_id = static_cast<int>(parse_long(value, where));
        return;
    }

    if (key == "sweep.parameter") { cfg.sweep_parameter = value; return; }
    if (key == "sweep.values") { cfg.sweep_values = parse_list(value, where); return; }

    if (key.rfind("groups.", 0) == 0) {
        const std::string rest = key.substr(7);
        const std::size_t dot = rest.find('.');
        if (dot == std::string::npos || dot == 0 || dot + 1 >= rest.size())
            fail(where, "expected groups.<index>.<field>");
        GroupSpec& g = group_slot(cfg, rest.substr(0, dot), where);
        const std::string field = rest.substr(dot + 1);
        if (field == "lambda") { g.lambda = parse_number(value, where); return; }
        if (field == "bias") { g.bias = parse_number(value, where); return; }
        if (field == "trust_count") { g.trust_count = parse_number(value, where); return; }
        if (field == "cache") { g.cache = parse_number(value, where); return; }
        fail(where, "unknown group field '" + field +
                        "' (lambda, bias, trust_count, cache)");
    }

    fail(where, "unknown key");
}

struct Assignment {
    std::string key;
    std::string value;
};

Assignment split_assignment(const std::string& text, const std::string& where) {
    const std::size_t eq = text.find('=');
    if (eq == std::string::npos) fail(where, "expected key = value in '" + text + "'");
    Assignment out{trim(text.substr(0, eq)), trim(text.substr(eq + 1))};
    if (out.key.empty()) fail(where, "missing key in '" + text + "'");
    return out;
}

bool sweepable(const std::string& path) {
    return path != "solver.algorithm" && path != "sim.boundary" && path != "sim.dump" &&
           path != "figure.id" && path.rfind("sweep.", 0) != 0;
}

}  // namespace

std::vector<std::string> config_assignments(const std::string& text,
                                            const std::string& origin) {
    std::vector<std::string> out;
    std::istringstream in(text);
    std::string line;
    int no = 0;
    while (std::getline(in, line)) {
        ++no;
        const std::size_t hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        if (line.find('=') == std::string::npos)
            fail(origin + ":" + std::to_string(no), "expected key = value");
        out.push_back(line);
    }
    return out;
}

ExperimentConfig parse_config_loose(const std::string& text, const std::string& origin) {
    ExperimentConfig cfg;
    std::set<std::string> seen;
    for (const std::string& entry : config_assignments(text, origin)) {
        const Assignment a = split_assignment(entry, origin);
        if (!seen.insert(a.key).second) fail(origin, "duplicate key '" + a.key + "'");
        assign_key(cfg, a.key, a.value, origin);
    }
    return cfg;
}

ExperimentConfig parse_config(const std::string& text, const std::string& origin) {
    ExperimentConfig cfg = parse_config_loose(text, origin);
    validate_config(cfg);
    return cfg;
}

ExperimentConfig load_config(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(path, "cannot open config file");
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_config(buf.str(), path);
}

void apply_override(ExperimentConfig& cfg, const std::string& assignment) {
    const Assignment a = split_assignment(assignment, "--set");
    assign_key(cfg, a.key, a.value, "--set");
}

void apply_sweep_value(ExperimentConfig& cfg, const std::string& path, double value) {
    if (!sweepable(path)) fail("sweep.parameter", "'" + path + "' cannot be swept");
    assign_key(cfg, path, fmt(value), "sweep");
}

void validate_config(const ExperimentConfig& cfg) {
    if (cfg.groups.empty() && cfg.figure_id == 0)
        fail("groups", "at least one group is required");

    bool any_bias = false;
    bool any_count = false;
    bool any_cache = false;
    bool all_cache = !cfg.groups.empty();
    for (std::size_t i = 0; i < cfg.groups.size(); ++i) {
        const GroupSpec& g = cfg.groups[i];
        const std::string tag = "groups." + std::to_string(i + 1);
        if (!g.lambda) fail(tag, "lambda is required");
        if (!std::isfinite(*g.lambda) || *g.lambda < 0.0)
            fail(tag + ".lambda", "must be a finite nonnegative density");
        if (g.bias && g.trust_count) fail(tag, "give bias or trust_count, not both");
        any_bias = any_bias || g.bias.has_value();
        any_count = any_count || g.trust_count.has_value();
        any_cache = any_cache || g.cache.has_value();
        all_cache = all_cache && g.cache.has_value();
    }
    if (!cfg.groups.empty()) {
        if (any_bias && any_count) fail("groups", "mix of bias and trust_count entries");
        if (!any_bias && !any_count) fail("groups", "every group needs bias or trust_count");
        for (std::size_t i = 0; i < cfg.groups.size(); ++i) {
            const std::string tag = "groups." + std::to_string(i + 1);
            if (any_bias && !cfg.groups[i].bias) fail(tag, "bias is required");
            if (any_count && !cfg.groups[i].trust_count) fail(tag, "trust_count is required");
        }
        if (any_cache && !all_cache)
            fail("groups", "cache must be given for every group or for none");
        try {
            const GroupProfile profile = make_groups(cfg);
            if (const auto strategy = make_strategy(cfg)) validate_strategy(profile, *strategy);
        } catch (const config_error&) {
            throw;
        } catch (const std::exception& e) {
            fail("groups", e.what());
        }
    }

    try {
        make_system(cfg);
    } catch (const std::exception& e) {
        fail("system", e.what());
    }
    try {
        validate_sim_config(make_sim(cfg));
    } catch (const config_error&) {
        throw;
    } catch (const std::exception& e) {
        fail("sim", e.what());
    }

    if (!known_algorithm(cfg.algorithm)) fail("solver.algorithm", "unknown algorithm");
    if (!std::isfinite(cfg.step_x) || cfg.step_x < 0.0)
        fail("solver.step_x", "must be zero or a positive step");
    if (!std::isfinite(cfg.step_y) || cfg.step_y < 0.0)
        fail("solver.step_y", "must be zero or a positive step");
    if (!std::isfinite(cfg.tol) || cfg.tol < 0.0)
        fail("solver.tol", "must be zero or a positive tolerance");
    if (!(cfg.zeta > 0.0 && cfg.zeta < 1.0)) fail("solver.zeta", "must lie in (0,1)");
    if (!(cfg.eps > 0.0 && cfg.eps < 1.0)) fail("solver.eps", "must lie in (0,1)");
    if (cfg.max_iterations < 1) fail("solver.max_iterations", "must be at least 1");
    if (!std::isfinite(cfg.x_bar) || cfg.x_bar < 0.0)
        fail("solver.x_bar", "must be zero or a positive density total");

    if (cfg.figure_id < 0 || cfg.figure_id > 12) fail("figure.id", "known figures are 1..12");

    const bool has_param = !cfg.sweep_parameter.empty();
    const bool has_values = !cfg.sweep_values.empty();
    if (cfg.figure_id != 0) {
        // figures carry their own sweep; bare values replace the x grid
        if (has_param)
            fail("sweep.parameter",
                 "figures define their own sweep; only sweep.values may override the grid");
    } else if (has_param != has_values) {
        fail("sweep", "parameter and values must be given together");
    } else if (has_param) {
        ExperimentConfig copy = cfg;
        copy.sweep_parameter.clear();
        copy.sweep_values.clear();
        apply_sweep_value(copy, cfg.sweep_parameter, cfg.sweep_values.front());
    }
}

std::string save_config(const ExperimentConfig& cfg) {
    std::ostringstream out;
    out << "system.alpha = " << fmt(cfg.alpha) << "\n";
    out << "system.gamma_th_db = " << fmt(cfg.gamma_th_db) << "\n";
    out << "system.p_t_dbm = " << fmt(cfg.p_t_dbm) << "\n";
    out << "system.p_b_dbm = " << fmt(cfg.p_b_dbm) << "\n";
    out << "system.lambda_b = " << fmt(cfg.lambda_b) << "\n";
    out << "system.r_max = " << fmt(cfg.r_max) << "\n";

    for (std::size_t i = 0; i < cfg.groups.size(); ++i) {
        const GroupSpec& g = cfg.groups[i];
        const std::string tag = "groups." + std::to_string(i + 1);
        if (g.lambda) out << tag << ".lambda = " << fmt(*g.lambda) << "\n";
        if (g.bias) out << tag << ".bias = " << fmt(*g.bias) << "\n";
        if (g.trust_count) out << tag << ".trust_count = " << fmt(*g.trust_count) << "\n";
        if (g.cache) out << tag << ".cache = " << fmt(*g.cache) << "\n";
    }

    out << "solver.algorithm = " << cfg.algorithm << "\n";
    out << "solver.step_x = " << fmt(cfg.step_x) << "\n";
    out << "solver.step_y = " << fmt(cfg.step_y) << "\n";
    out << "solver.tol = " << fmt(cfg.tol) << "\n";
    out << "solver.zeta = " << fmt(cfg.zeta) << "\n";
    out << "solver.eps = " << fmt(cfg.eps) << "\n";
    out << "solver.max_iterations = " << cfg.max_iterations << "\n";
    out << "solver.x_bar = " << fmt(cfg.x_bar) << "\n";

    out << "sim.window = " << fmt(cfg.window) << "\n";
    out << "sim.realizations = " << cfg.realizations << "\n";
    out << "sim.seed = " << cfg.seed << "\n";
    out << "sim.boundary = " << cfg.boundary << "\n";
    out << "sim.margin = " << fmt(cfg.margin) << "\n";
    if (!cfg.dump.empty()) out << "sim.dump = " << cfg.dump << "\n";

    if (cfg.figure_id != 0) out << "figure.id = " << cfg.figure_id << "\n";

    if (!cfg.sweep_parameter.empty()) {
        out << "sweep.parameter = " << cfg.sweep_parameter << "\n";
        out << "sweep.values = ";
        for (std::size_t i = 0; i < cfg.sweep_values.size(); ++i) {
            if (i) out << ", ";
            out << fmt(cfg.sweep_values[i]);
        }
        out << "\n";
    }
    return out.str();
}

SystemParams make_system(const ExperimentConfig& cfg) {
    return SystemParams::from_db(cfg.alpha, cfg.gamma_th_db, cfg.p_t_dbm, cfg.p_b_dbm,
                                 cfg.lambda_b, cfg.r_max);
}

GroupProfile make_groups(const ExperimentConfig& cfg) {
    std::vector<double> lambda;
    std::vector<double> bias;
    lambda.reserve(cfg.groups.size());
    for (const GroupSpec& g : cfg.groups) lambda.push_back(g.lambda.value_or(0.0));
    if (!cfg.groups.empty() && cfg.groups.front().trust_count) {
        TrustCounts counts;
        for (const GroupSpec& g : cfg.groups) counts.counts.push_back(g.trust_count.value_or(0.0));
        bias = trust_bias_from_counts(counts);
    } else {
        for (const GroupSpec& g : cfg.groups) bias.push_back(g.bias.value_or(0.0));
    }
    return GroupProfile(std::move(lambda), std::move(bias));
}

std::optional<CachingStrategy> make_strategy(const ExperimentConfig& cfg) {
    if (cfg.groups.empty() || !cfg.groups.front().cache) return std::nullopt;
    CachingStrategy out;
    out.c.reserve(cfg.groups.size());
    for (const GroupSpec& g : cfg.groups) {
        if (!g.cache) return std::nullopt;
        out.c.push_back(*g.cache);
    }
    return out;
}

SimConfig make_sim(const ExperimentConfig& cfg) {
    SimConfig out;
    out.window_side = cfg.window;
    out.realizations = static_cast<int>(cfg.realizations);
    out.seed = cfg.seed;
    out.boundary = cfg.boundary == "guard" ? Boundary::guard : Boundary::torus;
    out.guard_margin = cfg.margin;
    return out;
}

GridSpec make_grid(const ExperimentConfig& cfg) {
    GridSpec out;
    out.step_x = cfg.step_x;
    out.step_y = cfg.step_y;
    if (cfg.tol > 0.0) out.convergence = cfg.tol;
    return out;
}

SorOptions make_sor(const ExperimentConfig& cfg) {
    SorOptions out;
    out.zeta = cfg.zeta;
    out.eps = cfg.eps;
    if (cfg.tol > 0.0) out.tol = cfg.tol;
    out.max_iterations = static_cast<int>(cfg.max_iterations);
    return out;
}

double delta_x(const ExperimentConfig& cfg) {
    if (cfg.step_x > 0.0) return cfg.step_x;
    double total = 0.0;
    for (const GroupSpec& g : cfg.groups) total += g.lambda.value_or(0.0);
    return total > 0.0 ? total / 200.0 : 1e-4;
}

}  // namespace d2d
