#pragma once

#include "sleepctl/arrivals.hpp"
#include "sleepctl/core_model.hpp"
#include "sleepctl/errors.hpp"

#include <cctype>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

namespace sleepctl {

enum class ExperimentKind { none, k_sweep, greedy_trace, arrival_sets, switch_power, composition };

inline std::string to_string(ExperimentKind k) {
    switch (k) {
    case ExperimentKind::k_sweep: return "k_sweep";
    case ExperimentKind::greedy_trace: return "greedy_trace";
    case ExperimentKind::arrival_sets: return "arrival_sets";
    case ExperimentKind::switch_power: return "switch_power";
    case ExperimentKind::composition: return "composition";
    default: return "none";
    }
}

struct ExperimentSpec {
    ExperimentKind kind = ExperimentKind::none;
    std::string name;                 ///< file stem for outputs; defaults to the kind
    long segments = 100000;
    std::uint64_t seed = 1;
    std::vector<int> k_values;        ///< empty: 0..M
    std::vector<double> p_switch_values{40.0, 20.0, 10.0, 0.0};
    std::vector<int> arrival_sets{1, 2, 3, 4, 5};
    std::vector<std::string> policies{"optimal", "index", "greedy", "uniform", "roundrobin"};
    double solver_budget = 1e7;
};

struct LoadedConfig {
    ClusterConfig cluster;
    ExperimentSpec experiment;
    bool n_th_auto = true;
};

namespace detail {

inline std::string trim(const std::string& s) {
    std::size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b])))
        ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1])))
        --e;
    return s.substr(b, e - b);
}

/// A number, optionally written as a fraction "p/q".
inline double parse_number(const std::string& raw, std::size_t line) {
    const std::string s = trim(raw);
    const auto slash = s.find('/');
    if (slash != std::string::npos) {
        const double num = parse_number(s.substr(0, slash), line);
        const double den = parse_number(s.substr(slash + 1), line);
        if (den == 0.0)
            throw ConfigError("division by zero in '" + s + "'", line);
        return num / den;
    }
    if (s.empty())
        throw ConfigError("empty number", line);
    char* end = nullptr;
    const double v = std::strtod(s.c_str(), &end);
    if (end != s.c_str() + s.size())
        throw ConfigError("not a number: '" + s + "'", line);
    return v;
}

inline long parse_integer(const std::string& raw, std::size_t line) {
    const double v = parse_number(raw, line);
    if (v != std::floor(v) || std::abs(v) > 9e15)
        throw ConfigError("not an integer: '" + trim(raw) + "'", line);
    return static_cast<long>(v);
}

inline std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::string item;
    std::istringstream is(s);
    while (std::getline(is, item, ','))
        out.push_back(trim(item));
    return out;
}

inline std::vector<double> parse_numbers(const std::string& s, std::size_t line) {
    std::vector<double> out;
    for (const auto& item : split_list(s))
        out.push_back(parse_number(item, line));
    return out;
}

inline std::vector<int> parse_integers(const std::string& s, std::size_t line) {
    std::vector<int> out;
    for (const auto& item : split_list(s))
        out.push_back(static_cast<int>(parse_integer(item, line)));
    return out;
}

struct CellOverride {
    std::optional<std::vector<double>> rates, probs;
    std::optional<double> mean_service_time;
    std::size_t line = 0;
};

} // namespace detail

/// Parses the flat key = value format.
///
///   # comment
///   m_cells = 4
///   probs = 2/3, 0, 0, 1/3
///   [cell 2]          per-cell arrivals / service time (1-based)
///   arrival_set = 1
///   [experiment]
///   kind = k_sweep
///
/// Anything not given takes the reference values (Set 3 arrivals). Unknown
/// keys and invalid combinations raise ConfigError.
inline LoadedConfig parse_config(const std::string& text) {
    LoadedConfig out;
    ClusterConfig& c = out.cluster;
    ExperimentSpec& x = out.experiment;
    c.power = reference::power();
    c.segment_duration = reference::kSegmentDuration;
    c.cost_fn = CostFunction::quadratic();

    std::vector<double> rates = reference::kRates;
    std::vector<double> probs = reference::set_probs(3);
    double service = 500.0;
    std::optional<std::vector<double>> bp, slopes, icepts;
    std::string cost_name = "quadratic";
    std::size_t cost_line = 0;
    bool k_given = false;
    std::map<int, detail::CellOverride> cells;

    enum class Section { global, cell, experiment } section = Section::global;
    int cell_no = 0;
    std::set<std::string> seen;

    std::istringstream is(text);
    std::string raw;
    std::size_t line = 0;
    while (std::getline(is, raw)) {
        ++line;
        const auto hash = raw.find('#');
        const std::string s = detail::trim(hash == std::string::npos ? raw : raw.substr(0, hash));
        if (s.empty())
            continue;
        if (s.front() == '[') {
            if (s.back() != ']')
                throw ConfigError("unterminated section header", line);
            const std::string name = detail::trim(s.substr(1, s.size() - 2));
            if (name == "experiment") {
                section = Section::experiment;
            } else if (name.rfind("cell", 0) == 0) {
                cell_no = static_cast<int>(detail::parse_integer(name.substr(4), line));
                if (cell_no < 1)
                    throw ConfigError("cell sections are numbered from 1", line);
                section = Section::cell;
                cells[cell_no].line = line;
            } else {
                throw ConfigError("unknown section [" + name + "]", line);
            }
            continue;
        }
        const auto eq = s.find('=');
        if (eq == std::string::npos)
            throw ConfigError("expected key = value", line);
        const std::string key = detail::trim(s.substr(0, eq));
        const std::string val = detail::trim(s.substr(eq + 1));
        const std::string scope =
            section == Section::global ? "" : section == Section::cell ? "cell" + std::to_string(cell_no) + "." : "x.";
        if (!seen.insert(scope + key).second)
            throw ConfigError("duplicate key '" + key + "'", line);

        if (section == Section::cell) {
            auto& o = cells[cell_no];
            if (key == "rates") o.rates = detail::parse_numbers(val, line);
            else if (key == "probs") o.probs = detail::parse_numbers(val, line);
            else if (key == "mean_service_time") o.mean_service_time = detail::parse_number(val, line);
            else if (key == "arrival_set") {
                o.rates = reference::kRates;
                try {
                    o.probs = reference::set_probs(static_cast<int>(detail::parse_integer(val, line)));
                } catch (const DomainError& e) {
                    throw ConfigError(e.what(), line);
                }
            } else
                throw ConfigError("unknown key '" + key + "' in cell section", line);
            continue;
        }

        if (section == Section::experiment) {
            if (key == "kind") {
                if (val == "k_sweep") x.kind = ExperimentKind::k_sweep;
                else if (val == "greedy_trace") x.kind = ExperimentKind::greedy_trace;
                else if (val == "arrival_sets") x.kind = ExperimentKind::arrival_sets;
                else if (val == "switch_power") x.kind = ExperimentKind::switch_power;
                else if (val == "composition") x.kind = ExperimentKind::composition;
                else throw ConfigError("unknown experiment kind '" + val + "'", line);
            } else if (key == "name") x.name = val;
            else if (key == "segments") x.segments = detail::parse_integer(val, line);
            else if (key == "seed") x.seed = static_cast<std::uint64_t>(detail::parse_integer(val, line));
            else if (key == "k_values") x.k_values = detail::parse_integers(val, line);
            else if (key == "p_switch_values") x.p_switch_values = detail::parse_numbers(val, line);
            else if (key == "arrival_sets") x.arrival_sets = detail::parse_integers(val, line);
            else if (key == "policies") x.policies = detail::split_list(val);
            else if (key == "solver_budget") x.solver_budget = detail::parse_number(val, line);
            else throw ConfigError("unknown key '" + key + "' in [experiment]", line);
            continue;
        }

        if (key == "m_cells") c.m_cells = static_cast<int>(detail::parse_integer(val, line));
        else if (key == "k_max_off") { c.k_max_off = static_cast<int>(detail::parse_integer(val, line)); k_given = true; }
        else if (key == "segment_duration") c.segment_duration = detail::parse_number(val, line);
        else if (key == "p_static") c.power.p_static = detail::parse_number(val, line);
        else if (key == "p_switch") c.power.p_switch = detail::parse_number(val, line);
        else if (key == "p_d") c.power.p_d = detail::parse_number(val, line);
        else if (key == "p_e") c.power.p_e = detail::parse_number(val, line);
        else if (key == "cost") { cost_name = val; cost_line = line; }
        else if (key == "cost_breakpoints") bp = detail::parse_numbers(val, line);
        else if (key == "cost_slopes") slopes = detail::parse_numbers(val, line);
        else if (key == "cost_intercepts") icepts = detail::parse_numbers(val, line);
        else if (key == "rates") rates = detail::parse_numbers(val, line);
        else if (key == "probs") probs = detail::parse_numbers(val, line);
        else if (key == "arrival_set") {
            rates = reference::kRates;
            try {
                probs = reference::set_probs(static_cast<int>(detail::parse_integer(val, line)));
            } catch (const DomainError& e) {
                throw ConfigError(e.what(), line);
            }
        } else if (key == "mean_service_time") service = detail::parse_number(val, line);
        else if (key == "n_th") { c.n_th = static_cast<int>(detail::parse_integer(val, line)); out.n_th_auto = false; }
        else throw ConfigError("unknown key '" + key + "'", line);
    }

    // cost function
    if (cost_name == "linear") c.cost_fn = CostFunction::linear();
    else if (cost_name == "quadratic") c.cost_fn = CostFunction::quadratic();
    else if (cost_name == "piecewise") {
        if (!bp && !slopes && !icepts) {
            c.cost_fn = CostFunction::reference_piecewise();
        } else {
            if (!bp || !slopes || !icepts || bp->size() != slopes->size() || bp->size() != icepts->size())
                throw ConfigError("piecewise cost needs cost_breakpoints, cost_slopes and cost_intercepts of equal length",
                                  cost_line);
            std::vector<CostPiece> pieces;
            for (std::size_t i = 0; i < bp->size(); ++i)
                pieces.push_back({(*bp)[i], (*slopes)[i], (*icepts)[i]});
            try {
                c.cost_fn = CostFunction::piecewise(std::move(pieces));
            } catch (const DomainError& e) {
                throw ConfigError(std::string("cost: ") + e.what(), cost_line);
            }
        }
    } else
        throw ConfigError("cost must be linear, quadratic or piecewise, got '" + cost_name + "'", cost_line);

    if (c.m_cells < 1)
        throw ConfigError("m_cells: must be at least 1");
    if (!k_given)
        c.k_max_off = c.m_cells;
    c.cells.assign(c.m_cells, CellParams{ArrivalMixture{rates, probs}, service});
    for (const auto& [no, o] : cells) {
        if (no > c.m_cells)
            throw ConfigError("[cell " + std::to_string(no) + "] exceeds m_cells", o.line);
        auto& cell = c.cells[no - 1];
        if (o.rates) cell.arrivals.rates = *o.rates;
        if (o.probs) cell.arrivals.probs = *o.probs;
        if (o.mean_service_time) cell.mean_service_time = *o.mean_service_time;
    }

    auto field = [](const std::string& name, auto&& fn) {
        try {
            fn();
        } catch (const DomainError& e) {
            throw ConfigError(name + ": " + e.what());
        }
    };
    if (c.k_max_off < 0 || c.k_max_off > c.m_cells)
        throw ConfigError("k_max_off: must lie in [0, m_cells]");
    field("segment_duration", [&] {
        if (!(c.segment_duration > 0.0))
            throw DomainError("must be positive");
    });
    field("power", [&] { c.power.validate(); });
    for (std::size_t i = 0; i < c.cells.size(); ++i)
        field("cell " + std::to_string(i + 1), [&] { c.cells[i].validate(); });
    if (out.n_th_auto)
        c.n_th = default_n_th(c.cells, c.segment_duration);
    field("n_th", [&] { c.validate(); });

    if (x.name.empty())
        x.name = to_string(x.kind);
    if (x.segments < 1)
        throw ConfigError("segments: must be at least 1");
    for (int k : x.k_values)
        if (k < 0 || k > c.m_cells)
            throw ConfigError("k_values: " + std::to_string(k) + " outside [0, m_cells]");
    for (int s : x.arrival_sets)
        if (s < 1 || s > 5)
            throw ConfigError("arrival_sets: " + std::to_string(s) + " outside 1..5");
    for (double p : x.p_switch_values)
        if (!(p >= 0.0))
            throw ConfigError("p_switch_values: must be non-negative");
    for (const auto& p : x.policies)
        if (p != "optimal" && p != "index" && p != "greedy" && p != "uniform" && p != "roundrobin")
            throw ConfigError("policies: unknown policy '" + p + "'");
    return out;
}

inline LoadedConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in)
        throw ConfigError("cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str());
}

} // namespace sleepctl
