#pragma once

#include "sleepctl/experiments/config.hpp"
#include "sleepctl/experiments/csv.hpp"
#include "sleepctl/hash.hpp"
#include "sleepctl/joint_mdp.hpp"
#include "sleepctl/policy_baselines.hpp"
#include "sleepctl/policy_greedy.hpp"
#include "sleepctl/policy_index.hpp"
#include "sleepctl/simulator.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <thread>
#include <vector>

namespace sleepctl {

struct RunOptions {
    std::optional<std::uint64_t> seed;
    std::optional<long> segments;
    std::string out_dir = ".";
    unsigned threads = 1;
    bool cache = true; ///< reuse solved joint models under out_dir/cache
};

struct Check {
    std::string name;
    bool pass = true;
    std::string detail;
};

struct ExperimentResult {
    std::string name;
    std::vector<std::string> files;
    std::vector<std::string> columns; ///< summary table
    std::vector<std::vector<std::string>> rows;
    std::vector<Check> checks;
    double runtime_s = 0.0;

    bool ok() const {
        return std::all_of(checks.begin(), checks.end(), [](const Check& c) { return c.pass; });
    }
};

/// Evaluates fn(0..n-1) on up to `threads` workers; results keep index order.
template <class T, class Fn>
std::vector<T> parallel_map(std::size_t n, unsigned threads, Fn fn) {
    std::vector<T> out(n);
    std::vector<std::exception_ptr> errors(n);
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i; (i = next.fetch_add(1)) < n;) {
            try {
                out[i] = fn(i);
            } catch (...) {
                errors[i] = std::current_exception();
            }
        }
    };
    const unsigned t = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(n)));
    if (t == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (unsigned i = 0; i < t; ++i)
            pool.emplace_back(worker);
        for (auto& th : pool)
            th.join();
    }
    for (auto& e : errors)
        if (e)
            std::rethrow_exception(e);
    return out;
}

/// One configuration simulated under several policies on shared streams.
struct PointResult {
    ClusterConfig config;
    double lower_bound = 0.0;
    std::map<std::string, SimResult> sims;
    std::optional<double> optimal_gain;
    std::string optimal_note; ///< why the optimal column is missing
};

namespace detail {

inline std::shared_ptr<const SolvedMdp> solve_cached(const ClusterConfig& cfg, double budget, const RunOptions& run) {
    RviaOptions ro;
    ro.budget = budget;
    std::string path;
    if (run.cache) {
        const auto dir = std::filesystem::path(run.out_dir) / "cache";
        std::filesystem::create_directories(dir);
        path = (dir / (hex64(config_hash(cfg)) + ".mdp")).string();
        if (auto hit = load_solution(cfg, path))
            return std::make_shared<const SolvedMdp>(std::move(*hit));
    }
    auto solved = std::make_shared<const SolvedMdp>(rvia_solve(cfg, ro));
    if (run.cache)
        save_solution(*solved, path);
    return solved;
}

inline Policy make_policy(const std::string& name, const ClusterConfig& cfg,
                          const std::shared_ptr<const SolvedMdp>& solved) {
    if (name == "optimal")
        return optimal_policy(solved);
    if (name == "index")
        return index_policy(cluster_index_tables(cfg), cfg.k_max_off);
    if (name == "greedy")
        return greedy_policy(cfg);
    if (name == "uniform")
        return uniform_policy(cfg.m_cells, cfg.k_max_off);
    if (name == "roundrobin")
        return round_robin_policy(cfg.m_cells, cfg.k_max_off);
    throw ConfigError("unknown policy '" + name + "'");
}

inline PointResult evaluate_point(const ClusterConfig& cfg, const std::vector<std::string>& policies, long segments,
                                  std::uint64_t seed, double budget, const RunOptions& run, bool trace = false) {
    PointResult pr;
    pr.config = cfg;
    pr.lower_bound = lower_bound(cfg).value;
    std::shared_ptr<const SolvedMdp> solved;
    if (std::find(policies.begin(), policies.end(), "optimal") != policies.end()) {
        try {
            solved = solve_cached(cfg, budget, run);
            pr.optimal_gain = solved->gain;
        } catch (const CapacityError& e) {
            pr.optimal_note = e.what();
        }
    }
    SimOptions so;
    so.trace = trace;
    for (const auto& name : policies) {
        if (name == "optimal" && !solved)
            continue;
        pr.sims.emplace(name, run_policy(cfg, make_policy(name, cfg, solved), segments, seed, so));
    }
    return pr;
}

inline CsvField delta_field(const PointResult& p, const std::string& policy) {
    const auto it = p.sims.find(policy);
    if (it == p.sims.end())
        return std::string("NA");
    return delta_metric(it->second.avg_cost, p.lower_bound);
}

inline std::string fmt(double v, int prec = 4) {
    std::ostringstream os;
    os << std::fixed << std::setprecision(prec) << v;
    return os.str();
}

inline std::string fmt_cell(const PointResult& p, const std::string& policy) {
    const auto it = p.sims.find(policy);
    if (it == p.sims.end())
        return "NA";
    const auto& r = it->second;
    return fmt(delta_metric(r.avg_cost, p.lower_bound), 2) + "% +-" +
           fmt(100.0 * r.ci_halfwidth / p.lower_bound, 2);
}

/// Lower bound below every simulated policy, up to its CI.
inline void check_bound(const PointResult& p, const std::string& where, std::vector<Check>& checks) {
    for (const auto& [name, r] : p.sims) {
        const bool ok = p.lower_bound <= r.avg_cost + r.ci_halfwidth;
        if (!ok)
            checks.push_back({"lower bound <= " + name + " (" + where + ")", false,
                              fmt(p.lower_bound) + " > " + fmt(r.avg_cost) + " + " + fmt(r.ci_halfwidth)});
    }
}

/// a <= b within the CI of the paired difference.
inline bool leq_paired(const SimResult& a, const SimResult& b) {
    const auto d = paired_difference(a, b);
    return d.mean <= d.ci_halfwidth;
}

inline void check_ordering(const PointResult& p, const std::string& where, std::vector<Check>& checks) {
    auto has = [&](const char* n) { return p.sims.count(n) > 0; };
    auto fail = [&](const std::string& what) { checks.push_back({what + " (" + where + ")", false, ""}); };
    if (has("optimal") && has("index") && !leq_paired(p.sims.at("optimal"), p.sims.at("index")))
        fail("optimal <= index");
    if (has("index") && has("greedy") && !leq_paired(p.sims.at("index"), p.sims.at("greedy")))
        fail("index <= greedy");
    if (has("greedy") && has("uniform") && has("roundrobin")) {
        const auto& u = p.sims.at("uniform");
        const auto& r = p.sims.at("roundrobin");
        if (!leq_paired(p.sims.at("greedy"), u.avg_cost >= r.avg_cost ? u : r))
            fail("greedy <= max(uniform, roundrobin)");
    }
    if (has("optimal") && has("index")) {
        const double rel = std::abs(p.sims.at("index").avg_cost - p.sims.at("optimal").avg_cost) /
                           p.sims.at("optimal").avg_cost;
        checks.push_back({"index within 1% of optimal (" + where + ")", rel <= 0.01, fmt(100.0 * rel, 3) + "%"});
    }
}

inline std::vector<int> k_values_or(const ExperimentSpec& x, const ClusterConfig& c, bool all) {
    if (!x.k_values.empty())
        return x.k_values;
    if (!all)
        return {c.m_cells};
    std::vector<int> ks;
    for (int k = 0; k <= c.m_cells; ++k)
        ks.push_back(k);
    return ks;
}

inline std::string output_path(const RunOptions& run, const std::string& stem) {
    std::filesystem::create_directories(run.out_dir);
    return (std::filesystem::path(run.out_dir) / (stem + ".csv")).string();
}

} // namespace detail

/// Runs one experiment and writes its CSV files under run.out_dir.
inline ExperimentResult run_experiment(const LoadedConfig& loaded, const RunOptions& run = {}) {
    const auto t0 = std::chrono::steady_clock::now();
    const auto& x = loaded.experiment;
    const ClusterConfig& base = loaded.cluster;
    const long segments = run.segments.value_or(x.segments);
    const std::uint64_t seed = run.seed.value_or(x.seed);

    ExperimentResult res;
    res.name = x.name;
    static const std::vector<std::string> kDeltaCols{"delta_optimal", "delta_index", "delta_greedy", "delta_uniform",
                                                     "delta_roundrobin"};
    static const std::vector<std::string> kPolicies{"optimal", "index", "greedy", "uniform", "roundrobin"};

    auto with_k = [](ClusterConfig c, int k) {
        c.k_max_off = k;
        return c;
    };

    switch (x.kind) {
    case ExperimentKind::k_sweep: {
        const auto ks = detail::k_values_or(x, base, true);
        const auto points = parallel_map<PointResult>(ks.size(), run.threads, [&](std::size_t i) {
            return detail::evaluate_point(with_k(base, ks[i]), x.policies, segments, seed, x.solver_budget, run);
        });
        std::vector<std::string> header{"K"};
        header.insert(header.end(), kDeltaCols.begin(), kDeltaCols.end());
        CsvTable csv(header);
        res.columns = {"K", "lower_bound", "optimal", "index", "greedy", "uniform", "roundrobin"};
        for (std::size_t i = 0; i < ks.size(); ++i) {
            const auto& p = points[i];
            std::vector<CsvField> row{static_cast<long long>(ks[i])};
            std::vector<std::string> srow{std::to_string(ks[i]), detail::fmt(p.lower_bound)};
            for (const auto& pol : kPolicies) {
                row.push_back(detail::delta_field(p, pol));
                srow.push_back(detail::fmt_cell(p, pol));
            }
            csv.add(row);
            res.rows.push_back(srow);
            const std::string where = "K=" + std::to_string(ks[i]);
            detail::check_bound(p, where, res.checks);
            detail::check_ordering(p, where, res.checks);
            if (!p.optimal_note.empty())
                res.checks.push_back({"optimal unavailable (" + where + ")", true, p.optimal_note});
        }
        const auto path = detail::output_path(run, x.name);
        write_file_atomic(path, csv.str());
        res.files.push_back(path);
        break;
    }
    case ExperimentKind::greedy_trace: {
        const ClusterConfig& c = base;
        SimOptions so;
        so.trace = true;
        const auto r = run_policy(c, greedy_policy(c), segments, seed, so);
        CsvTable csv({"t", "cell", "residual_users", "action", "gamma_l", "gamma_u"});
        std::vector<GreedyThresholds> th;
        for (const auto& cell : c.cells)
            th.push_back(greedy_thresholds(cell, c.power, c.segment_duration));
        long mismatches = 0;
        for (const auto& row : r.trace) {
            const auto& g = th[row.cell];
            csv.add({static_cast<long long>(row.t), static_cast<long long>(row.cell),
                     static_cast<long long>(row.residual_users), static_cast<long long>(row.action ? 1 : 0),
                     g.gamma_l, g.gamma_u});
            if (c.k_max_off == c.m_cells &&
                row.action != dual_threshold_on({row.prev_on, row.residual_users}, g))
                ++mismatches;
        }
        const auto path = detail::output_path(run, x.name);
        write_file_atomic(path, csv.str());
        res.files.push_back(path);
        res.columns = {"cell", "gamma_l", "gamma_u", "on_fraction"};
        for (int m = 0; m < c.m_cells; ++m)
            res.rows.push_back({std::to_string(m), detail::fmt(th[m].gamma_l), detail::fmt(th[m].gamma_u),
                                detail::fmt(r.on_fraction[m])});
        if (c.k_max_off == c.m_cells)
            res.checks.push_back({"greedy actions follow the dual-threshold rule", mismatches == 0,
                                  std::to_string(mismatches) + " mismatches"});
        break;
    }
    case ExperimentKind::arrival_sets: {
        const auto ks = detail::k_values_or(x, base, false);
        struct Job {
            int set, k;
        };
        std::vector<Job> jobs;
        for (int s : x.arrival_sets)
            for (int k : ks)
                jobs.push_back({s, k});
        const auto points = parallel_map<PointResult>(jobs.size(), run.threads, [&](std::size_t i) {
            ClusterConfig c = with_k(base, jobs[i].k);
            c.cells.assign(c.m_cells, reference::cell(jobs[i].set));
            for (auto& cell : c.cells)
                cell.mean_service_time = base.cells.front().mean_service_time;
            if (loaded.n_th_auto)
                c.n_th = default_n_th(c.cells, c.segment_duration);
            return detail::evaluate_point(c, x.policies, segments, seed, x.solver_budget, run);
        });
        std::vector<std::string> header{"arrival_set", "K"};
        header.insert(header.end(), kDeltaCols.begin(), kDeltaCols.end());
        CsvTable csv(header);
        res.columns = {"set", "K", "optimal", "index", "greedy", "uniform", "roundrobin"};
        for (std::size_t i = 0; i < jobs.size(); ++i) {
            const auto& p = points[i];
            std::vector<CsvField> row{static_cast<long long>(jobs[i].set), static_cast<long long>(jobs[i].k)};
            std::vector<std::string> srow{std::to_string(jobs[i].set), std::to_string(jobs[i].k)};
            for (const auto& pol : kPolicies) {
                row.push_back(detail::delta_field(p, pol));
                srow.push_back(detail::fmt_cell(p, pol));
            }
            csv.add(row);
            res.rows.push_back(srow);
            detail::check_bound(p, "set " + std::to_string(jobs[i].set) + ", K=" + std::to_string(jobs[i].k),
                                res.checks);
        }
        const auto path = detail::output_path(run, x.name);
        write_file_atomic(path, csv.str());
        res.files.push_back(path);
        break;
    }
    case ExperimentKind::switch_power: {
        const auto ks = detail::k_values_or(x, base, false);
        struct Job {
            double psw;
            int k;
        };
        std::vector<Job> jobs;
        for (double p : x.p_switch_values)
            for (int k : ks)
                jobs.push_back({p, k});
        const auto points = parallel_map<PointResult>(jobs.size(), run.threads, [&](std::size_t i) {
            ClusterConfig c = with_k(base, jobs[i].k);
            c.power.p_switch = jobs[i].psw;
            return detail::evaluate_point(c, x.policies, segments, seed, x.solver_budget, run);
        });
        std::vector<std::string> header{"p_switch", "K"};
        header.insert(header.end(), kDeltaCols.begin(), kDeltaCols.end());
        header.push_back("gap_greedy_optimal");
        CsvTable csv(header);
        res.columns = {"p_switch", "K", "optimal", "index", "greedy", "greedy-optimal"};
        std::map<int, std::vector<std::pair<double, double>>> gaps; // K -> (p_switch, gap %)
        for (std::size_t i = 0; i < jobs.size(); ++i) {
            const auto& p = points[i];
            std::vector<CsvField> row{jobs[i].psw, static_cast<long long>(jobs[i].k)};
            for (const auto& pol : kPolicies)
                row.push_back(detail::delta_field(p, pol));
            CsvField gap = std::string("NA");
            std::string sgap = "NA";
            if (p.sims.count("greedy") && p.sims.count("optimal")) {
                const auto& o = p.sims.at("optimal");
                const double g = (p.sims.at("greedy").avg_cost - o.avg_cost) / o.avg_cost * 100.0;
                gap = g;
                sgap = detail::fmt(g, 3) + "%";
                gaps[jobs[i].k].push_back({jobs[i].psw, g});
            }
            row.push_back(gap);
            csv.add(row);
            res.rows.push_back({detail::fmt(jobs[i].psw, 1), std::to_string(jobs[i].k), detail::fmt_cell(p, "optimal"),
                                detail::fmt_cell(p, "index"), detail::fmt_cell(p, "greedy"), sgap});
            detail::check_bound(p, "p_switch=" + detail::fmt(jobs[i].psw, 1), res.checks);
        }
        for (auto& [k, v] : gaps) {
            std::sort(v.begin(), v.end());
            bool mono = true;
            for (std::size_t i = 1; i < v.size(); ++i)
                mono = mono && v[i - 1].second <= v[i].second + 1e-9;
            res.checks.push_back({"greedy-optimal gap shrinks with P_switch (K=" + std::to_string(k) + ")", mono, ""});
        }
        const auto path = detail::output_path(run, x.name);
        write_file_atomic(path, csv.str());
        res.files.push_back(path);
        break;
    }
    case ExperimentKind::composition: {
        const int k = x.k_values.empty() ? base.k_max_off : x.k_values.front();
        const auto p = detail::evaluate_point(with_k(base, k), x.policies, segments, seed, x.solver_budget, run);
        CsvTable csv({"policy", "static_W", "dynamic_W", "switch_W", "extra_W"});
        res.columns = {"policy", "static_W", "dynamic_W", "switch_W", "extra_W", "avg_cost"};
        for (const auto& pol : x.policies) {
            const auto it = p.sims.find(pol);
            if (it == p.sims.end())
                continue;
            const auto& c = it->second.composition;
            csv.add({pol, c.static_w, c.dynamic_w, c.switch_w, c.extra_w});
            res.rows.push_back({pol, detail::fmt(c.static_w, 2), detail::fmt(c.dynamic_w, 2),
                                detail::fmt(c.switch_w, 2), detail::fmt(c.extra_w, 2),
                                detail::fmt(it->second.avg_cost, 2)});
        }
        detail::check_bound(p, "K=" + std::to_string(k), res.checks);
        const auto path = detail::output_path(run, x.name);
        write_file_atomic(path, csv.str());
        res.files.push_back(path);
        break;
    }
    default:
        throw ConfigError("config has no [experiment] kind");
    }
    res.runtime_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return res;
}

} // namespace sleepctl
