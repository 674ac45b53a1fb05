#pragma once

#include "sleepctl/arrivals.hpp"
#include "sleepctl/core_model.hpp"
#include "sleepctl/cost.hpp"
#include "sleepctl/joint_mdp.hpp"
#include "sleepctl/policy_baselines.hpp"
#include "sleepctl/policy_greedy.hpp"
#include "sleepctl/policy_index.hpp"
#include "sleepctl/rng.hpp"

#include <boost/math/distributions/students_t.hpp>

#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

namespace sleepctl {

/// A decision rule. `act` sees the current state, the segment index and a
/// stream reserved for the policy's own randomness.
struct Policy {
    std::string name;
    std::function<ActionVector(const ClusterState&, long, RngStream&)> act;
};

inline Policy greedy_policy(const ClusterConfig& cfg) {
    return {"greedy", [cfg](const ClusterState& s, long, RngStream&) { return greedy_action(s, cfg); }};
}

inline Policy index_policy(std::vector<IndexTable> tables, int k) {
    return {"index", [tables = std::move(tables), k](const ClusterState& s, long, RngStream&) {
                return index_action(s, tables, k);
            }};
}

inline Policy optimal_policy(std::shared_ptr<const SolvedMdp> solved) {
    return {"optimal", [solved = std::move(solved)](const ClusterState& s, long, RngStream&) {
                return solved->action(s);
            }};
}

inline Policy uniform_policy(int m, int k) {
    return {"uniform", [m, k](const ClusterState&, long, RngStream& rng) { return uniform_action(m, k, rng); }};
}

inline Policy round_robin_policy(int m, int k) {
    return {"roundrobin", [m, k](const ClusterState&, long t, RngStream&) { return round_robin_action(t, m, k); }};
}

inline Policy always_on_policy(int m) {
    return {"always_on", [m](const ClusterState&, long, RngStream&) { return ActionVector::all_on(m); }};
}

inline Policy always_off_policy(int m) {
    return {"always_off", [m](const ClusterState&, long, RngStream&) {
                return ActionVector(std::vector<bool>(m, false), m);
            }};
}

/// Index tables for every cell of a cluster (cells with equal parameters
/// share one computation).
inline std::vector<IndexTable> cluster_index_tables(const ClusterConfig& cfg, const IndexOptions& opts = {}) {
    std::vector<IndexTable> out;
    for (std::size_t m = 0; m < cfg.cells.size(); ++m) {
        bool reused = false;
        for (std::size_t j = 0; j < m && !reused; ++j) {
            const auto& a = cfg.cells[j];
            const auto& b = cfg.cells[m];
            if (a.mean_service_time == b.mean_service_time && a.arrivals.rates == b.arrivals.rates &&
                a.arrivals.probs == b.arrivals.probs) {
                out.push_back(out[j]);
                reused = true;
            }
        }
        if (!reused)
            out.push_back(build_index_table(
                {cfg.cells[m], cfg.power, cfg.cost_fn, cfg.segment_duration, cfg.n_th}, opts));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Simulation
// ---------------------------------------------------------------------------

/// Time-averaged power split, watts per segment summed over cells.
struct PowerComposition {
    double static_w = 0.0;  ///< P_static of ON cells
    double dynamic_w = 0.0; ///< per-user power of ON cells
    double switch_w = 0.0;  ///< P_switch of cells turned ON
    double extra_w = 0.0;   ///< fallback-server power of OFF cells

    double total() const noexcept { return static_w + dynamic_w + switch_w + extra_w; }
};

struct TraceRow {
    long t;
    int cell;
    int residual_users;
    bool prev_on;
    bool action;
};

struct SimOptions {
    int batches = 100;
    double burn_in = 0.01; ///< fraction of segments dropped from the statistics
    bool trace = false;
};

struct SimResult {
    std::string policy;
    double avg_cost = 0.0;
    double ci_halfwidth = 0.0; ///< 95 %, batch means
    long segments = 0;         ///< segments counted after burn-in
    PowerComposition composition;
    std::vector<double> on_fraction;
    std::vector<double> batch_means;
    std::vector<TraceRow> trace;
};

namespace detail {

/// Half-width of a 95 % t interval from a sample of batch means.
inline double t_halfwidth(const std::vector<double>& xs) {
    const std::size_t n = xs.size();
    if (n < 2)
        return 0.0;
    double mean = 0.0;
    for (double x : xs)
        mean += x;
    mean /= static_cast<double>(n);
    double ss = 0.0;
    for (double x : xs)
        ss += (x - mean) * (x - mean);
    const double sd = std::sqrt(ss / static_cast<double>(n - 1));
    const boost::math::students_t dist(static_cast<double>(n - 1));
    return boost::math::quantile(boost::math::complement(dist, 0.025)) * sd / std::sqrt(static_cast<double>(n));
}

constexpr std::uint64_t kPolicyStream = 0x706f6c696379ULL;

} // namespace detail

/// Simulates `segments` segments starting from all cells ON. Residual counts
/// are drawn i.i.d. per cell from the truncated PMF using one stream per cell,
/// so every policy run with the same seed sees the same counts.
inline SimResult run_policy(const ClusterConfig& cfg, const Policy& policy, long segments, std::uint64_t seed,
                            const SimOptions& opts = {}) {
    cfg.validate();
    if (segments < 1)
        throw DomainError("need at least one segment");
    const int m = cfg.m_cells;
    const RngStream master(seed);
    std::vector<RngStream> cell_rng;
    std::vector<ResidualPmf> pmfs;
    std::vector<CellCostTable> tables;
    std::vector<double> arrivals(m);
    for (int c = 0; c < m; ++c) {
        cell_rng.push_back(master.split(static_cast<std::uint64_t>(c)));
        pmfs.push_back(residual_pmf(cfg.cells[c], cfg.segment_duration, cfg.n_th));
        tables.push_back(cost_table(cfg.cells[c], cfg.power, cfg.cost_fn, cfg.segment_duration, cfg.n_th));
        arrivals[c] = expected_arrivals(cfg.cells[c], cfg.segment_duration);
    }
    RngStream policy_rng = master.split(detail::kPolicyStream);

    const long burn = static_cast<long>(std::floor(opts.burn_in * static_cast<double>(segments)));
    const long counted = segments - burn;
    const int nb = static_cast<int>(std::min<long>(opts.batches, counted));

    SimResult res;
    res.policy = policy.name;
    res.segments = counted;
    res.on_fraction.assign(m, 0.0);
    res.batch_means.assign(nb, 0.0);
    std::vector<long> batch_len(nb, 0);

    ClusterState state(m, CellState{true, 0});
    double total = 0.0;
    const auto& pw = cfg.power;
    for (long t = 0; t < segments; ++t) {
        for (int c = 0; c < m; ++c)
            state[c].residual_users = sample_residual(pmfs[c], cell_rng[c]);
        const ActionVector a = policy.act(state, t, policy_rng);
        if (static_cast<int>(a.size()) != m)
            throw ContractViolation("policy '" + policy.name + "' returned an action of the wrong size");
        if (a.off_count() > cfg.k_max_off)
            throw ContractViolation("policy '" + policy.name + "' switched off " + std::to_string(a.off_count()) +
                                    " cells, K = " + std::to_string(cfg.k_max_off));
        double cost = 0.0;
        for (int c = 0; c < m; ++c)
            cost += tables[c].at(state[c].prev_on, static_cast<std::size_t>(state[c].residual_users), a[c]);

        if (opts.trace)
            for (int c = 0; c < m; ++c)
                res.trace.push_back({t, c, state[c].residual_users, state[c].prev_on, a[c]});

        if (t >= burn) {
            const long k = t - burn;
            const int b = static_cast<int>(k * nb / counted);
            res.batch_means[b] += cost;
            ++batch_len[b];
            total += cost;
            for (int c = 0; c < m; ++c) {
                const double users = state[c].residual_users + arrivals[c];
                if (a[c]) {
                    res.on_fraction[c] += 1.0;
                    res.composition.static_w += pw.p_static;
                    res.composition.dynamic_w += users * pw.p_d;
                    if (!state[c].prev_on)
                        res.composition.switch_w += pw.p_switch;
                } else {
                    res.composition.extra_w += users * pw.p_e;
                }
            }
        }
        for (int c = 0; c < m; ++c)
            state[c].prev_on = a[c];
    }

    const double n = static_cast<double>(counted);
    res.avg_cost = total / n;
    for (int b = 0; b < nb; ++b)
        res.batch_means[b] /= static_cast<double>(batch_len[b]);
    res.ci_halfwidth = detail::t_halfwidth(res.batch_means);
    for (auto& f : res.on_fraction)
        f /= n;
    res.composition.static_w /= n;
    res.composition.dynamic_w /= n;
    res.composition.switch_w /= n;
    res.composition.extra_w /= n;
    return res;
}

/// Runs every policy on the same seed, so all see identical residual counts.
inline std::vector<SimResult> paired_run(const ClusterConfig& cfg, const std::vector<Policy>& policies, long segments,
                                         std::uint64_t seed, const SimOptions& opts = {}) {
    if (policies.size() < 2)
        throw DomainError("paired_run needs at least two policies");
    std::vector<SimResult> out;
    for (const auto& p : policies)
        out.push_back(run_policy(cfg, p, segments, seed, opts));
    return out;
}

struct PairedDifference {
    double mean = 0.0;         ///< a - b
    double ci_halfwidth = 0.0;
};

/// Difference of two paired runs with a CI from the per-batch differences.
inline PairedDifference paired_difference(const SimResult& a, const SimResult& b) {
    if (a.batch_means.size() != b.batch_means.size() || a.segments != b.segments)
        throw DomainError("runs are not paired");
    std::vector<double> d(a.batch_means.size());
    for (std::size_t i = 0; i < d.size(); ++i)
        d[i] = a.batch_means[i] - b.batch_means[i];
    return {a.avg_cost - b.avg_cost, detail::t_halfwidth(d)};
}

/// (avg - bound) / bound in percent.
inline double delta_metric(double avg_cost, double bound) {
    if (!(bound > 0.0))
        throw DomainError("delta metric needs a positive bound");
    return (avg_cost - bound) / bound * 100.0;
}

} // namespace sleepctl
