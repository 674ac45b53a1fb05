#pragma once

#include "sleepctl/arrivals.hpp"
#include "sleepctl/core_model.hpp"
#include "sleepctl/cost.hpp"
#include "sleepctl/policy_greedy.hpp"
#include "sleepctl/rng.hpp"

#include <numeric>
#include <vector>

namespace sleepctl {

/// Exactly K cells OFF, uniformly over all subsets of size K.
inline ActionVector uniform_action(int m, int k, RngStream& rng) {
    if (k < 0 || k > m)
        throw DomainError("uniform_action: need 0 <= K <= M");
    std::vector<int> idx(m);
    std::iota(idx.begin(), idx.end(), 0);
    // partial Fisher-Yates: the first k slots end up a uniform k-subset
    for (int i = 0; i < k; ++i) {
        const int j = i + static_cast<int>(rng.below(static_cast<std::uint64_t>(m - i)));
        std::swap(idx[i], idx[j]);
    }
    std::vector<bool> on(m, true);
    for (int i = 0; i < k; ++i)
        on[idx[i]] = false;
    return ActionVector(std::move(on), k);
}

/// Cell m (0-based) is OFF at segment t iff (t - m) mod M < K, so each cell
/// is OFF for K consecutive segments per cycle of M, staggered by one.
inline ActionVector round_robin_action(long t, int m, int k) {
    if (k < 0 || k > m)
        throw DomainError("round_robin_action: need 0 <= K <= M");
    std::vector<bool> on(m, true);
    for (int c = 0; c < m; ++c) {
        const long r = ((t - c) % m + m) % m;
        on[c] = r >= k;
    }
    return ActionVector(std::move(on), k);
}

/// Anticipated costs of every cell of the cluster.
inline std::vector<AnticipatedCosts> cluster_anticipated_costs(const ClusterConfig& cfg) {
    std::vector<AnticipatedCosts> out;
    for (const auto& cell : cfg.cells)
        out.push_back(anticipated_costs(cell, cfg.power, cfg.cost_fn, cfg.segment_duration,
                                        residual_pmf(cell, cfg.segment_duration, cfg.n_th)));
    return out;
}

/// Each cell is OFF w.p. q = K/M independently across segments:
/// Sum_m c01 (1-q) q + c11 (1-q)^2 + c0 q.
inline double uniform_longrun_cost(const ClusterConfig& cfg, const std::vector<AnticipatedCosts>& costs) {
    const double q = static_cast<double>(cfg.k_max_off) / cfg.m_cells;
    double c = 0.0;
    for (const auto& a : costs)
        c += a.c01 * (1.0 - q) * q + a.c11 * (1.0 - q) * (1.0 - q) + a.c0 * q;
    return c;
}

/// Per cycle of M segments: K OFF, one switch-on, M - K - 1 ON after ON.
inline double round_robin_longrun_cost(const ClusterConfig& cfg, const std::vector<AnticipatedCosts>& costs) {
    const int m = cfg.m_cells, k = cfg.k_max_off;
    double c = 0.0;
    for (const auto& a : costs) {
        if (k == 0)
            c += a.c11;
        else if (k == m)
            c += a.c0;
        else
            c += (a.c0 * k + a.c01 + a.c11 * (m - k - 1)) / m;
    }
    return c;
}

struct BaselineDifference {
    double diff = 0.0;        ///< round-robin cost minus uniform cost
    double c_diff = 0.0;      ///< Sum_m (c01 - c11)
    bool uniform_better = false;   ///< diff > 0
    bool rule_predicts_uniform = false; ///< K in {1, M-1} or M < 4, with P_switch > 0
};

/// ((K^2 - M K + M) / M^2) Sum_m (c01 - c11), defined for 0 < K < M.
inline BaselineDifference baseline_difference(const ClusterConfig& cfg, const std::vector<AnticipatedCosts>& costs) {
    const int m = cfg.m_cells, k = cfg.k_max_off;
    if (!(k > 0 && k < m))
        throw DomainError("baseline_difference needs 0 < K < M");
    BaselineDifference d;
    for (const auto& a : costs)
        d.c_diff += a.c01 - a.c11;
    d.diff = static_cast<double>(k * k - m * k + m) / (static_cast<double>(m) * m) * d.c_diff;
    d.uniform_better = d.diff > 0.0;
    d.rule_predicts_uniform = cfg.power.p_switch > 0.0 && (k == 1 || k == m - 1 || m < 4);
    return d;
}

struct LowerBound {
    double value = 0.0;
    double tail_mass = 0.0; ///< untruncated mass beyond N_th summed over cells
};

/// Sum_m [ C0_m + Sum_{l > gamma^L_m} Delta_2(l) Pr(n_m = l) ], truncated at N_th.
inline LowerBound lower_bound(const ClusterConfig& cfg, const std::vector<ResidualPmf>& pmfs) {
    if (pmfs.size() != cfg.cells.size())
        throw DomainError("need one residual PMF per cell");
    LowerBound lb;
    for (std::size_t m = 0; m < cfg.cells.size(); ++m) {
        const auto& cell = cfg.cells[m];
        const auto th = greedy_thresholds(cell, cfg.power, cfg.segment_duration);
        const auto c = anticipated_costs(cell, cfg.power, cfg.cost_fn, cfg.segment_duration, pmfs[m]);
        double extra = 0.0;
        for (std::size_t l = 0; l < pmfs[m].probs.size(); ++l)
            if (static_cast<double>(l) > th.gamma_l)
                extra += delta2(static_cast<double>(l), cell, cfg.power, cfg.cost_fn, cfg.segment_duration) *
                         pmfs[m].probs[l];
        lb.value += c.c0 + extra;
        lb.tail_mass += pmfs[m].tail_mass;
    }
    return lb;
}

inline LowerBound lower_bound(const ClusterConfig& cfg) {
    std::vector<ResidualPmf> pmfs;
    for (const auto& cell : cfg.cells)
        pmfs.push_back(residual_pmf(cell, cfg.segment_duration, cfg.n_th));
    return lower_bound(cfg, pmfs);
}

} // namespace sleepctl
