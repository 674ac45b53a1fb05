#pragma once

#include "sleepctl/arrivals.hpp"
#include "sleepctl/core_model.hpp"
#include "sleepctl/cost.hpp"
#include "sleepctl/joint_mdp.hpp"

#include <algorithm>
#include <numeric>
#include <string>
#include <vector>

namespace sleepctl {

/// Residual-count thresholds of the myopic rule: a previously ON cell stays
/// ON iff n > gamma_l, a previously OFF cell turns ON iff n > gamma_u.
struct GreedyThresholds {
    double gamma_l = 0.0;
    double gamma_u = 0.0;
};

/// gamma_l = P_static / (P_e - P_d) - lambda-bar T_s, gamma_u adds P_switch
/// to P_static. Any strictly increasing f compares the powers the same way,
/// so the thresholds do not depend on f.
inline GreedyThresholds greedy_thresholds(const CellParams& cell, const PowerParams& pw, double seg) {
    if (!(pw.p_e > pw.p_d))
        throw DomainError("greedy thresholds need p_e > p_d");
    const double lt = expected_arrivals(cell, seg);
    return {pw.p_static / (pw.p_e - pw.p_d) - lt, (pw.p_static + pw.p_switch) / (pw.p_e - pw.p_d) - lt};
}

/// Per-cell thresholded decision, ties to OFF.
inline bool dual_threshold_on(const CellState& s, const GreedyThresholds& th) {
    return s.residual_users > (s.prev_on ? th.gamma_l : th.gamma_u);
}

/// Turn OFF the cells with the largest saving c(ON) - c(OFF) >= 0, at most
/// k of them. Equal savings go to the lower cell index.
inline std::vector<bool> select_off_cells(const std::vector<double>& saving, int k) {
    const std::size_t m = saving.size();
    std::vector<std::size_t> order(m);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return saving[a] > saving[b]; });
    std::vector<bool> on(m, true);
    int off = 0;
    for (std::size_t i : order) {
        if (off >= k || saving[i] < 0.0)
            break;
        on[i] = false;
        ++off;
    }
    return on;
}

/// Minimizer of the immediate cluster cost subject to at most K cells OFF.
inline ActionVector greedy_action(const ClusterState& s, const ClusterConfig& cfg) {
    std::vector<double> saving(s.size());
    for (std::size_t m = 0; m < s.size(); ++m) {
        const auto& cell = cfg.cells[m];
        saving[m] = immediate_cost(s[m], true, cell, cfg.power, cfg.cost_fn, cfg.segment_duration) -
                    immediate_cost(s[m], false, cell, cfg.power, cfg.cost_fn, cfg.segment_duration);
    }
    return ActionVector(select_off_cells(saving, cfg.k_max_off), cfg.k_max_off);
}

// ---------------------------------------------------------------------------
// Long-run cost with K = M
// ---------------------------------------------------------------------------

struct GreedyCellCost {
    GreedyThresholds thresholds;
    double p_l = 0.0;     ///< Pr(n <= gamma_l): an ON cell turns OFF
    double p_u = 0.0;     ///< Pr(n > gamma_u): an OFF cell turns ON
    double pi_on = 1.0;   ///< stationary Pr(previous segment ON)
    double cost = 0.0;
    bool degenerate = false; ///< p_l = p_u = 0: every state absorbing, initial ON pattern kept
};

struct GreedyLongRun {
    double cost = 0.0;
    std::vector<GreedyCellCost> cells;
    bool degenerate = false;
};

namespace detail {

inline GreedyCellCost greedy_cell(const CellParams& cell, const ClusterConfig& cfg, bool conditioned) {
    const auto th = greedy_thresholds(cell, cfg.power, cfg.segment_duration);
    const auto pmf = residual_pmf(cell, cfg.segment_duration, cfg.n_th);
    const auto t = cost_table(cell, cfg.power, cfg.cost_fn, cfg.segment_duration, cfg.n_th);
    GreedyCellCost out;
    out.thresholds = th;
    // segment costs seen from each previous state
    double from_on = 0.0, from_off = 0.0;
    for (std::size_t l = 0; l < pmf.probs.size(); ++l) {
        const double p = pmf.probs[l];
        const bool on_after_on = dual_threshold_on({true, static_cast<int>(l)}, th);
        const bool on_after_off = dual_threshold_on({false, static_cast<int>(l)}, th);
        if (!on_after_on)
            out.p_l += p;
        if (on_after_off)
            out.p_u += p;
        from_on += p * (on_after_on ? t.on_stay[l] : t.off[l]);
        from_off += p * (on_after_off ? t.on_switch[l] : t.off[l]);
    }
    if (out.p_l + out.p_u > 0.0) {
        out.pi_on = out.p_u / (out.p_l + out.p_u);
    } else {
        out.pi_on = 1.0; // all cells start ON
        out.degenerate = true;
    }
    if (conditioned) {
        out.cost = out.pi_on * from_on + (1.0 - out.pi_on) * from_off;
    } else {
        // each transition weighted by the unconditional segment cost
        const auto c = anticipated_costs(cell, cfg.power, cfg.cost_fn, cfg.segment_duration, pmf);
        const double on_on = out.pi_on * (1.0 - out.p_l);
        const double off_on = (1.0 - out.pi_on) * out.p_u;
        out.cost = on_on * c.c11 + off_on * c.c01 + (1.0 - on_on - off_on) * c.c0;
    }
    return out;
}

inline GreedyLongRun greedy_longrun(const ClusterConfig& cfg, bool conditioned) {
    cfg.validate();
    if (cfg.k_max_off != cfg.m_cells)
        throw UnsupportedConfiguration("closed-form greedy cost needs K = M; simulate instead");
    GreedyLongRun r;
    for (const auto& cell : cfg.cells) {
        r.cells.push_back(greedy_cell(cell, cfg, conditioned));
        r.cost += r.cells.back().cost;
        r.degenerate = r.degenerate || r.cells.back().degenerate;
    }
    return r;
}

} // namespace detail

/// Long-run average cost of greedy with K = M. Each cell is a two-state
/// ON/OFF chain with OFF probability p_l from ON and ON probability p_u from
/// OFF; within each state the segment cost is averaged over the residual
/// counts that lead to the chosen action.
inline GreedyLongRun greedy_longrun_cost(const ClusterConfig& cfg) { return detail::greedy_longrun(cfg, true); }

/// Same chain, but each transition charged the unconditional C01/C11/C0.
/// Overstates the cost because greedy's choice depends on the same draw.
inline GreedyLongRun greedy_longrun_cost_unconditioned(const ClusterConfig& cfg) {
    return detail::greedy_longrun(cfg, false);
}

// ---------------------------------------------------------------------------
// Greedy vs optimal structure
// ---------------------------------------------------------------------------

struct DominanceViolation {
    ClusterState state;
    std::size_t cell;
    bool optimal_on;
    bool greedy_on;
};

struct DominanceReport {
    std::size_t states_checked = 0;
    std::vector<DominanceViolation> violations;

    bool ok() const noexcept { return violations.empty(); }
};

/// Exhaustive over the enumerated joint states: wherever the optimal policy
/// turns a cell OFF, greedy must too.
inline DominanceReport check_greedy_optimal_dominance(const ClusterConfig& cfg, const SolvedMdp& solved) {
    if (cfg.k_max_off != cfg.m_cells)
        throw UnsupportedConfiguration("dominance check needs K = M");
    JointStateIndex index(cfg.m_cells, cfg.n_th);
    if (index.size() > 50'000'000)
        throw CapacityError("dominance check limited to 5e7 states");
    DominanceReport rep;
    for (std::uint64_t i = 0; i < index.size(); ++i) {
        const auto s = index.decode(i);
        const auto& opt = solved.action(s);
        const auto gr = greedy_action(s, cfg);
        for (std::size_t m = 0; m < s.size(); ++m)
            if (!opt[m] && gr[m])
                rep.violations.push_back({s, m, opt[m], gr[m]});
        ++rep.states_checked;
    }
    return rep;
}

} // namespace sleepctl
