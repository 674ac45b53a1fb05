#pragma once

#include "sleepctl/arrivals.hpp"
#include "sleepctl/core_model.hpp"

#include <cmath>
#include <cstddef>
#include <functional>
#include <vector>

namespace sleepctl {

/// Expected new arrivals per segment, lambda-bar * T_s.
inline double expected_arrivals(const CellParams& cell, double seg) {
    return mean_arrival_rate(cell) * seg;
}

/// Anticipated segment power of one cell in watts.
///   ON after ON:   P_static + (n + lambda-bar T_s) P_d
///   ON after OFF:  the same plus P_switch
///   OFF:           (n + lambda-bar T_s) P_e, served by the fallback server
inline double anticipated_power(const CellState& s, bool on, const CellParams& cell,
                                const PowerParams& pw, double seg) {
    const double users = s.residual_users + expected_arrivals(cell, seg);
    if (!on)
        return users * pw.p_e;
    return pw.p_static + (s.prev_on ? 0.0 : pw.p_switch) + users * pw.p_d;
}

inline double immediate_cost(const CellState& s, bool on, const CellParams& cell,
                             const PowerParams& pw, const CostFunction& f, double seg) {
    return eval_cost(f, anticipated_power(s, on, cell, pw, seg));
}

/// Sum of per-cell immediate costs.
inline double cluster_cost(const ClusterState& s, const ActionVector& a, const ClusterConfig& cfg) {
    double c = 0.0;
    for (std::size_t m = 0; m < s.size(); ++m)
        c += immediate_cost(s[m], a[m], cfg.cells[m], cfg.power, cfg.cost_fn, cfg.segment_duration);
    return c;
}

/// Immediate costs tabulated over residual counts 0..N_th for one cell.
struct CellCostTable {
    std::vector<double> on_stay;   ///< c((ON, n), ON)
    std::vector<double> on_switch; ///< c((OFF, n), ON)
    std::vector<double> off;       ///< c((*, n), OFF)

    double on(bool prev_on, std::size_t n) const { return prev_on ? on_stay[n] : on_switch[n]; }
    double at(bool prev_on, std::size_t n, bool act) const { return act ? on(prev_on, n) : off[n]; }
};

inline CellCostTable cost_table(const CellParams& cell, const PowerParams& pw, const CostFunction& f,
                                double seg, int n_th) {
    CellCostTable t;
    const std::size_t n = static_cast<std::size_t>(n_th) + 1;
    t.on_stay.resize(n);
    t.on_switch.resize(n);
    t.off.resize(n);
    for (std::size_t l = 0; l < n; ++l) {
        const int users = static_cast<int>(l);
        t.on_stay[l] = immediate_cost({true, users}, true, cell, pw, f, seg);
        t.on_switch[l] = immediate_cost({false, users}, true, cell, pw, f, seg);
        t.off[l] = immediate_cost({true, users}, false, cell, pw, f, seg);
    }
    return t;
}

/// Per-segment costs averaged over the residual distribution.
struct AnticipatedCosts {
    double c01 = 0.0; ///< OFF -> ON
    double c11 = 0.0; ///< ON -> ON
    double c0 = 0.0;  ///< OFF
};

inline AnticipatedCosts anticipated_costs(const CellParams& cell, const PowerParams& pw,
                                          const CostFunction& f, double seg, const ResidualPmf& pmf) {
    const auto t = cost_table(cell, pw, f, seg, pmf.n_th());
    AnticipatedCosts c;
    for (std::size_t l = 0; l < pmf.probs.size(); ++l) {
        c.c01 += pmf.probs[l] * t.on_switch[l];
        c.c11 += pmf.probs[l] * t.on_stay[l];
        c.c0 += pmf.probs[l] * t.off[l];
    }
    return c;
}

// ---------------------------------------------------------------------------
// OFF-minus-ON cost gaps on a real-valued residual count
// ---------------------------------------------------------------------------

/// g^L(n) = f[(n + lambda-bar T_s) P_e] - f[P_static + (n + lambda-bar T_s) P_d]
inline double g_lower(double n, const CellParams& cell, const PowerParams& pw, const CostFunction& f,
                      double seg) {
    const double users = n + expected_arrivals(cell, seg);
    return f(users * pw.p_e) - f(pw.p_static + users * pw.p_d);
}

/// g^U(n): as g^L with P_switch added to the ON power.
inline double g_upper(double n, const CellParams& cell, const PowerParams& pw, const CostFunction& f,
                      double seg) {
    const double users = n + expected_arrivals(cell, seg);
    return f(users * pw.p_e) - f(pw.p_static + pw.p_switch + users * pw.p_d);
}

/// Delta_1(n) = f[P_static + x P_d] - f[P_static + P_switch + x P_d] <= 0.
inline double delta1(double n, const CellParams& cell, const PowerParams& pw, const CostFunction& f,
                     double seg) {
    const double users = n + expected_arrivals(cell, seg);
    return f(pw.p_static + users * pw.p_d) - f(pw.p_static + pw.p_switch + users * pw.p_d);
}

/// Delta_2(n) = f[P_static + x P_d] - f[x P_e] = -g^L(n).
inline double delta2(double n, const CellParams& cell, const PowerParams& pw, const CostFunction& f,
                     double seg) {
    return -g_lower(n, cell, pw, f, seg);
}

// ---------------------------------------------------------------------------
// Threshold inversion
// ---------------------------------------------------------------------------

enum class Saturation { none, below, above };

struct ThresholdSolve {
    double value = 0.0;
    Saturation saturation = Saturation::none;
};

/// sup{x in [0, hi] : g(x) <= rhs} for non-decreasing g, by bisection.
/// Returns -1 (saturated below) when g(0) > rhs and hi (saturated above)
/// when g(hi) <= rhs.
inline ThresholdSolve invert_threshold(const std::function<double(double)>& g, double rhs, double hi,
                                       double tol = 1e-9) {
    if (g(0.0) > rhs)
        return {-1.0, Saturation::below};
    if (g(hi) <= rhs)
        return {hi, Saturation::above};
    double lo = 0.0;
    double up = hi;
    while (up - lo > tol) {
        const double mid = 0.5 * (lo + up);
        if (g(mid) <= rhs)
            lo = mid;
        else
            up = mid;
    }
    return {0.5 * (lo + up), Saturation::none};
}

/// Root of g^L(x) = rhs on [0, N_th]. Linear f is inverted in closed form.
inline ThresholdSolve solve_lower_threshold(double rhs, const CellParams& cell, const PowerParams& pw,
                                            const CostFunction& f, double seg, int n_th) {
    const double hi = static_cast<double>(n_th);
    if (f.is_linear() && pw.p_e > pw.p_d) {
        // (x + lT)(P_e - P_d) - P_static = rhs
        const double x = (rhs + pw.p_static) / (pw.p_e - pw.p_d) - expected_arrivals(cell, seg);
        if (x < 0.0)
            return {-1.0, Saturation::below};
        if (x >= hi)
            return {hi, Saturation::above};
        return {x, Saturation::none};
    }
    return invert_threshold([&](double x) { return g_lower(x, cell, pw, f, seg); }, rhs, hi);
}

inline ThresholdSolve solve_upper_threshold(double rhs, const CellParams& cell, const PowerParams& pw,
                                            const CostFunction& f, double seg, int n_th) {
    const double hi = static_cast<double>(n_th);
    if (f.is_linear() && pw.p_e > pw.p_d) {
        const double x =
            (rhs + pw.p_static + pw.p_switch) / (pw.p_e - pw.p_d) - expected_arrivals(cell, seg);
        if (x < 0.0)
            return {-1.0, Saturation::below};
        if (x >= hi)
            return {hi, Saturation::above};
        return {x, Saturation::none};
    }
    return invert_threshold([&](double x) { return g_upper(x, cell, pw, f, seg); }, rhs, hi);
}

} // namespace sleepctl
