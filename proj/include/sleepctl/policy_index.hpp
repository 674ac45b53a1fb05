#pragma once

#include "sleepctl/arrivals.hpp"
#include "sleepctl/core_model.hpp"
#include "sleepctl/cost.hpp"
#include "sleepctl/policy_greedy.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

namespace sleepctl {

// ---------------------------------------------------------------------------
// Single-cell problem with an OFF penalty
// ---------------------------------------------------------------------------

/// One cell in isolation, where being OFF costs an extra `eps` per segment.
struct DecoupledModel {
    CellParams cell;
    PowerParams power;
    CostFunction cost_fn;
    double seg = 1800.0;
    int n_th = 1;

    ResidualPmf pmf() const { return residual_pmf(cell, seg, n_th); }
    CellCostTable table() const { return cost_table(cell, power, cost_fn, seg, n_th); }
};

struct DecoupledOptions {
    double tolerance = 1e-10;
    long max_sweeps = 100000;
};

struct DecoupledSolution {
    double eps = 0.0;
    double gain = 0.0;
    std::vector<double> h_on;  ///< h(ON, n)
    std::vector<double> h_off; ///< h(OFF, n)
    double sigma1 = 0.0;       ///< Sum_n Pr(n) h(ON, n)
    double sigma0 = 0.0;       ///< Sum_n Pr(n) h(OFF, n)
    ThresholdSolve gamma_l;
    ThresholdSolve gamma_u;
    std::vector<bool> on_after_on;  ///< optimal action at (ON, n)
    std::vector<bool> on_after_off; ///< optimal action at (OFF, n)
    long sweeps = 0;
    double residual = 0.0;

    double h_gap() const noexcept { return sigma1 - sigma0; }
    /// Right-hand side of the threshold equations, -eps + Sigma_1 - Sigma_0.
    double rhs() const noexcept { return -eps + h_gap(); }
};

/// Warm-start values for decoupled_rvia.
struct DecoupledStart {
    double sigma1 = 0.0;
    double sigma0 = 0.0;
};

/// Relative value iteration on the decoupled cell, reference state (ON, 0).
///
/// The next residual count does not depend on the current one, so the
/// iteration runs on (Sigma_1, Sigma_0) and the full h table is read off at
/// the end. Thresholds are then the real-valued roots of
/// g^L(x) = rhs and g^U(x) = rhs.
inline DecoupledSolution decoupled_rvia(const DecoupledModel& model, double eps, const DecoupledOptions& opts = {},
                                        const DecoupledStart* start = nullptr) {
    if (!std::isfinite(eps))
        throw DomainError("eps must be finite");
    const auto pmf = model.pmf();
    const auto t = model.table();
    const auto& p = pmf.probs;
    const std::size_t n1 = p.size();

    double s1 = start ? start->sigma1 : 0.0;
    double s0 = start ? start->sigma0 : 0.0;
    DecoupledSolution sol;
    sol.eps = eps;
    for (long sweep = 1; sweep <= opts.max_sweeps; ++sweep) {
        const double r = std::min(t.on_stay[0] + s1, t.off[0] + eps + s0);
        double n1v = 0.0, n0v = 0.0;
        for (std::size_t n = 0; n < n1; ++n) {
            const double off = t.off[n] + eps + s0;
            n1v += p[n] * std::min(t.on_stay[n] + s1, off);
            n0v += p[n] * std::min(t.on_switch[n] + s1, off);
        }
        n1v -= r;
        n0v -= r;
        const double d1 = n1v - s1, d0 = n0v - s0;
        sol.residual = std::max(d1, d0) - std::min(d1, d0);
        sol.sweeps = sweep;
        s1 = n1v;
        s0 = n0v;
        if (sol.residual < opts.tolerance)
            break;
        if (sweep == opts.max_sweeps)
            throw ConvergenceError("decoupled RVIA did not converge", sol.residual, sweep);
    }

    sol.sigma1 = s1;
    sol.sigma0 = s0;
    sol.gain = std::min(t.on_stay[0] + s1, t.off[0] + eps + s0);
    sol.h_on.resize(n1);
    sol.h_off.resize(n1);
    sol.on_after_on.resize(n1);
    sol.on_after_off.resize(n1);
    for (std::size_t n = 0; n < n1; ++n) {
        const double off = t.off[n] + eps + s0;
        const double on1 = t.on_stay[n] + s1;
        const double on0 = t.on_switch[n] + s1;
        sol.h_on[n] = std::min(on1, off) - sol.gain;
        sol.h_off[n] = std::min(on0, off) - sol.gain;
        sol.on_after_on[n] = on1 < off; // ties to OFF
        sol.on_after_off[n] = on0 < off;
    }
    const double rhs = sol.rhs();
    sol.gamma_l = solve_lower_threshold(rhs, model.cell, model.power, model.cost_fn, model.seg, model.n_th);
    sol.gamma_u = solve_upper_threshold(rhs, model.cell, model.power, model.cost_fn, model.seg, model.n_th);
    return sol;
}

/// h(n) = h(ON, n) - h(OFF, n).
inline std::vector<double> h_difference_profile(const DecoupledSolution& sol) {
    std::vector<double> d(sol.h_on.size());
    for (std::size_t n = 0; n < d.size(); ++n)
        d[n] = sol.h_on[n] - sol.h_off[n];
    return d;
}

/// The same profile from its closed form, median(Delta_1(n), rhs - g^L(n), 0).
inline std::vector<double> h_difference_closed_form(const DecoupledModel& model, double rhs) {
    std::vector<double> d(static_cast<std::size_t>(model.n_th) + 1);
    for (std::size_t n = 0; n < d.size(); ++n) {
        const double x = static_cast<double>(n);
        const double lo = delta1(x, model.cell, model.power, model.cost_fn, model.seg);
        const double mid = rhs - g_lower(x, model.cell, model.power, model.cost_fn, model.seg);
        d[n] = std::clamp(mid, lo, 0.0);
    }
    return d;
}

/// E = Sum_n Pr(n) Delta_1(n), the lower bound on Sigma_1 - Sigma_0.
inline double h_gap_lower_bound(const DecoupledModel& model) {
    const auto pmf = model.pmf();
    double e = 0.0;
    for (std::size_t n = 0; n < pmf.probs.size(); ++n)
        e += pmf.probs[n] * delta1(static_cast<double>(n), model.cell, model.power, model.cost_fn, model.seg);
    return e;
}

// ---------------------------------------------------------------------------
// Index computation
// ---------------------------------------------------------------------------

struct IndexOptions {
    double xi = 1e-4;       ///< stop when (Gamma - n)^2 / 2 <= xi
    int max_iterations = 500;
    double beta = 0.0;      ///< initial step; 0 picks the local slope of g at n
    DecoupledOptions rvia;
};

struct IndexResult {
    double eps_star = 0.0;
    double gamma = 0.0;     ///< threshold reached at eps_star
    int iterations = 0;
    bool jump = false;      ///< threshold jumps over n; eps_star is the jump location
};

namespace detail {

/// Threshold for the given previous state, with an upper-saturated value
/// mapped to N_th + 1 so that "OFF everywhere" is distinguishable from a
/// threshold sitting exactly at N_th.
inline double index_threshold(const DecoupledSolution& sol, bool prev_on, int n_th) {
    const auto& th = prev_on ? sol.gamma_l : sol.gamma_u;
    if (th.saturation == Saturation::above)
        return n_th + 1.0;
    return th.value;
}

inline bool indifferent_everywhere(const DecoupledModel& m) {
    const double hi = static_cast<double>(m.n_th);
    return g_lower(0.0, m.cell, m.power, m.cost_fn, m.seg) == 0.0 &&
           g_lower(hi, m.cell, m.power, m.cost_fn, m.seg) == 0.0 &&
           g_upper(0.0, m.cell, m.power, m.cost_fn, m.seg) == 0.0 &&
           g_upper(hi, m.cell, m.power, m.cost_fn, m.seg) == 0.0;
}

} // namespace detail

/// Gradient descent on F(eps) = (Gamma(eps) - n)^2 / 2 with the update
/// eps <- eps - beta (n - Gamma(eps)), starting from eps = 0.
///
/// Gamma is Gamma^L for a previously ON cell and Gamma^U otherwise. The step
/// starts at the slope of g at n, which makes the first step close to a Newton
/// step whatever the scale of f, and is halved every time the residual
/// changes sign. Positive eps_star means the cell would pay to be OFF.
inline IndexResult compute_index(const DecoupledModel& model, const CellState& state, const IndexOptions& opts = {}) {
    const int n = state.residual_users;
    if (n < 0 || n > model.n_th)
        throw DomainError("residual users outside [0, N_th]");
    IndexResult res;
    if (detail::indifferent_everywhere(model)) {
        res.gamma = n;
        return res;
    }

    auto g = [&](double x) {
        return state.prev_on ? g_lower(x, model.cell, model.power, model.cost_fn, model.seg)
                             : g_upper(x, model.cell, model.power, model.cost_fn, model.seg);
    };
    double beta = opts.beta;
    if (!(beta > 0.0)) {
        const double x = static_cast<double>(n);
        const double lo = std::max(0.0, x - 0.5), hi = x + 0.5;
        beta = std::max((g(hi) - g(lo)) / (hi - lo), 1e-9);
    }

    const double target = static_cast<double>(n);
    const double tol = std::sqrt(2.0 * opts.xi);
    double eps = 0.0;
    double prev_resid = 0.0;
    // last eps seen on each side of the target, for jump detection
    double eps_off_side = -std::numeric_limits<double>::infinity();
    double eps_on_side = std::numeric_limits<double>::infinity();
    DecoupledStart warm;
    for (int it = 1; it <= opts.max_iterations; ++it) {
        const auto sol = decoupled_rvia(model, eps, opts.rvia, it == 1 ? nullptr : &warm);
        warm = {sol.sigma1, sol.sigma0};
        const double gamma = detail::index_threshold(sol, state.prev_on, model.n_th);
        const double resid = target - gamma;
        res.iterations = it;
        res.gamma = gamma;
        res.eps_star = eps;
        if (0.5 * resid * resid <= opts.xi)
            return res;
        if (resid < 0.0)
            eps_off_side = std::max(eps_off_side, eps);
        else
            eps_on_side = std::min(eps_on_side, eps);
        if (std::isfinite(eps_off_side) && std::isfinite(eps_on_side) &&
            eps_on_side - eps_off_side <= 1e-12 * std::max(1.0, std::abs(eps))) {
            // Gamma skips over the target here: the action at this state flips at a single eps
            res.eps_star = 0.5 * (eps_on_side + eps_off_side);
            res.jump = true;
            return res;
        }
        if (it > 1 && (resid > 0.0) != (prev_resid > 0.0))
            beta *= 0.5;
        prev_resid = resid;
        double next = eps - beta * resid;
        // never step outside the bracket already established
        if (std::isfinite(eps_off_side) && std::isfinite(eps_on_side) &&
            !(next > eps_off_side && next < eps_on_side))
            next = 0.5 * (eps_off_side + eps_on_side);
        eps = next;
    }
    throw ConvergenceError("index computation did not reach |Gamma - n| <= " + std::to_string(tol),
                           std::abs(target - res.gamma), opts.max_iterations);
}

/// Willingness to pay for OFF at every single-cell state.
struct IndexTable {
    std::vector<double> eps_on;  ///< previous segment ON
    std::vector<double> eps_off; ///< previous segment OFF

    double at(const CellState& s) const {
        const auto& v = s.prev_on ? eps_on : eps_off;
        return v.at(static_cast<std::size_t>(s.residual_users));
    }
    int n_th() const noexcept { return static_cast<int>(eps_on.size()) - 1; }
};

inline IndexTable build_index_table(const DecoupledModel& model, const IndexOptions& opts = {}) {
    IndexTable t;
    const std::size_t n1 = static_cast<std::size_t>(model.n_th) + 1;
    t.eps_on.resize(n1);
    t.eps_off.resize(n1);
    for (std::size_t n = 0; n < n1; ++n) {
        t.eps_on[n] = compute_index(model, {true, static_cast<int>(n)}, opts).eps_star;
        t.eps_off[n] = compute_index(model, {false, static_cast<int>(n)}, opts).eps_star;
    }
    return t;
}

/// Columns prev_on, n, eps_star.
inline void write_index_csv(std::ostream& os, const IndexTable& t) {
    os << "prev_on,n,eps_star\n" << std::setprecision(17);
    for (int prev = 1; prev >= 0; --prev)
        for (std::size_t n = 0; n < t.eps_on.size(); ++n)
            os << prev << ',' << n << ',' << (prev ? t.eps_on[n] : t.eps_off[n]) << '\n';
}

/// OFF for the cells whose index is >= 0 and among the K largest; equal
/// indexes go to the lower cell.
inline ActionVector index_action(const ClusterState& s, const std::vector<IndexTable>& tables, int k) {
    if (tables.size() != s.size())
        throw DomainError("need one index table per cell");
    std::vector<double> idx(s.size());
    for (std::size_t m = 0; m < s.size(); ++m)
        idx[m] = tables[m].at(s[m]);
    return ActionVector(select_off_cells(idx, k), k);
}

// ---------------------------------------------------------------------------
// Indexability diagnostics
// ---------------------------------------------------------------------------

struct IndexabilityRow {
    double eps;
    ThresholdSolve gamma_l;
    ThresholdSolve gamma_u;
    double h_gap; ///< H = Sigma_1 - Sigma_0
};

struct IndexabilityReport {
    std::vector<IndexabilityRow> rows;
    double e_bound = 0.0; ///< E = Sum Pr(n) Delta_1(n)
    std::vector<std::string> violations;

    bool ok() const noexcept { return violations.empty(); }
};

/// Scans a sorted eps grid and checks that both thresholds are non-increasing
/// in eps, that Gamma^L < Gamma^U when P_switch > 0 and at least one of them is
/// inside [0, N_th], and that E <= H <= 0. `tol` absorbs bisection error.
inline IndexabilityReport indexability_scan(const DecoupledModel& model, const std::vector<double>& eps_grid,
                                            double tol = 1e-6, const DecoupledOptions& opts = {}) {
    if (!std::is_sorted(eps_grid.begin(), eps_grid.end()))
        throw DomainError("eps grid must be sorted");
    IndexabilityReport rep;
    rep.e_bound = h_gap_lower_bound(model);
    DecoupledStart warm;
    bool have_warm = false;
    for (double eps : eps_grid) {
        const auto sol = decoupled_rvia(model, eps, opts, have_warm ? &warm : nullptr);
        warm = {sol.sigma1, sol.sigma0};
        have_warm = true;
        rep.rows.push_back({eps, sol.gamma_l, sol.gamma_u, sol.h_gap()});
    }

    auto note = [&](const std::string& what, double eps) {
        std::ostringstream os;
        os << what << " at eps = " << std::setprecision(10) << eps;
        rep.violations.push_back(os.str());
    };
    const double scale_tol = [&] {
        double s = 1.0;
        for (const auto& r : rep.rows)
            s = std::max(s, std::abs(r.h_gap));
        return tol * s;
    }();
    for (std::size_t i = 0; i < rep.rows.size(); ++i) {
        const auto& r = rep.rows[i];
        if (i > 0) {
            const auto& q = rep.rows[i - 1];
            if (r.gamma_l.value > q.gamma_l.value + tol)
                note("Gamma^L increases", r.eps);
            if (r.gamma_u.value > q.gamma_u.value + tol)
                note("Gamma^U increases", r.eps);
        }
        const bool interior = r.gamma_l.saturation == Saturation::none || r.gamma_u.saturation == Saturation::none;
        if (model.power.p_switch > 0.0 && interior && !(r.gamma_l.value < r.gamma_u.value))
            note("Gamma^L >= Gamma^U", r.eps);
        if (r.h_gap > scale_tol)
            note("H > 0", r.eps);
        if (r.h_gap < rep.e_bound - scale_tol)
            note("H < E", r.eps);
    }
    return rep;
}

} // namespace sleepctl
