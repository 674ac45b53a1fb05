#pragma once

#include "sleepctl/errors.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <string>
#include <variant>
#include <vector>

namespace sleepctl {

// ---------------------------------------------------------------------------
// Power model
// ---------------------------------------------------------------------------

/// Cluster-wide power parameters, in watts.
///
/// `p_d` and `p_e` are per-user powers of the cell server and of the
/// always-on fallback server respectively. Threshold-based policies need
/// p_e > p_d; that is checked where it matters, not here.
struct PowerParams {
    double p_static = 85.0;
    double p_switch = 40.0;
    double p_d = 1.0;
    double p_e = 5.0;

    void validate() const {
        if (!(p_static >= 0.0) || !(p_switch >= 0.0) || !(p_d >= 0.0) || !(p_e >= 0.0))
            throw DomainError("power parameters must be non-negative");
    }
};

// ---------------------------------------------------------------------------
// Cost functions
// ---------------------------------------------------------------------------

struct LinearCost {};
struct QuadraticCost {};

/// One piece of a piecewise-linear cost: applies for x > x_start up to the
/// next piece's x_start (the first piece also covers x = 0).
struct CostPiece {
    double x_start;
    double slope;
    double intercept;
};

struct PiecewiseLinearCost {
    std::vector<CostPiece> pieces;
};

/// Non-decreasing map from watts to cost.
class CostFunction {
public:
    using Variant = std::variant<LinearCost, QuadraticCost, PiecewiseLinearCost>;

    CostFunction() : fn_(LinearCost{}) {}

    static CostFunction linear() { return CostFunction(LinearCost{}); }
    static CostFunction quadratic() { return CostFunction(QuadraticCost{}); }

    /// Pieces must start at 0, be strictly increasing in x_start, have
    /// non-negative slopes and join continuously.
    static CostFunction piecewise(std::vector<CostPiece> pieces) {
        if (pieces.empty())
            throw DomainError("piecewise cost needs at least one piece");
        if (pieces.front().x_start != 0.0)
            throw DomainError("first piecewise cost piece must start at x = 0");
        for (std::size_t i = 0; i < pieces.size(); ++i) {
            if (!(pieces[i].slope >= 0.0))
                throw DomainError("piecewise cost slopes must be non-negative");
            if (i == 0)
                continue;
            const auto& prev = pieces[i - 1];
            const auto& cur = pieces[i];
            if (!(cur.x_start > prev.x_start))
                throw DomainError("piecewise cost breakpoints must be strictly increasing");
            const double left = prev.slope * cur.x_start + prev.intercept;
            const double right = cur.slope * cur.x_start + cur.intercept;
            if (std::abs(left - right) > 1e-9 * std::max(1.0, std::abs(left)))
                throw DomainError("piecewise cost is discontinuous at x = " +
                                  std::to_string(cur.x_start));
        }
        if (pieces.front().intercept < 0.0)
            throw DomainError("piecewise cost must be non-negative at x = 0");
        return CostFunction(PiecewiseLinearCost{std::move(pieces)});
    }

    /// The three-piece function used in the M = 12 experiments:
    /// 0.5x up to 100 W, x - 50 up to 150 W, 1.5x - 125 beyond.
    static CostFunction reference_piecewise() {
        return piecewise({{0.0, 0.5, 0.0}, {100.0, 1.0, -50.0}, {150.0, 1.5, -125.0}});
    }

    const Variant& variant() const noexcept { return fn_; }

    bool is_linear() const noexcept { return std::holds_alternative<LinearCost>(fn_); }

    std::string name() const {
        if (std::holds_alternative<LinearCost>(fn_)) return "linear";
        if (std::holds_alternative<QuadraticCost>(fn_)) return "quadratic";
        return "piecewise";
    }

    /// Unchecked evaluation; callers guarantee x >= 0.
    double operator()(double x) const noexcept {
        if (std::holds_alternative<LinearCost>(fn_))
            return x;
        if (std::holds_alternative<QuadraticCost>(fn_))
            return x * x;
        const auto& pieces = std::get<PiecewiseLinearCost>(fn_).pieces;
        std::size_t i = pieces.size() - 1;
        while (i > 0 && !(x > pieces[i].x_start))
            --i;
        return pieces[i].slope * x + pieces[i].intercept;
    }

private:
    explicit CostFunction(Variant fn) : fn_(std::move(fn)) {}

    Variant fn_;
};

/// f(watts); rejects negative power.
inline double eval_cost(const CostFunction& f, double watts) {
    if (!(watts >= 0.0))
        throw DomainError("cost function evaluated at negative power " + std::to_string(watts));
    return f(watts);
}

// ---------------------------------------------------------------------------
// Arrivals and cells
// ---------------------------------------------------------------------------

/// Mixed-Poisson arrival law: each segment draws rate `rates[j]` with
/// probability `probs[j]`.
struct ArrivalMixture {
    std::vector<double> rates;
    std::vector<double> probs;

    void validate() const {
        if (rates.empty() || rates.size() != probs.size())
            throw DomainError("arrival mixture needs matching, non-empty rates and probs");
        double total = 0.0;
        for (std::size_t j = 0; j < rates.size(); ++j) {
            if (!(rates[j] >= 0.0))
                throw DomainError("arrival rates must be non-negative");
            if (!(probs[j] >= 0.0))
                throw DomainError("mixture probabilities must be non-negative");
            total += probs[j];
        }
        if (std::abs(total - 1.0) > 1e-12)
            throw DomainError("mixture probabilities sum to " + std::to_string(total) + ", not 1");
    }

    static ArrivalMixture single(double rate) { return {{rate}, {1.0}}; }
};

struct CellParams {
    ArrivalMixture arrivals;
    double mean_service_time = 500.0; ///< 1/mu, seconds

    double service_rate() const noexcept { return 1.0 / mean_service_time; }

    void validate() const {
        arrivals.validate();
        if (!(mean_service_time > 0.0))
            throw DomainError("mean service time must be positive");
    }
};

/// Sum_j p_j * lambda_j.
inline double mean_arrival_rate(const CellParams& cell) {
    const auto& a = cell.arrivals;
    double rate = 0.0;
    for (std::size_t j = 0; j < a.rates.size(); ++j)
        rate += a.probs[j] * a.rates[j];
    return rate;
}

// ---------------------------------------------------------------------------
// Cluster
// ---------------------------------------------------------------------------

struct ClusterConfig {
    int m_cells = 4;
    int k_max_off = 4;
    double segment_duration = 1800.0;
    std::vector<CellParams> cells;
    PowerParams power;
    CostFunction cost_fn;
    int n_th = 0; ///< residual-user truncation; must be >= 1 once validated

    void validate() const {
        if (m_cells < 1)
            throw DomainError("cluster needs at least one cell");
        if (k_max_off < 0 || k_max_off > m_cells)
            throw DomainError("k_max_off must lie in [0, m_cells]");
        if (!(segment_duration > 0.0))
            throw DomainError("segment duration must be positive");
        if (static_cast<int>(cells.size()) != m_cells)
            throw DomainError("expected " + std::to_string(m_cells) + " cells, got " +
                              std::to_string(cells.size()));
        if (n_th < 1)
            throw DomainError("n_th must be at least 1");
        power.validate();
        for (const auto& c : cells)
            c.validate();
    }
};

/// Per-cell MDP state: the previous segment's ON/OFF and the users left over
/// at the boundary.
struct CellState {
    bool prev_on = true;
    int residual_users = 0;

    friend bool operator==(const CellState&, const CellState&) = default;
};

using ClusterState = std::vector<CellState>;

/// Joint ON/OFF decision with at most K cells off.
class ActionVector {
public:
    ActionVector() = default;

    ActionVector(std::vector<bool> on, int k_max_off) : on_(std::move(on)) {
        if (off_count() > k_max_off)
            throw ContractViolation("action switches off " + std::to_string(off_count()) +
                                    " cells, at most " + std::to_string(k_max_off) + " allowed");
    }

    static ActionVector all_on(int m) { return ActionVector(std::vector<bool>(m, true), 0); }

    std::size_t size() const noexcept { return on_.size(); }
    bool on(std::size_t m) const { return on_.at(m); }
    bool operator[](std::size_t m) const { return on_[m]; }
    const std::vector<bool>& bits() const noexcept { return on_; }

    int off_count() const noexcept {
        return static_cast<int>(std::count(on_.begin(), on_.end(), false));
    }
    int on_count() const noexcept { return static_cast<int>(on_.size()) - off_count(); }

    friend bool operator==(const ActionVector&, const ActionVector&) = default;

private:
    std::vector<bool> on_;
};

// ---------------------------------------------------------------------------
// Reference parameters
// ---------------------------------------------------------------------------

namespace reference {

inline const std::vector<double> kRates{0.005, 0.01, 0.015, 0.02};

/// Sampling probabilities over kRates, sets 1..5.
inline std::vector<double> set_probs(int set) {
    switch (set) {
    case 1: return {0.0, 1.0, 0.0, 0.0};
    case 2: return {0.5, 0.0, 0.5, 0.0};
    case 3: return {2.0 / 3.0, 0.0, 0.0, 1.0 / 3.0};
    case 4: return {0.3, 0.4, 0.3, 0.0};
    case 5: return {0.6, 0.0, 0.2, 0.2};
    default: throw DomainError("arrival set must be 1..5, got " + std::to_string(set));
    }
}

inline CellParams cell(int set) { return CellParams{ArrivalMixture{kRates, set_probs(set)}, 500.0}; }

inline PowerParams power() { return PowerParams{85.0, 40.0, 1.0, 5.0}; }

constexpr double kSegmentDuration = 1800.0;

} // namespace reference

} // namespace sleepctl
