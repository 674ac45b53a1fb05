#pragma once

#include "sleepctl/arrivals.hpp"
#include "sleepctl/core_model.hpp"
#include "sleepctl/cost.hpp"
#include "sleepctl/hash.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <limits>
#include <optional>
#include <string>
#include <thread>
#include <vector>

namespace sleepctl {

// ---------------------------------------------------------------------------
// Actions and states
// ---------------------------------------------------------------------------

/// All ON/OFF vectors with at most K zeros, lexicographic with OFF < ON and
/// cell 0 most significant.
inline std::vector<ActionVector> enumerate_actions(int m, int k) {
    if (m < 1 || m > 30)
        throw DomainError("enumerate_actions: m must lie in [1, 30]");
    if (k < 0 || k > m)
        throw DomainError("enumerate_actions: need 0 <= K <= M");
    std::vector<ActionVector> out;
    const std::uint64_t total = std::uint64_t{1} << m;
    for (std::uint64_t code = 0; code < total; ++code) {
        std::vector<bool> on(m);
        int off = 0;
        for (int i = 0; i < m; ++i) {
            on[i] = (code >> (m - 1 - i)) & 1U;
            off += !on[i];
        }
        if (off <= k)
            out.emplace_back(std::move(on), k);
    }
    return out;
}

/// Dense mixed-radix index over (2 (N_th + 1))^M cluster states; cell 0 is
/// the least significant digit and a cell digit is prev_on * (N_th + 1) + n.
class JointStateIndex {
public:
    JointStateIndex(int m, int n_th) : m_(m), n1_(n_th + 1) {
        const double sz = std::pow(2.0 * n1_, m);
        if (sz > 9e15)
            throw CapacityError("joint state space does not fit a 64-bit index");
        size_ = static_cast<std::uint64_t>(sz);
    }

    std::uint64_t size() const noexcept { return size_; }
    int cells() const noexcept { return m_; }
    int n_th() const noexcept { return n1_ - 1; }

    std::uint64_t encode(const ClusterState& s) const {
        if (static_cast<int>(s.size()) != m_)
            throw DomainError("state has the wrong number of cells");
        std::uint64_t idx = 0;
        for (int i = m_ - 1; i >= 0; --i) {
            const auto& c = s[i];
            if (c.residual_users < 0 || c.residual_users >= n1_)
                throw DomainError("residual users outside [0, N_th]");
            idx = idx * (2 * n1_) + (c.prev_on ? n1_ : 0) + c.residual_users;
        }
        return idx;
    }

    ClusterState decode(std::uint64_t idx) const {
        if (idx >= size_)
            throw DomainError("state index out of range");
        ClusterState s(m_);
        for (int i = 0; i < m_; ++i) {
            const int digit = static_cast<int>(idx % (2 * n1_));
            idx /= 2 * n1_;
            s[i].prev_on = digit >= n1_;
            s[i].residual_users = digit % n1_;
        }
        return s;
    }

private:
    int m_;
    int n1_;
    std::uint64_t size_;
};

/// Pr(next | cur, act). The current residual counts do not matter: the next
/// counts are fresh i.i.d. draws and the next ON/OFF is the action itself.
inline double transition_prob(const ClusterState& next, const ClusterState& cur, const ActionVector& act,
                              const std::vector<ResidualPmf>& pmfs) {
    (void)cur;
    double p = 1.0;
    for (std::size_t m = 0; m < next.size(); ++m) {
        if (next[m].prev_on != act[m])
            return 0.0;
        const int n = next[m].residual_users;
        if (n < 0 || n > pmfs[m].n_th())
            return 0.0;
        p *= pmfs[m].probs[n];
    }
    return p;
}

// ---------------------------------------------------------------------------
// Solver
// ---------------------------------------------------------------------------

struct RviaOptions {
    double tolerance = 1e-8;        ///< span of successive value differences
    long max_sweeps = 100000;
    double budget = 1e7;            ///< refuse models larger than this (see rvia_solve)
    unsigned threads = 1;
};

/// Everything a solved joint model needs to answer queries.
///
/// Values are stored per action as W(a) = E[h(a, n')], the expected relative
/// value of the state an action leads to; h and the policy at any state
/// follow from one minimization over actions.
class SolvedMdp {
public:
    ClusterConfig config;
    std::vector<ResidualPmf> pmfs;
    std::vector<CellCostTable> tables;
    std::vector<ActionVector> actions;
    std::vector<double> w;
    double gain = 0.0;
    long sweeps = 0;
    double residual = 0.0;

    /// Only filled by the dense solver.
    std::vector<double> h_dense;
    std::vector<std::uint32_t> policy_dense;

    double immediate(const ClusterState& s, std::size_t a) const {
        double c = 0.0;
        for (std::size_t m = 0; m < s.size(); ++m)
            c += tables[m].at(s[m].prev_on, static_cast<std::size_t>(s[m].residual_users), actions[a][m]);
        return c;
    }

    double q(const ClusterState& s, std::size_t a) const { return immediate(s, a) + w[a]; }

    /// Index of the minimizing action. Near-ties (relative 1e-12) go to the
    /// action with more OFF cells, then to the lexicographically smallest.
    std::size_t action_index(const ClusterState& s) const {
        check_state(s);
        std::size_t best = 0;
        double best_q = q(s, 0);
        for (std::size_t a = 1; a < actions.size(); ++a) {
            const double qa = q(s, a);
            const double tie = 1e-12 * std::max(1.0, std::abs(best_q));
            if (qa < best_q - tie) {
                best = a;
                best_q = qa;
            } else if (qa <= best_q + tie && actions[a].off_count() > actions[best].off_count()) {
                best = a;
                best_q = std::min(best_q, qa);
            }
        }
        return best;
    }

    const ActionVector& action(const ClusterState& s) const { return actions[action_index(s)]; }

    /// h(s) = min_a Q(s, a) - g, zero at the all-(ON, 0) reference state.
    double relative_value(const ClusterState& s) const {
        check_state(s);
        double best = std::numeric_limits<double>::infinity();
        for (std::size_t a = 0; a < actions.size(); ++a)
            best = std::min(best, q(s, a));
        return best - reference_q();
    }

    ClusterState reference_state() const {
        return ClusterState(static_cast<std::size_t>(config.m_cells), CellState{true, 0});
    }

private:
    double reference_q() const {
        const auto ref = reference_state();
        double best = std::numeric_limits<double>::infinity();
        for (std::size_t a = 0; a < actions.size(); ++a)
            best = std::min(best, q(ref, a));
        return best;
    }

    void check_state(const ClusterState& s) const {
        if (static_cast<int>(s.size()) != config.m_cells)
            throw DomainError("state has the wrong number of cells");
        for (const auto& c : s)
            if (c.residual_users < 0 || c.residual_users > config.n_th)
                throw DomainError("residual users outside [0, N_th]");
    }
};

/// Points enumerated per sweep by the factored solver: |A| (N_th + 1)^(M - 1).
inline double rvia_work(const ClusterConfig& cfg) {
    const double n_actions = static_cast<double>(enumerate_actions(cfg.m_cells, cfg.k_max_off).size());
    return n_actions * std::pow(cfg.n_th + 1.0, cfg.m_cells - 1);
}

namespace detail {

inline SolvedMdp prepare(const ClusterConfig& cfg) {
    cfg.validate();
    SolvedMdp s;
    s.config = cfg;
    s.actions = enumerate_actions(cfg.m_cells, cfg.k_max_off);
    for (const auto& cell : cfg.cells) {
        s.pmfs.push_back(residual_pmf(cell, cfg.segment_duration, cfg.n_th));
        s.tables.push_back(cost_table(cell, cfg.power, cfg.cost_fn, cfg.segment_duration, cfg.n_th));
    }
    s.w.assign(s.actions.size(), 0.0);
    return s;
}

/// E_n'[ min_a C((prev, n'), a) + W(a) ] for one ON/OFF pattern `prev` of the
/// next state, enumerating all cells but the last and handling the last one
/// in closed form.
class Expectation {
public:
    Expectation(const SolvedMdp& s, const ActionVector& prev) : s_(s), m_(s.config.m_cells) {
        const std::size_t na = s.actions.size();
        const std::size_t n1 = static_cast<std::size_t>(s.config.n_th) + 1;
        sigma_.assign(m_, std::vector<double>(n1));
        base_ = 0.0;
        for (int m = 0; m < m_; ++m) {
            const auto& t = s.tables[m];
            const auto& p = s.pmfs[m].probs;
            for (std::size_t n = 0; n < n1; ++n) {
                const double on = t.on(prev[m], n);
                sigma_[m][n] = on - t.off[n];
                base_ += p[n] * on;
            }
        }
        const int last = m_ - 1;
        for (std::size_t a = 0; a < na; ++a)
            (s.actions[a][last] ? last_on_ : last_off_).push_back(a);

        // last cell: sigma sorted descending with running sums of p and p * sigma
        std::vector<std::size_t> order(n1);
        for (std::size_t n = 0; n < n1; ++n)
            order[n] = n;
        std::stable_sort(order.begin(), order.end(),
                         [&](std::size_t x, std::size_t y) { return sigma_[last][x] > sigma_[last][y]; });
        sorted_sigma_.resize(n1);
        cum_p_.assign(n1 + 1, 0.0);
        cum_ps_.assign(n1 + 1, 0.0);
        for (std::size_t i = 0; i < n1; ++i) {
            const std::size_t n = order[i];
            const double p = s.pmfs[last].probs[n];
            sorted_sigma_[i] = sigma_[last][n];
            cum_p_[i + 1] = cum_p_[i] + p;
            cum_ps_[i + 1] = cum_ps_[i] + p * sigma_[last][n];
        }
        levels_.assign(static_cast<std::size_t>(m_), std::vector<double>(na));
    }

    double operator()(const std::vector<double>& w) {
        levels_[0] = w;
        return base_ + descend(0);
    }

private:
    double descend(int m) {
        const auto& v = levels_[m];
        if (m == m_ - 1)
            return leaf(v);
        const auto& p = s_.pmfs[m].probs;
        auto& next = levels_[m + 1];
        double acc = 0.0;
        for (std::size_t n = 0; n < p.size(); ++n) {
            if (p[n] == 0.0)
                continue;
            const double sg = sigma_[m][n];
            for (std::size_t a = 0; a < v.size(); ++a)
                next[a] = s_.actions[a][m] ? v[a] : v[a] - sg;
            acc += p[n] * descend(m + 1);
        }
        return acc;
    }

    double leaf(const std::vector<double>& v) const {
        double a_min = std::numeric_limits<double>::infinity();
        for (auto a : last_on_)
            a_min = std::min(a_min, v[a]);
        if (last_off_.empty())
            return a_min;
        double b_min = std::numeric_limits<double>::infinity();
        for (auto a : last_off_)
            b_min = std::min(b_min, v[a]);
        if (last_on_.empty()) {
            // last cell is OFF in every action: E[B - sigma]
            return b_min - cum_ps_.back();
        }
        // E[min(A, B - sigma)] = A + sum_{sigma > D} p (D - sigma), D = B - A
        const double d = b_min - a_min;
        const auto it = std::partition_point(sorted_sigma_.begin(), sorted_sigma_.end(),
                                             [d](double x) { return x > d; });
        const auto k = static_cast<std::size_t>(it - sorted_sigma_.begin());
        return a_min + d * cum_p_[k] - cum_ps_[k];
    }

    const SolvedMdp& s_;
    int m_;
    double base_;
    std::vector<std::vector<double>> sigma_;
    std::vector<std::size_t> last_on_, last_off_;
    std::vector<double> sorted_sigma_, cum_p_, cum_ps_;
    std::vector<std::vector<double>> levels_;
};

inline double span(const std::vector<double>& a, const std::vector<double>& b) {
    double lo = std::numeric_limits<double>::infinity();
    double hi = -lo;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        lo = std::min(lo, d);
        hi = std::max(hi, d);
    }
    return hi - lo;
}

} // namespace detail

/// Relative value iteration for the joint model.
///
/// Iterates on W(a) = E[h(a, n')] rather than on h itself, which is exact
/// because the next residual counts do not depend on the current state.
/// One sweep is W'(b) = E_n[min_a C((b, n), a) + W(a)] - r with r the same
/// minimum at the reference state; since h' - h is bounded by W - W_prev in
/// span, stopping on span(W' - W) < tol meets the state-space criterion.
///
/// Throws CapacityError when rvia_work(cfg) exceeds opts.budget and
/// ConvergenceError after opts.max_sweeps sweeps.
inline SolvedMdp rvia_solve(const ClusterConfig& cfg, const RviaOptions& opts = {},
                            const std::vector<double>* warm_start = nullptr) {
    cfg.validate();
    const double work = rvia_work(cfg);
    if (work > opts.budget)
        throw CapacityError("joint model needs " + std::to_string(static_cast<long long>(work)) +
                            " points per sweep, budget is " +
                            std::to_string(static_cast<long long>(opts.budget)));
    SolvedMdp s = detail::prepare(cfg);
    const std::size_t na = s.actions.size();
    if (warm_start && warm_start->size() == na)
        s.w = *warm_start;

    std::vector<detail::Expectation> ev;
    ev.reserve(na);
    for (std::size_t b = 0; b < na; ++b)
        ev.emplace_back(s, s.actions[b]);

    const auto ref = s.reference_state();
    std::vector<double> ref_cost(na);
    for (std::size_t a = 0; a < na; ++a)
        ref_cost[a] = s.immediate(ref, a);

    const unsigned threads = std::max(1u, std::min<unsigned>(opts.threads, static_cast<unsigned>(na)));
    std::vector<double> next(na);
    for (long sweep = 1; sweep <= opts.max_sweeps; ++sweep) {
        double r = std::numeric_limits<double>::infinity();
        for (std::size_t a = 0; a < na; ++a)
            r = std::min(r, ref_cost[a] + s.w[a]);

        auto work_range = [&](std::size_t lo, std::size_t hi) {
            for (std::size_t b = lo; b < hi; ++b)
                next[b] = ev[b](s.w) - r;
        };
        if (threads == 1) {
            work_range(0, na);
        } else {
            // each worker owns whole action patterns, so results do not depend on scheduling
            std::vector<std::thread> pool;
            for (unsigned t = 0; t < threads; ++t)
                pool.emplace_back(work_range, na * t / threads, na * (t + 1) / threads);
            for (auto& th : pool)
                th.join();
        }

        const double res = detail::span(next, s.w);
        s.w.swap(next);
        s.gain = r;
        s.sweeps = sweep;
        s.residual = res;
        if (res < opts.tolerance) {
            // gain of the converged iterate
            double g = std::numeric_limits<double>::infinity();
            for (std::size_t a = 0; a < na; ++a)
                g = std::min(g, ref_cost[a] + s.w[a]);
            s.gain = g;
            return s;
        }
    }
    throw ConvergenceError("joint RVIA did not converge", s.residual, s.sweeps);
}

/// Plain RVIA on the enumerated state space with the explicit transition
/// kernel: three nested loops (state, action, next state). Only meant for tiny
/// instances; used to cross-check rvia_solve.
inline SolvedMdp rvia_solve_dense(const ClusterConfig& cfg, const RviaOptions& opts = {}) {
    cfg.validate();
    JointStateIndex index(cfg.m_cells, cfg.n_th);
    if (index.size() > 5000)
        throw CapacityError("dense RVIA is limited to 5000 states");
    SolvedMdp s = detail::prepare(cfg);
    const std::size_t ns = index.size();
    const std::size_t na = s.actions.size();

    std::vector<ClusterState> states(ns);
    for (std::size_t i = 0; i < ns; ++i)
        states[i] = index.decode(i);
    const std::size_t ref = index.encode(s.reference_state());

    std::vector<double> h(ns, 0.0), th(ns);
    std::vector<std::uint32_t> pol(ns, 0);
    for (long sweep = 1; sweep <= opts.max_sweeps; ++sweep) {
        for (std::size_t i = 0; i < ns; ++i) {
            double best = std::numeric_limits<double>::infinity();
            for (std::size_t a = 0; a < na; ++a) {
                double cont = 0.0;
                for (std::size_t j = 0; j < ns; ++j) {
                    const double p = transition_prob(states[j], states[i], s.actions[a], s.pmfs);
                    if (p != 0.0)
                        cont += p * h[j];
                }
                const double qa = s.immediate(states[i], a) + cont;
                if (qa < best) {
                    best = qa;
                    pol[i] = static_cast<std::uint32_t>(a);
                }
            }
            th[i] = best;
        }
        const double g = th[ref];
        double lo = std::numeric_limits<double>::infinity(), hi = -lo;
        for (std::size_t i = 0; i < ns; ++i) {
            const double nh = th[i] - g;
            lo = std::min(lo, nh - h[i]);
            hi = std::max(hi, nh - h[i]);
            h[i] = nh;
        }
        s.gain = g;
        s.sweeps = sweep;
        s.residual = hi - lo;
        if (s.residual < opts.tolerance) {
            // W(a) from h so that the query interface works as for rvia_solve
            for (std::size_t a = 0; a < na; ++a) {
                double cont = 0.0;
                for (std::size_t j = 0; j < ns; ++j)
                    cont += transition_prob(states[j], states[ref], s.actions[a], s.pmfs) * h[j];
                s.w[a] = cont;
            }
            s.h_dense = h;
            s.policy_dense = pol;
            return s;
        }
    }
    throw ConvergenceError("dense RVIA did not converge", s.residual, s.sweeps);
}

// ---------------------------------------------------------------------------
// Persistence
// ---------------------------------------------------------------------------

inline constexpr char kMdpMagic[8] = {'S', 'L', 'P', 'M', 'D', 'P', '\0', '\0'};
inline constexpr std::uint32_t kMdpVersion = 1;

/// Binary dump: magic, version, config hash, |A|, gain, sweeps, residual, W.
inline void save_solution(const SolvedMdp& s, const std::string& path) {
    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out)
            throw std::runtime_error("cannot write " + tmp);
        const std::uint64_t hash = config_hash(s.config);
        const std::uint64_t na = s.w.size();
        out.write(kMdpMagic, sizeof kMdpMagic);
        out.write(reinterpret_cast<const char*>(&kMdpVersion), sizeof kMdpVersion);
        out.write(reinterpret_cast<const char*>(&hash), sizeof hash);
        out.write(reinterpret_cast<const char*>(&na), sizeof na);
        out.write(reinterpret_cast<const char*>(&s.gain), sizeof s.gain);
        out.write(reinterpret_cast<const char*>(&s.sweeps), sizeof s.sweeps);
        out.write(reinterpret_cast<const char*>(&s.residual), sizeof s.residual);
        out.write(reinterpret_cast<const char*>(s.w.data()), static_cast<std::streamsize>(na * sizeof(double)));
        if (!out)
            throw std::runtime_error("short write to " + tmp);
    }
    if (std::rename(tmp.c_str(), path.c_str()) != 0)
        throw std::runtime_error("cannot move " + tmp + " to " + path);
}

/// Loads a dump written for exactly this configuration; nullopt when the file
/// is missing, from another version or another configuration.
inline std::optional<SolvedMdp> load_solution(const ClusterConfig& cfg, const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        return std::nullopt;
    char magic[8];
    std::uint32_t version = 0;
    std::uint64_t hash = 0, na = 0;
    in.read(magic, sizeof magic);
    in.read(reinterpret_cast<char*>(&version), sizeof version);
    in.read(reinterpret_cast<char*>(&hash), sizeof hash);
    in.read(reinterpret_cast<char*>(&na), sizeof na);
    if (!in || !std::equal(magic, magic + 8, kMdpMagic) || version != kMdpVersion || hash != config_hash(cfg))
        return std::nullopt;
    SolvedMdp s = detail::prepare(cfg);
    if (na != s.actions.size())
        return std::nullopt;
    in.read(reinterpret_cast<char*>(&s.gain), sizeof s.gain);
    in.read(reinterpret_cast<char*>(&s.sweeps), sizeof s.sweeps);
    in.read(reinterpret_cast<char*>(&s.residual), sizeof s.residual);
    in.read(reinterpret_cast<char*>(s.w.data()), static_cast<std::streamsize>(na * sizeof(double)));
    if (!in)
        return std::nullopt;
    return s;
}

} // namespace sleepctl
