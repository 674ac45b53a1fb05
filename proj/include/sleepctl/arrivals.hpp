#pragma once

#include "sleepctl/core_model.hpp"
#include "sleepctl/rng.hpp"

#include <boost/math/special_functions/gamma.hpp>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

namespace sleepctl {

/// Mean number of a segment's arrivals still present at its end, for one
/// mixture component: (lambda/mu)(1 - exp(-mu T_s)).
inline double tilde_lambda(double rate, double service_rate, double seg) {
    if (!(service_rate > 0.0))
        throw DomainError("service rate must be positive");
    if (!(seg > 0.0))
        throw DomainError("segment duration must be positive");
    return rate / service_rate * -std::expm1(-service_rate * seg);
}

/// Poisson(l; mean) evaluated in log space.
inline double poisson_pmf(int l, double mean) {
    if (l < 0)
        return 0.0;
    if (mean <= 0.0)
        return l == 0 ? 1.0 : 0.0;
    return std::exp(l * std::log(mean) - mean - std::lgamma(l + 1.0));
}

/// Pr(X > n) for X ~ Poisson(mean).
inline double poisson_tail(int n, double mean) {
    if (mean <= 0.0 || n < 0)
        return n < 0 ? 1.0 : 0.0;
    // Pr(X <= n) = Q(n + 1, mean), so the tail is the regularized lower gamma.
    return boost::math::gamma_p(n + 1.0, mean);
}

/// Distribution of residual users at a segment boundary, truncated at N_th.
/// Mass beyond N_th is folded into the last bin.
struct ResidualPmf {
    std::vector<double> probs;
    double tail_mass = 0.0; ///< untruncated Pr(n > N_th), already included in probs.back()

    int n_th() const noexcept { return static_cast<int>(probs.size()) - 1; }

    double operator[](std::size_t l) const { return probs[l]; }

    double mean() const {
        double m = 0.0;
        for (std::size_t l = 0; l < probs.size(); ++l)
            m += static_cast<double>(l) * probs[l];
        return m;
    }
};

/// Component means lambda~_j, aligned with the mixture's rates.
inline std::vector<double> residual_means(const CellParams& cell, double seg) {
    std::vector<double> means;
    means.reserve(cell.arrivals.rates.size());
    for (double rate : cell.arrivals.rates)
        means.push_back(tilde_lambda(rate, cell.service_rate(), seg));
    return means;
}

/// Mean of the untruncated residual distribution, Sum_j p_j lambda~_j.
inline double residual_mean(const CellParams& cell, double seg) {
    const auto means = residual_means(cell, seg);
    double m = 0.0;
    for (std::size_t j = 0; j < means.size(); ++j)
        m += cell.arrivals.probs[j] * means[j];
    return m;
}

inline ResidualPmf residual_pmf(const CellParams& cell, double seg, int n_th) {
    if (n_th < 1)
        throw DomainError("n_th must be at least 1");
    const auto means = residual_means(cell, seg);
    const auto& probs = cell.arrivals.probs;

    ResidualPmf pmf;
    pmf.probs.assign(static_cast<std::size_t>(n_th) + 1, 0.0);
    for (std::size_t j = 0; j < means.size(); ++j) {
        if (probs[j] == 0.0)
            continue;
        for (int l = 0; l < n_th; ++l)
            pmf.probs[l] += probs[j] * poisson_pmf(l, means[j]);
        // bin N_th = Pr(X = N_th) + Pr(X > N_th)
        const double tail = poisson_tail(n_th, means[j]);
        pmf.probs[n_th] += probs[j] * (poisson_pmf(n_th, means[j]) + tail);
        pmf.tail_mass += probs[j] * tail;
    }
    return pmf;
}

/// Default truncation: the smallest N with max_j Pr(Poisson(lambda~_j) > N) < tail_tol,
/// doubled. Components with zero probability are ignored.
inline int default_n_th(std::span<const CellParams> cells, double seg, double tail_tol = 1e-9) {
    int n = 0;
    for (const auto& cell : cells) {
        const auto means = residual_means(cell, seg);
        for (std::size_t j = 0; j < means.size(); ++j) {
            if (cell.arrivals.probs[j] == 0.0)
                continue;
            int k = 0;
            while (poisson_tail(k, means[j]) >= tail_tol)
                ++k;
            n = std::max(n, k);
        }
    }
    return std::max(1, 2 * n);
}

// ---------------------------------------------------------------------------
// Sampling
// ---------------------------------------------------------------------------

struct SegmentDraw {
    int count = 0;
    std::vector<double> arrival_epochs; ///< seconds from the segment start
    std::vector<double> stay_times;     ///< seconds
};

/// Index of the mixture component drawn for one segment.
inline std::size_t sample_component(const ArrivalMixture& mix, RngStream& rng) {
    const double u = rng.uniform();
    double acc = 0.0;
    std::size_t last_positive = 0;
    for (std::size_t j = 0; j < mix.probs.size(); ++j) {
        if (mix.probs[j] <= 0.0)
            continue;
        last_positive = j;
        acc += mix.probs[j];
        if (u < acc)
            return j;
    }
    return last_positive;
}

/// New arrivals of one segment: a rate from the mixture, a Poisson count,
/// uniform epochs and exponential stays.
inline SegmentDraw sample_segment(const CellParams& cell, double seg, RngStream& rng) {
    const auto j = sample_component(cell.arrivals, rng);
    SegmentDraw draw;
    draw.count = rng.poisson(cell.arrivals.rates[j] * seg);
    draw.arrival_epochs.reserve(draw.count);
    draw.stay_times.reserve(draw.count);
    for (int i = 0; i < draw.count; ++i) {
        draw.arrival_epochs.push_back(rng.uniform() * seg);
        draw.stay_times.push_back(rng.exponential(cell.mean_service_time));
    }
    return draw;
}

/// Inverse-CDF draw of a residual count.
inline int sample_residual(const ResidualPmf& pmf, RngStream& rng) {
    const double u = rng.uniform();
    double acc = 0.0;
    for (std::size_t l = 0; l + 1 < pmf.probs.size(); ++l) {
        acc += pmf.probs[l];
        if (u < acc)
            return static_cast<int>(l);
    }
    return pmf.n_th();
}

// ---------------------------------------------------------------------------
// Event-driven oracle
// ---------------------------------------------------------------------------

struct EmpiricalPmf {
    std::vector<double> probs;
    std::size_t samples = 0;

    double mean() const {
        double m = 0.0;
        for (std::size_t l = 0; l < probs.size(); ++l)
            m += static_cast<double>(l) * probs[l];
        return m;
    }
};

/// Simulates every user individually, including those that survive several
/// segments, and histograms the count present at each segment boundary.
/// The first `warmup` boundaries are discarded.
inline EmpiricalPmf residual_oracle(const CellParams& cell, double seg, std::size_t segments,
                                   RngStream& rng, std::size_t warmup = 50) {
    if (segments < 10000)
        throw DomainError("residual oracle needs at least 1e4 segments");
    std::vector<double> remaining; // time left in the cell, measured from the current boundary
    std::vector<std::size_t> counts;

    for (std::size_t t = 0; t < segments + warmup; ++t) {
        const auto draw = sample_segment(cell, seg, rng);
        for (int i = 0; i < draw.count; ++i)
            remaining.push_back(draw.arrival_epochs[i] + draw.stay_times[i]);
        // advance to the next boundary; a user is still present if T_s - tau <= xi
        std::erase_if(remaining, [seg](double r) { return r < seg; });
        for (double& r : remaining)
            r -= seg;
        if (t < warmup)
            continue;
        const std::size_t n = remaining.size();
        if (n >= counts.size())
            counts.resize(n + 1, 0);
        ++counts[n];
    }

    EmpiricalPmf out;
    out.samples = segments;
    out.probs.resize(counts.size());
    for (std::size_t l = 0; l < counts.size(); ++l)
        out.probs[l] = static_cast<double>(counts[l]) / static_cast<double>(segments);
    return out;
}

/// Total variation distance; the shorter input is zero-padded.
inline double total_variation(std::span<const double> a, std::span<const double> b) {
    const std::size_t n = std::max(a.size(), b.size());
    double tv = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double x = i < a.size() ? a[i] : 0.0;
        const double y = i < b.size() ? b[i] : 0.0;
        tv += std::abs(x - y);
    }
    return 0.5 * tv;
}

} // namespace sleepctl
