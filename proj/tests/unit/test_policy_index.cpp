#include "support/oracles.hpp"

#include <gtest/gtest.h>

#include <sstream>

using namespace sleepctl;

namespace {

DecoupledModel model(CostFunction f, int set = 3) {
    const auto c = oracle::reference_cluster(1, 1, set, std::move(f));
    return {c.cells[0], c.power, c.cost_fn, c.segment_duration, c.n_th};
}

std::vector<CostFunction> all_costs() {
    return {CostFunction::linear(), CostFunction::quadratic(), CostFunction::reference_piecewise()};
}

} // namespace

TEST(DecoupledRvia, GainEqualsBestDualThresholdPair) {
    for (const auto& f : all_costs()) {
        const auto m = model(f);
        for (double eps : {-300.0, -20.0, 0.0, 15.0, 120.0}) {
            const auto sol = decoupled_rvia(m, eps);
            const double best = oracle::best_dual_threshold_gain(m, eps);
            EXPECT_NEAR(sol.gain, best, 1e-8 * std::abs(best)) << f.name() << " eps " << eps;
        }
    }
}

TEST(DecoupledRvia, PolicyIsDualThreshold) {
    for (const auto& f : all_costs()) {
        const auto m = model(f);
        for (double eps : {-50.0, 0.0, 50.0}) {
            const auto sol = decoupled_rvia(m, eps);
            for (int n = 0; n <= m.n_th; ++n) {
                if (sol.gamma_l.saturation == Saturation::none && std::abs(n - sol.gamma_l.value) > 1e-6) {
                    EXPECT_EQ(bool(sol.on_after_on[n]), n > sol.gamma_l.value) << f.name() << " " << eps << " " << n;
                }
                if (sol.gamma_u.saturation == Saturation::none && std::abs(n - sol.gamma_u.value) > 1e-6) {
                    EXPECT_EQ(bool(sol.on_after_off[n]), n > sol.gamma_u.value) << f.name() << " " << eps << " " << n;
                }
            }
        }
    }
}

TEST(DecoupledRvia, HProfileMatchesClosedForm) {
    for (const auto& f : all_costs()) {
        const auto m = model(f);
        for (double eps : {-100.0, 0.0, 30.0}) {
            const auto sol = decoupled_rvia(m, eps);
            const auto got = h_difference_profile(sol);
            const auto want = h_difference_closed_form(m, sol.rhs());
            ASSERT_EQ(got.size(), want.size());
            for (std::size_t n = 0; n < got.size(); ++n)
                EXPECT_NEAR(got[n], want[n], 1e-6 * std::max(1.0, std::abs(want[n]))) << f.name() << " n " << n;
        }
    }
}

TEST(DecoupledRvia, HGapBounds) {
    for (const auto& f : all_costs()) {
        const auto m = model(f);
        const double e = h_gap_lower_bound(m);
        for (double eps : {-500.0, -10.0, 0.0, 10.0, 500.0}) {
            const auto sol = decoupled_rvia(m, eps);
            EXPECT_LE(sol.h_gap(), 1e-7 * std::abs(e)) << f.name();
            EXPECT_GE(sol.h_gap(), e - 1e-7 * std::abs(e)) << f.name();
        }
    }
}

TEST(DecoupledRvia, HProfileMonotone) {
    // h(ON, n) - h(OFF, n) lies between Delta_1(n) and 0 and moves towards 0 as n grows
    for (const auto& f : all_costs()) {
        const auto m = model(f);
        const auto sol = decoupled_rvia(m, 0.0);
        const auto d = h_difference_profile(sol);
        for (std::size_t n = 0; n < d.size(); ++n) {
            EXPECT_LE(d[n], 1e-7);
            EXPECT_GE(d[n], delta1(double(n), m.cell, m.power, m.cost_fn, m.seg) - 1e-6);
        }
    }
}

TEST(DecoupledRvia, ThresholdsFallAsOffGetsDearer) {
    for (const auto& f : all_costs()) {
        const auto m = model(f);
        double pl = 1e300, pu = 1e300;
        for (double eps = -200.0; eps <= 200.0; eps += 10.0) {
            const double l = oracle::threshold_at(m, true, eps), u = oracle::threshold_at(m, false, eps);
            EXPECT_LE(l, pl + 1e-6) << f.name() << " eps " << eps;
            EXPECT_LE(u, pu + 1e-6) << f.name() << " eps " << eps;
            pl = l;
            pu = u;
        }
    }
}

TEST(ComputeIndex, ThresholdReachedMatchesFlipOracle) {
    const double xi = 1e-4;
    for (const auto& f : all_costs()) {
        const auto m = model(f);
        for (const CellState s : {CellState{true, 0}, CellState{true, 2}, CellState{true, 6}, CellState{false, 0},
                                  CellState{false, 8}, CellState{false, 14}, CellState{false, 30}}) {
            const auto r = compute_index(m, s);
            const double flip = oracle::eps_flip(m, s);
            const double g_gd = oracle::threshold_at(m, s.prev_on, r.eps_star);
            const double g_or = oracle::threshold_at(m, s.prev_on, flip);
            EXPECT_LE(std::abs(g_gd - g_or), 2.0 * std::sqrt(2.0 * xi) + 1e-9)
                << f.name() << " prev_on " << s.prev_on << " n " << s.residual_users << " eps* " << r.eps_star
                << " flip " << flip;
        }
    }
}

TEST(ComputeIndex, SignMatchesGreedyAtZeroPenalty) {
    // at eps = 0 the decoupled cell is optimal; a positive index means it would pay for OFF
    const auto m = model(CostFunction::linear());
    const auto sol = decoupled_rvia(m, 0.0);
    for (int n = 0; n <= 20; ++n)
        for (bool prev : {true, false}) {
            const auto r = compute_index(m, {prev, n});
            const bool off_at_zero = prev ? !sol.on_after_on[n] : !sol.on_after_off[n];
            if (std::abs(r.eps_star) > 1e-3) {
                EXPECT_EQ(r.eps_star > 0.0, off_at_zero) << "prev " << prev << " n " << n;
            }
        }
}

TEST(ComputeIndex, IndifferentModelGivesZero) {
    auto m = model(CostFunction::linear());
    m.cost_fn = CostFunction::piecewise({{0.0, 0.0, 1.0}});
    EXPECT_DOUBLE_EQ(compute_index(m, {true, 3}).eps_star, 0.0);
}

TEST(ComputeIndex, RejectsOutOfRangeState) {
    EXPECT_THROW(compute_index(model(CostFunction::linear()), {true, 1000}), DomainError);
}

TEST(IndexTable, NonIncreasingInUsers) {
    for (const auto& f : all_costs()) {
        const auto m = model(f);
        const auto t = build_index_table(m);
        ASSERT_EQ(t.n_th(), m.n_th);
        const double scale = std::abs(t.eps_off[0]) + 1.0;
        for (int n = 0; n < m.n_th; ++n) {
            EXPECT_LE(t.eps_on[n + 1], t.eps_on[n] + 1e-3 * scale) << f.name() << " n " << n;
            EXPECT_LE(t.eps_off[n + 1], t.eps_off[n] + 1e-3 * scale) << f.name() << " n " << n;
        }
    }
}

TEST(IndexTable, CsvLayout) {
    const auto t = build_index_table(model(CostFunction::linear()));
    std::ostringstream os;
    write_index_csv(os, t);
    const auto rows = parse_csv(os.str());
    ASSERT_EQ(rows.size(), 1u + 2u * t.eps_on.size());
    EXPECT_EQ(rows[0], (std::vector<std::string>{"prev_on", "n", "eps_star"}));
    EXPECT_EQ(rows[1][0], "1");
    EXPECT_EQ(rows[1][1], "0");
    EXPECT_DOUBLE_EQ(std::stod(rows[1][2]), t.eps_on[0]);
    EXPECT_EQ(rows.back()[0], "0");
    EXPECT_DOUBLE_EQ(std::stod(rows.back()[2]), t.eps_off.back());
}

TEST(IndexAction, TopKNonNegativeLowerCellWins) {
    IndexTable a{{5.0, -1.0}, {7.0, 2.0}}, b{{5.0, -2.0}, {1.0, 0.0}};
    const std::vector<IndexTable> tables{a, b, a};
    const ClusterState s{{true, 0}, {true, 0}, {true, 0}};
    EXPECT_EQ(index_action(s, tables, 1).bits(), (std::vector<bool>{false, true, true}));
    EXPECT_EQ(index_action(s, tables, 2).bits(), (std::vector<bool>{false, false, true}));
    const ClusterState t{{true, 1}, {false, 1}, {false, 1}};
    EXPECT_EQ(index_action(t, tables, 3).bits(), (std::vector<bool>{true, false, false}));
    EXPECT_THROW(index_action(s, {a}, 1), DomainError);
}

TEST(Indexability, LinearScanHasNoViolations) {
    std::vector<double> grid;
    for (double e = -200.0; e <= 200.0; e += 5.0)
        grid.push_back(e);
    const auto rep = indexability_scan(model(CostFunction::linear()), grid);
    EXPECT_TRUE(rep.ok()) << (rep.violations.empty() ? "" : rep.violations.front());
    EXPECT_EQ(rep.rows.size(), grid.size());
    EXPECT_THROW(indexability_scan(model(CostFunction::linear()), {1.0, 0.0}), DomainError);
}
