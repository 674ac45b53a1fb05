#include "support/oracles.hpp"

#include <gtest/gtest.h>

using namespace sleepctl;

TEST(GreedyThresholds, ReferenceValues) {
    const auto th = greedy_thresholds(reference::cell(3), reference::power(), 1800.0);
    EXPECT_NEAR(th.gamma_l, 85.0 / 4.0 - 18.0, 1e-12);
    EXPECT_NEAR(th.gamma_u, 125.0 / 4.0 - 18.0, 1e-12);
}

TEST(GreedyThresholds, NeedsCheaperOnUsers) {
    auto pw = reference::power();
    pw.p_e = pw.p_d;
    EXPECT_THROW(greedy_thresholds(reference::cell(3), pw, 1800.0), DomainError);
}

TEST(DualThreshold, Rule) {
    const GreedyThresholds th{3.25, 13.25};
    EXPECT_FALSE(dual_threshold_on({true, 3}, th));
    EXPECT_TRUE(dual_threshold_on({true, 4}, th));
    EXPECT_FALSE(dual_threshold_on({false, 13}, th));
    EXPECT_TRUE(dual_threshold_on({false, 14}, th));
}

TEST(SelectOffCells, TopKNonNegative) {
    EXPECT_EQ(select_off_cells({3.0, -1.0, 5.0, 0.0}, 2), (std::vector<bool>{false, true, false, true}));
    EXPECT_EQ(select_off_cells({3.0, -1.0, 5.0, 0.0}, 4), (std::vector<bool>{false, true, false, false}));
    EXPECT_EQ(select_off_cells({-3.0, -1.0}, 2), (std::vector<bool>{true, true}));
    EXPECT_EQ(select_off_cells({1.0, 1.0, 1.0}, 2), (std::vector<bool>{false, false, true}));
    EXPECT_EQ(select_off_cells({1.0, 1.0}, 0), (std::vector<bool>{true, true}));
}

TEST(GreedyAction, EqualsDualThresholdWhenUnconstrained) {
    const auto cfg = oracle::reference_cluster(4, 4, 3, CostFunction::quadratic());
    const auto th = greedy_thresholds(cfg.cells[0], cfg.power, cfg.segment_duration);
    RngStream rng(4);
    for (int i = 0; i < 3000; ++i) {
        ClusterState s(4);
        for (auto& c : s)
            c = {rng.uniform() < 0.5, static_cast<int>(rng.below(30))};
        const auto a = greedy_action(s, cfg);
        for (int m = 0; m < 4; ++m)
            EXPECT_EQ(a[m], dual_threshold_on(s[m], th));
    }
}

TEST(GreedyAction, MinimizesImmediateCost) {
    for (int k = 0; k <= 4; ++k) {
        const auto cfg = oracle::reference_cluster(4, k, 3, CostFunction::reference_piecewise());
        RngStream rng(40 + k);
        for (int i = 0; i < 1000; ++i) {
            ClusterState s(4);
            for (auto& c : s)
                c = {rng.uniform() < 0.5, static_cast<int>(rng.below(25))};
            const auto a = greedy_action(s, cfg);
            EXPECT_LE(a.off_count(), k);
            EXPECT_NEAR(cluster_cost(s, a, cfg), oracle::brute_force_min_cost(s, cfg), 1e-9);
        }
    }
}

TEST(GreedyLongRun, ConditionedBelowUnconditioned) {
    const auto cfg = oracle::reference_cluster(4, 4, 3, CostFunction::quadratic());
    const auto c = greedy_longrun_cost(cfg);
    const auto u = greedy_longrun_cost_unconditioned(cfg);
    EXPECT_LT(c.cost, u.cost);
    EXPECT_FALSE(c.degenerate);
    for (const auto& cell : c.cells) {
        EXPECT_GT(cell.p_l, 0.0);
        EXPECT_GT(cell.p_u, 0.0);
        EXPECT_NEAR(cell.pi_on, cell.p_u / (cell.p_l + cell.p_u), 1e-15);
    }
}

TEST(GreedyLongRun, NeedsKEqualM) {
    EXPECT_THROW(greedy_longrun_cost(oracle::reference_cluster(4, 2, 3, CostFunction::linear())),
                 UnsupportedConfiguration);
}

TEST(GreedyLongRun, AgreesWithSimulation) {
    const auto cfg = oracle::reference_cluster(2, 2, 3, CostFunction::quadratic());
    const auto r = run_policy(cfg, greedy_policy(cfg), 60000, 17);
    EXPECT_NEAR(r.avg_cost, greedy_longrun_cost(cfg).cost, 4.0 * r.ci_halfwidth);
}

TEST(GreedyLongRun, ZeroSwitchPowerIsTheLowerBound) {
    auto cfg = oracle::reference_cluster(3, 3, 3, CostFunction::quadratic());
    cfg.power.p_switch = 0.0;
    EXPECT_NEAR(greedy_longrun_cost(cfg).cost, lower_bound(cfg).value, 1e-9 * lower_bound(cfg).value);
}

TEST(Dominance, OptimalOffImpliesGreedyOff) {
    for (const auto& f : {CostFunction::linear(), CostFunction::quadratic(), CostFunction::reference_piecewise()}) {
        for (int m = 1; m <= 2; ++m) {
            const auto cfg = oracle::reference_cluster(m, m, 3, f);
            const auto solved = rvia_solve(cfg);
            const auto rep = check_greedy_optimal_dominance(cfg, solved);
            EXPECT_TRUE(rep.ok()) << f.name() << " M=" << m << " violations " << rep.violations.size();
            EXPECT_EQ(rep.states_checked, JointStateIndex(m, cfg.n_th).size());
        }
    }
}
