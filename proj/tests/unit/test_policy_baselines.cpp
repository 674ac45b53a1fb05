#include "support/oracles.hpp"

#include <gtest/gtest.h>

using namespace sleepctl;

TEST(UniformAction, ExactlyKOffWithEqualFrequencies) {
    RngStream rng(12);
    const int m = 6, k = 2, draws = 60000;
    std::vector<int> off(m);
    for (int i = 0; i < draws; ++i) {
        const auto a = uniform_action(m, k, rng);
        ASSERT_EQ(a.off_count(), k);
        for (int c = 0; c < m; ++c)
            off[c] += !a[c];
    }
    for (int c = 0; c < m; ++c)
        EXPECT_NEAR(off[c] / double(draws), double(k) / m, 0.01);
}

TEST(UniformAction, PairsAreUniform) {
    RngStream rng(13);
    std::vector<int> hits(16);
    const int draws = 60000;
    for (int i = 0; i < draws; ++i) {
        const auto a = uniform_action(4, 2, rng);
        int code = 0;
        for (int c = 0; c < 4; ++c)
            code |= (!a[c]) << c;
        ++hits[code];
    }
    for (int code = 0; code < 16; ++code) {
        if (__builtin_popcount(code) == 2)
            EXPECT_NEAR(hits[code] / double(draws), 1.0 / 6.0, 0.01);
        else
            EXPECT_EQ(hits[code], 0);
    }
}

TEST(RoundRobin, FiveCellsThreeOff) {
    // (t - m) mod 5 < 3
    const std::vector<std::vector<bool>> expect{
        {false, true, true, false, false}, {false, false, true, true, false}, {false, false, false, true, true},
        {true, false, false, false, true},  {true, true, false, false, false},
    };
    for (long t = 0; t < 10; ++t)
        EXPECT_EQ(round_robin_action(t, 5, 3).bits(), expect[t % 5]) << "t " << t;
}

TEST(RoundRobin, EachCellOffKConsecutive) {
    for (int m = 1; m <= 7; ++m)
        for (int k = 0; k <= m; ++k)
            for (int c = 0; c < m; ++c) {
                int off = 0, switches = 0;
                for (long t = 0; t < m; ++t) {
                    const bool now = round_robin_action(t, m, k)[c];
                    const bool before = round_robin_action(t - 1 + m, m, k)[c];
                    off += !now;
                    switches += now && !before;
                }
                EXPECT_EQ(off, k);
                EXPECT_EQ(switches, (k > 0 && k < m) ? 1 : 0);
            }
}

TEST(BaselineCosts, ClosedFormsAgreeWithSimulation) {
    for (const auto& [m, k] : {std::pair{4, 2}, std::pair{5, 3}, std::pair{3, 1}}) {
        const auto cfg = oracle::reference_cluster(m, k, 3, CostFunction::quadratic());
        const auto costs = cluster_anticipated_costs(cfg);
        const auto u = run_policy(cfg, uniform_policy(m, k), 40000, 99);
        const auto r = run_policy(cfg, round_robin_policy(m, k), 40000, 99);
        EXPECT_NEAR(u.avg_cost, uniform_longrun_cost(cfg, costs), 4.0 * u.ci_halfwidth) << m << "," << k;
        EXPECT_NEAR(r.avg_cost, round_robin_longrun_cost(cfg, costs), 4.0 * r.ci_halfwidth) << m << "," << k;
    }
}

TEST(BaselineCosts, EdgeK) {
    const auto cfg0 = oracle::reference_cluster(3, 0, 3, CostFunction::linear());
    const auto cfgm = oracle::reference_cluster(3, 3, 3, CostFunction::linear());
    const auto c = cluster_anticipated_costs(cfg0);
    EXPECT_NEAR(uniform_longrun_cost(cfg0, c), 3 * c[0].c11, 1e-9);
    EXPECT_NEAR(round_robin_longrun_cost(cfg0, c), 3 * c[0].c11, 1e-9);
    EXPECT_NEAR(uniform_longrun_cost(cfgm, c), 3 * c[0].c0, 1e-9);
    EXPECT_NEAR(round_robin_longrun_cost(cfgm, c), 3 * c[0].c0, 1e-9);
}

TEST(BaselineDifference, MatchesCostGapAndIsQuadraticInK) {
    const int m = 12;
    std::vector<double> ks, diffs;
    for (int k = 1; k < m; ++k) {
        const auto cfg = oracle::reference_cluster(m, k, 3, CostFunction::reference_piecewise());
        const auto costs = cluster_anticipated_costs(cfg);
        const auto d = baseline_difference(cfg, costs);
        const double gap = round_robin_longrun_cost(cfg, costs) - uniform_longrun_cost(cfg, costs);
        EXPECT_NEAR(d.diff, gap, 1e-9 * std::abs(uniform_longrun_cost(cfg, costs)));
        ks.push_back(k);
        diffs.push_back(d.diff);
    }
    EXPECT_LT(oracle::polyfit_max_residual(ks, diffs, 2), 1e-9);
    EXPECT_GT(oracle::polyfit_max_residual(ks, diffs, 1), 1e-3);
}

TEST(BaselineDifference, Examples) {
    auto cfg = oracle::reference_cluster(4, 1, 3, CostFunction::quadratic());
    auto d = baseline_difference(cfg, cluster_anticipated_costs(cfg));
    EXPECT_TRUE(d.uniform_better);
    EXPECT_TRUE(d.rule_predicts_uniform);
    EXPECT_NEAR(d.diff, d.c_diff / 16.0, 1e-9);

    cfg = oracle::reference_cluster(4, 2, 3, CostFunction::quadratic());
    d = baseline_difference(cfg, cluster_anticipated_costs(cfg));
    EXPECT_NEAR(d.diff, 0.0, 1e-9);
    EXPECT_FALSE(d.uniform_better);

    cfg = oracle::reference_cluster(5, 3, 3, CostFunction::quadratic());
    d = baseline_difference(cfg, cluster_anticipated_costs(cfg));
    EXPECT_FALSE(d.uniform_better);
    EXPECT_FALSE(d.rule_predicts_uniform);

    cfg = oracle::reference_cluster(3, 1, 3, CostFunction::quadratic());
    d = baseline_difference(cfg, cluster_anticipated_costs(cfg));
    EXPECT_TRUE(d.uniform_better);
    EXPECT_TRUE(d.rule_predicts_uniform);

    cfg.power.p_switch = 0.0;
    d = baseline_difference(cfg, cluster_anticipated_costs(cfg));
    EXPECT_NEAR(d.diff, 0.0, 1e-9);
    EXPECT_FALSE(d.rule_predicts_uniform);

    cfg = oracle::reference_cluster(4, 4, 3, CostFunction::quadratic());
    EXPECT_THROW(baseline_difference(cfg, cluster_anticipated_costs(cfg)), DomainError);
}

TEST(LowerBound, BelowEveryClosedForm) {
    for (const auto& f : {CostFunction::linear(), CostFunction::quadratic(), CostFunction::reference_piecewise()})
        for (int k = 0; k <= 4; ++k) {
            const auto cfg = oracle::reference_cluster(4, k, 3, f);
            const auto costs = cluster_anticipated_costs(cfg);
            const double lb = lower_bound(cfg).value;
            EXPECT_LE(lb, uniform_longrun_cost(cfg, costs));
            EXPECT_LE(lb, round_robin_longrun_cost(cfg, costs));
            if (k == 4) {
                EXPECT_LE(lb, greedy_longrun_cost(cfg).cost);
            }
        }
}

TEST(LowerBound, PerStateMinimum) {
    // sum over cells of E[min(ON cost without switching, OFF cost)]
    const auto cfg = oracle::reference_cluster(2, 2, 3, CostFunction::quadratic());
    const auto pmf = residual_pmf(cfg.cells[0], cfg.segment_duration, cfg.n_th);
    const auto t = cost_table(cfg.cells[0], cfg.power, cfg.cost_fn, cfg.segment_duration, cfg.n_th);
    double want = 0.0;
    for (std::size_t n = 0; n < pmf.probs.size(); ++n)
        want += 2.0 * pmf.probs[n] * std::min(t.on_stay[n], t.off[n]);
    const auto lb = lower_bound(cfg);
    EXPECT_NEAR(lb.value, want, 1e-9 * want);
    EXPECT_NEAR(lb.tail_mass, 2.0 * pmf.tail_mass, 1e-20);
}
