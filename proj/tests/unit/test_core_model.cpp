#include "support/oracles.hpp"

#include <gtest/gtest.h>

using namespace sleepctl;

TEST(EvalCost, LinearIsIdentity) { EXPECT_DOUBLE_EQ(eval_cost(CostFunction::linear(), 113.0), 113.0); }

TEST(EvalCost, QuadraticSquares) { EXPECT_DOUBLE_EQ(eval_cost(CostFunction::quadratic(), 113.0), 12769.0); }

TEST(EvalCost, ReferencePiecewiseMiddlePiece) {
    // x - 50 between 100 and 150 W
    EXPECT_DOUBLE_EQ(eval_cost(CostFunction::reference_piecewise(), 120.0), 70.0);
}

TEST(EvalCost, ReferencePiecewiseAllPieces) {
    const auto f = CostFunction::reference_piecewise();
    EXPECT_DOUBLE_EQ(f(0.0), 0.0);
    EXPECT_DOUBLE_EQ(f(100.0), 50.0);
    EXPECT_DOUBLE_EQ(f(150.0), 100.0);
    EXPECT_DOUBLE_EQ(f(200.0), 175.0);
}

TEST(EvalCost, NegativeWattsRejected) {
    EXPECT_THROW(eval_cost(CostFunction::linear(), -1.0), DomainError);
    EXPECT_THROW(eval_cost(CostFunction::quadratic(), -1e-12), DomainError);
}

TEST(EvalCost, NonDecreasingOnRandomPairs) {
    RngStream rng(11);
    const std::vector<CostFunction> fs{CostFunction::linear(), CostFunction::quadratic(),
                                       CostFunction::reference_piecewise()};
    for (const auto& f : fs)
        for (int i = 0; i < 5000; ++i) {
            double a = rng.uniform() * 400.0, b = rng.uniform() * 400.0;
            if (a > b)
                std::swap(a, b);
            EXPECT_LE(eval_cost(f, a), eval_cost(f, b)) << f.name() << " at " << a << ", " << b;
        }
}

TEST(CostFunction, PiecewiseValidation) {
    EXPECT_THROW(CostFunction::piecewise({}), DomainError);
    EXPECT_THROW(CostFunction::piecewise({{1.0, 1.0, 0.0}}), DomainError);                    // not from 0
    EXPECT_THROW(CostFunction::piecewise({{0.0, -1.0, 5.0}}), DomainError);                   // decreasing
    EXPECT_THROW(CostFunction::piecewise({{0.0, 1.0, 0.0}, {10.0, 2.0, 0.0}}), DomainError);  // jump at 10
    EXPECT_THROW(CostFunction::piecewise({{0.0, 1.0, 0.0}, {0.0, 2.0, 0.0}}), DomainError);   // not increasing
    EXPECT_THROW(CostFunction::piecewise({{0.0, 1.0, -1.0}}), DomainError);                   // negative at 0
    EXPECT_NO_THROW(CostFunction::piecewise({{0.0, 1.0, 0.0}, {10.0, 2.0, -10.0}}));
}

TEST(MeanArrivalRate, Set3) {
    // 2/3 * 0.005 + 1/3 * 0.02
    EXPECT_NEAR(mean_arrival_rate(reference::cell(3)), 2.0 / 3.0 * 0.005 + 1.0 / 3.0 * 0.02, 1e-15);
    EXPECT_NEAR(mean_arrival_rate(reference::cell(3)), 0.01, 1e-15);
}

TEST(MeanArrivalRate, DegenerateMixture) {
    EXPECT_DOUBLE_EQ(mean_arrival_rate(CellParams{ArrivalMixture::single(0.01), 500.0}), 0.01);
}

TEST(MeanArrivalRate, Set2) { EXPECT_NEAR(mean_arrival_rate(reference::cell(2)), 0.5 * 0.005 + 0.5 * 0.015, 1e-15); }

TEST(MeanArrivalRate, AllFiveSetsShareTheMean) {
    for (int s = 1; s <= 5; ++s)
        EXPECT_NEAR(mean_arrival_rate(reference::cell(s)), 0.01, 1e-15) << "set " << s;
}

TEST(ArrivalMixture, Validation) {
    EXPECT_THROW((ArrivalMixture{{0.01, 0.02}, {0.5, 0.6}}.validate()), DomainError);
    EXPECT_THROW((ArrivalMixture{{0.01}, {0.5, 0.5}}.validate()), DomainError);
    EXPECT_THROW((ArrivalMixture{{-0.01}, {1.0}}.validate()), DomainError);
    EXPECT_THROW((ArrivalMixture{{0.01, 0.02}, {1.5, -0.5}}.validate()), DomainError);
    EXPECT_NO_THROW((ArrivalMixture{{0.01, 0.02}, {0.25, 0.75}}.validate()));
    EXPECT_THROW(reference::set_probs(6), DomainError);
}

TEST(ClusterConfig, Validation) {
    auto c = oracle::reference_cluster(4, 4, 3, CostFunction::linear());
    EXPECT_NO_THROW(c.validate());
    c.k_max_off = 5;
    EXPECT_THROW(c.validate(), DomainError);
    c.k_max_off = -1;
    EXPECT_THROW(c.validate(), DomainError);
    c.k_max_off = 2;
    c.n_th = 0;
    EXPECT_THROW(c.validate(), DomainError);
    c.n_th = 10;
    c.segment_duration = 0.0;
    EXPECT_THROW(c.validate(), DomainError);
    c.segment_duration = 1800.0;
    c.cells.pop_back();
    EXPECT_THROW(c.validate(), DomainError);
}

TEST(ActionVector, RejectsTooManyOff) {
    EXPECT_THROW(ActionVector({false, false, true}, 1), ContractViolation);
    EXPECT_NO_THROW(ActionVector({false, true, true}, 1));
    const ActionVector a({false, true, false, true}, 2);
    EXPECT_EQ(a.off_count(), 2);
    EXPECT_EQ(a.on_count(), 2);
    EXPECT_FALSE(a.on(0));
    EXPECT_THROW(a.on(4), std::out_of_range);
    EXPECT_EQ(ActionVector::all_on(3).off_count(), 0);
}

TEST(PowerParams, NegativeRejected) {
    PowerParams p;
    p.p_switch = -1.0;
    EXPECT_THROW(p.validate(), DomainError);
}
