// Compares the policies on a small cluster and prints their gap to the lower bound.

#include "sleepctl/sleepctl.hpp"

#include <iomanip>
#include <iostream>
#include <memory>

int main() {
    using namespace sleepctl;

    ClusterConfig cfg;
    cfg.m_cells = 4;
    cfg.k_max_off = 2;
    cfg.cells.assign(4, reference::cell(3));
    cfg.cost_fn = CostFunction::quadratic();
    cfg.n_th = default_n_th(cfg.cells, cfg.segment_duration);

    const double lb = lower_bound(cfg).value;
    auto solved = std::make_shared<const SolvedMdp>(rvia_solve(cfg));

    std::vector<Policy> policies{optimal_policy(solved), index_policy(cluster_index_tables(cfg), cfg.k_max_off),
                                 greedy_policy(cfg), uniform_policy(cfg.m_cells, cfg.k_max_off),
                                 round_robin_policy(cfg.m_cells, cfg.k_max_off)};
    const auto results = paired_run(cfg, policies, 20000, 1);

    std::cout << std::fixed << std::setprecision(2) << "lower bound " << lb << "\n";
    for (const auto& r : results)
        std::cout << std::setw(11) << r.policy << "  " << std::setw(10) << r.avg_cost << "  +-" << std::setw(7)
                  << r.ci_halfwidth << "  delta " << delta_metric(r.avg_cost, lb) << " %\n";
}
