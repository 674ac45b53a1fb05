// Command-line front end: solve, simulate, index-table, experiment, validate.

#include "sleepctl/sleepctl.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <iostream>
#include <memory>
#include <sstream>

using namespace sleepctl;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitCapacity = 3;

struct Globals {
    std::uint64_t seed = 0;
    bool seed_set = false;
    long segments = 0;
    std::string out_dir = ".";
    unsigned threads = 1;
};

int cmd_validate(const std::string& path) {
    const auto cfg = load_config(path);
    const auto& c = cfg.cluster;
    std::cout << "config   " << path << "\n"
              << "hash     " << hex64(config_hash(c)) << "\n"
              << "cells    M=" << c.m_cells << " K=" << c.k_max_off << "\n"
              << "cost     " << c.cost_fn.name() << "\n"
              << "n_th     " << c.n_th << (cfg.n_th_auto ? " (auto)" : "") << "\n"
              << "segment  " << c.segment_duration << " s\n";
    std::cout << std::setprecision(10);
    const auto lb = lower_bound(c);
    for (int m = 0; m < c.m_cells; ++m) {
        const auto& cell = c.cells[m];
        const auto th = greedy_thresholds(cell, c.power, c.segment_duration);
        const auto pmf = residual_pmf(cell, c.segment_duration, c.n_th);
        const auto ac = anticipated_costs(cell, c.power, c.cost_fn, c.segment_duration, pmf);
        std::cout << "cell " << m + 1 << ": lambda_bar=" << mean_arrival_rate(cell)
                  << " E[n]=" << residual_mean(cell, c.segment_duration) << " gamma_l=" << th.gamma_l
                  << " gamma_u=" << th.gamma_u << " C01=" << ac.c01 << " C11=" << ac.c11 << " C0=" << ac.c0 << "\n";
    }
    std::cout << "lower bound " << lb.value << " (tail mass " << lb.tail_mass << ")\n";
    if (c.k_max_off == c.m_cells)
        std::cout << "greedy long-run cost " << greedy_longrun_cost(c).cost << "\n";
    const auto costs = cluster_anticipated_costs(c);
    std::cout << "uniform long-run cost " << uniform_longrun_cost(c, costs) << "\n"
              << "round-robin long-run cost " << round_robin_longrun_cost(c, costs) << "\n";
    return 0;
}

int cmd_solve(const std::string& path, const std::string& dump, double budget, const Globals& g) {
    const auto cfg = load_config(path);
    RviaOptions ro;
    ro.budget = budget;
    ro.threads = g.threads;
    const auto s = rvia_solve(cfg.cluster, ro);
    std::cout << std::setprecision(12) << "gain " << s.gain << "\nsweeps " << s.sweeps << "\nresidual " << s.residual
              << "\nactions " << s.actions.size() << "\n";
    const auto lb = lower_bound(cfg.cluster);
    std::cout << "lower bound " << lb.value << "\ndelta " << delta_metric(s.gain, lb.value) << " %\n";
    if (!dump.empty()) {
        save_solution(s, dump);
        std::cout << "wrote " << dump << "\n";
    }
    return 0;
}

int cmd_simulate(const std::string& path, const std::string& policy_name, double budget, const Globals& g) {
    const auto cfg = load_config(path);
    const auto& c = cfg.cluster;
    std::shared_ptr<const SolvedMdp> solved;
    if (policy_name == "optimal") {
        RviaOptions ro;
        ro.budget = budget;
        ro.threads = g.threads;
        solved = std::make_shared<const SolvedMdp>(rvia_solve(c, ro));
    }
    Policy p;
    if (policy_name == "always_on")
        p = always_on_policy(c.m_cells);
    else if (policy_name == "always_off")
        p = always_off_policy(c.m_cells);
    else
        p = detail::make_policy(policy_name, c, solved);
    const long segments = g.segments > 0 ? g.segments : cfg.experiment.segments;
    const auto seed = g.seed_set ? g.seed : cfg.experiment.seed;
    const auto r = run_policy(c, p, segments, seed);
    const double lb = lower_bound(c).value;
    std::cout << std::setprecision(10) << "policy " << r.policy << "\nsegments " << r.segments << "\navg_cost "
              << r.avg_cost << " +- " << r.ci_halfwidth << "\ndelta " << delta_metric(r.avg_cost, lb) << " %\n"
              << "power static " << r.composition.static_w << " dynamic " << r.composition.dynamic_w << " switch "
              << r.composition.switch_w << " extra " << r.composition.extra_w << "\n";
    for (std::size_t m = 0; m < r.on_fraction.size(); ++m)
        std::cout << "cell " << m + 1 << " on_fraction " << r.on_fraction[m] << "\n";
    return 0;
}

int cmd_index_table(const std::string& path, int cell_no, const Globals& g) {
    const auto cfg = load_config(path);
    const auto& c = cfg.cluster;
    if (cell_no < 1 || cell_no > c.m_cells)
        throw ConfigError("--cell must lie in 1.." + std::to_string(c.m_cells));
    const DecoupledModel model{c.cells[cell_no - 1], c.power, c.cost_fn, c.segment_duration, c.n_th};
    const auto t = build_index_table(model);
    std::ostringstream os;
    write_index_csv(os, t);
    if (g.out_dir == "-") {
        std::cout << os.str();
    } else {
        std::filesystem::create_directories(g.out_dir);
        const auto out = (std::filesystem::path(g.out_dir) / ("index_cell" + std::to_string(cell_no) + ".csv")).string();
        write_file_atomic(out, os.str());
        std::cout << "wrote " << out << "\n";
    }
    return 0;
}

int cmd_experiment(const std::string& path, const Globals& g) {
    const auto cfg = load_config(path);
    RunOptions run;
    if (g.seed_set)
        run.seed = g.seed;
    if (g.segments > 0)
        run.segments = g.segments;
    run.out_dir = g.out_dir;
    run.threads = g.threads;
    const auto res = run_experiment(cfg, run);
    return report_summary(res, std::cout);
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Base-station sleep-control policies: solve, simulate and compare"};
    app.require_subcommand(1);
    Globals g;
    app.add_option("--seed", g.seed, "master random seed (overrides the config)")->each([&](const std::string&) {
        g.seed_set = true;
    });
    app.add_option("--segments", g.segments, "simulated segments (overrides the config)");
    app.add_option("--out-dir", g.out_dir, "directory for CSV output ('-' prints index tables)");
    app.add_option("--threads", g.threads, "parallel sweep points")->check(CLI::PositiveNumber);

    std::string config;
    double budget = 1e7;
    std::string dump, policy = "greedy";
    int cell = 1;

    auto* solve = app.add_subcommand("solve", "solve the joint model by relative value iteration");
    solve->add_option("config", config)->required()->check(CLI::ExistingFile);
    solve->add_option("--budget", budget, "largest model size accepted");
    solve->add_option("--dump", dump, "write the solved tables here");

    auto* simulate = app.add_subcommand("simulate", "simulate one policy");
    simulate->add_option("config", config)->required()->check(CLI::ExistingFile);
    simulate->add_option("--policy", policy, "optimal|index|greedy|uniform|roundrobin|always_on|always_off");
    simulate->add_option("--budget", budget, "largest joint model accepted for --policy optimal");

    auto* index = app.add_subcommand("index-table", "write the index table of one cell");
    index->add_option("config", config)->required()->check(CLI::ExistingFile);
    index->add_option("--cell", cell, "cell number, from 1");

    auto* experiment = app.add_subcommand("experiment", "run the [experiment] section of a config");
    experiment->add_option("config", config)->required()->check(CLI::ExistingFile);

    auto* validate = app.add_subcommand("validate", "parse a config and print derived quantities");
    validate->add_option("config", config)->required()->check(CLI::ExistingFile);

    app.fallthrough();
    CLI11_PARSE(app, argc, argv);

    try {
        if (solve->parsed())
            return cmd_solve(config, dump, budget, g);
        if (simulate->parsed())
            return cmd_simulate(config, policy, budget, g);
        if (index->parsed())
            return cmd_index_table(config, cell, g);
        if (experiment->parsed())
            return cmd_experiment(config, g);
        if (validate->parsed())
            return cmd_validate(config);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const CapacityError& e) {
        std::cerr << "capacity: " << e.what() << "\n";
        return kExitCapacity;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
