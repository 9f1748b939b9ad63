#include <string>

#include "CLI11.hpp"
#include "mmr/cli.hpp"

int main(int argc, char** argv) {
    CLI::App app{"Minimax-regret treatment assignment with new treatment values"};
    app.require_subcommand(1);

    mmr::CliOptions opt;
    std::uint64_t seed = 0;
    std::string out_dir;
    bool seed_set = false, out_set = false;

    auto add_common = [&](CLI::App* sub, bool needs_data) {
        sub->add_option("--config", opt.config_path, "run configuration (JSON)")->required();
        if (needs_data)
            sub->add_option("--data", opt.data_path, "sample CSV: treatment,outcome,x1,...,xk")
                ->required();
        sub->add_option("--out", out_dir, "output directory")->each([&](const std::string&) {
            out_set = true;
        });
        sub->add_option("--seed", seed, "seed override")->each([&](const std::string&) {
            seed_set = true;
        });
        sub->add_option("--threads", opt.threads, "worker threads")->check(CLI::PositiveNumber);
    };

    auto* bounds = app.add_subcommand("bounds", "pointwise identified-set bounds per level");
    add_common(bounds, true);
    auto* solve = app.add_subcommand("solve", "estimate the minimax-regret policy");
    add_common(solve, true);
    auto* project = app.add_subcommand("project", "first-stage shape repair report");
    add_common(project, true);
    auto* simulate = app.add_subcommand("simulate", "Monte Carlo regret convergence");
    add_common(simulate, false);

    CLI11_PARSE(app, argc, argv);
    if (seed_set) opt.seed = seed;
    if (out_set) opt.out_dir = out_dir;

    if (bounds->parsed()) return mmr::cmd_bounds(opt);
    if (solve->parsed()) return mmr::cmd_solve(opt);
    if (project->parsed()) return mmr::cmd_project(opt);
    return mmr::cmd_simulate(opt);
}
