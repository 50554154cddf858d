#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "palab/cli.hpp"

int main(int argc, char** argv) {
    CLI::App app{"Principal-agent contracts under default risk: solver and simulator"};
    app.require_subcommand(1);

    std::string config;
    std::string case_name = "bounded";
    std::string out = "out";
    std::string policy;
    std::string scenario;
    std::string suite;
    std::optional<std::size_t> paths;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> freeze_mode;
    std::optional<std::string> p_grid;

    auto sim_flags = [&](CLI::App* sub) {
        sub->add_option("--paths", paths, "number of simulated paths");
        sub->add_option("--seed", seed, "master seed");
        sub->add_option("--freeze-mode", freeze_mode, "carry_last, alive_only or both");
    };

    auto* solve = app.add_subcommand("solve", "solve the principal's HJB by policy iteration");
    solve->add_option("--config", config, "INI configuration")->required();
    solve->add_option("--case", case_name, "bounded or unbounded");
    solve->add_option("--out", out, "output directory");

    auto* simulate = app.add_subcommand("simulate", "simulate paths under a solved policy");
    simulate->add_option("--config", config, "INI configuration")->required();
    simulate->add_option("--policy", policy, "solution.csv written by solve")->required();
    simulate->add_option("--out", out, "output directory");
    sim_flags(simulate);

    auto* linear = app.add_subcommand("compare-linear", "compare the general contract with linear ones");
    linear->add_option("--config", config, "INI configuration")->required();
    linear->add_option("--case", case_name, "bounded or unbounded");
    linear->add_option("--out", out, "output directory");
    linear->add_option("--p-grid", p_grid, "comma-separated percentages");
    sim_flags(linear);

    auto* experiments = app.add_subcommand("experiments", "run a figure scenario");
    experiments->add_option("scenario", scenario, "fig1, fig2, fig3 or fig4")->required();
    experiments->add_option("--config", config, "INI configuration (defaults when omitted)");
    experiments->add_option("--out", out, "output directory");
    experiments->add_option("--p-grid", p_grid, "comma-separated percentages (fig3)");
    sim_flags(experiments);

    auto* check = app.add_subcommand("check", "run a property suite");
    check->add_option("suite", suite, "hazard, oracle, martingale or degenerate")->required();
    check->add_option("--config", config, "INI configuration (defaults when omitted)");

    CLI11_PARSE(app, argc, argv);

    const palab::SimOverrides o{paths, seed, freeze_mode, p_grid};
    const auto opt_config = config.empty() ? std::nullopt : std::optional<std::filesystem::path>(config);

    if (*solve) return palab::cmd_solve(config, case_name, out);
    if (*simulate) return palab::cmd_simulate(config, policy, out, o);
    if (*linear) return palab::cmd_compare_linear(config, case_name, out, o);
    if (*experiments) return palab::cmd_experiments(scenario, out, opt_config, o);
    if (*check) return palab::cmd_check(suite, opt_config);
    return 1;
}
