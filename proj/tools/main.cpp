#include "msh2/commands.hpp"

#include "CLI11.hpp"

#include <iostream>

int main(int argc, char** argv) {
    CLI::App app{"Mean-square H2 controller synthesis and verification for LTI plants driven "
                 "through FIR multiplicative channel noise"};
    app.require_subcommand(1);

    std::string problem_path;
    std::string controller_path;
    msh2::CommandOptions opts;
    std::uint64_t seed_value = 0;
    bool seed_set = false;

    auto add_common = [&](CLI::App* cmd, bool with_controller) {
        cmd->add_option("problem", problem_path, "problem JSON file")->required();
        if (with_controller) {
            cmd->add_option("controller", controller_path, "controller JSON file")->required();
        }
        cmd->add_flag("--json", opts.json_output, "machine-readable output");
        cmd->add_option("--threads", opts.threads, "worker threads for Monte-Carlo runs");
        cmd->add_option("--seed", seed_value, "override the simulation seed")
            ->each([&](const std::string&) { seed_set = true; });
    };

    CLI::App* validate = app.add_subcommand("validate", "check the structural assumptions");
    add_common(validate, false);

    CLI::App* synthesize = app.add_subcommand("synthesize", "design the optimal controller");
    add_common(synthesize, false);
    synthesize->add_option("--out", opts.out_path, "write the controller to this file");

    CLI::App* analyze = app.add_subcommand("analyze", "closed-loop mean-square analysis");
    add_common(analyze, true);

    CLI::App* simulate = app.add_subcommand("simulate", "seeded Monte-Carlo simulation");
    add_common(simulate, true);

    CLI::App* sweep_cmd = app.add_subcommand("sweep", "parameter sweep with per-point synthesis");
    add_common(sweep_cmd, false);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : msh2::kExitInput;
    }
    if (seed_set) {
        opts.seed = seed_value;
    }

    return msh2::run_guarded(
        [&]() -> int {
            if (validate->parsed()) {
                return msh2::cmd_validate(problem_path, opts, std::cout);
            }
            if (synthesize->parsed()) {
                return msh2::cmd_synthesize(problem_path, opts, std::cout);
            }
            if (analyze->parsed()) {
                return msh2::cmd_analyze(problem_path, controller_path, opts, std::cout);
            }
            if (simulate->parsed()) {
                return msh2::cmd_simulate(problem_path, controller_path, opts, std::cout);
            }
            return msh2::cmd_sweep(problem_path, opts, std::cout);
        },
        std::cerr);
}
