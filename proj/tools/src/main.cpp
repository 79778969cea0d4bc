#include "ctrllab_cli/commands.hpp"

#include <CLI11.hpp>

#include <iostream>

int main(int argc, char** argv) {
    using namespace ctrllab::cli;
    CLI::App app{"ctrllab: boundary null-control laboratory for a coupled 2x2 parabolic system"};
    app.require_subcommand(1, 1);
    std::string config_path, out;
    int threads = 1;
    for (const auto& name : command_names()) {
        auto* sub = app.add_subcommand(name);
        sub->add_option("--config", config_path, "JSON experiment configuration")->required()->check(CLI::ExistingFile);
        sub->add_option("--threads", threads, "cap on module-level parallelism")->check(CLI::PositiveNumber);
        sub->add_option("--out", out, "output directory (overrides output_dir)");
    }
    CLI11_PARSE(app, argc, argv);
    const std::string cmd = app.get_subcommands().front()->get_name();
    try {
        const RunConfig cfg = RunConfig::load(config_path);
        CommandOptions opt;
        opt.threads = threads;
        opt.out_dir = out;
        const CommandResult r = run_command(cmd, cfg, opt);
        for (const auto& f : r.files) std::cout << f << '\n';
        std::cout << r.summary.dump() << '\n';
        return 0;
    } catch (const std::exception& e) {
        return report_error(std::cerr, e);
    }
}
