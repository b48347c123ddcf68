// treeberg: command-line driver for the tree Bergman-space experiments.

#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "treeberg/errors.hpp"
#include "treeberg/experiments.hpp"

int main(int argc, char** argv) {
    CLI::App app{"Harmonic Bergman spaces on homogeneous trees: reproducible experiments"};
    app.require_subcommand(1);

    std::string config_path;
    std::string out_dir = ".";
    std::uint64_t seed = 0;

    struct Command {
        const char* name;
        const char* help;
        int (*run)(const treeberg::Config&, const treeberg::RunOptions&);
    };
    const Command commands[] = {
        {"kernel-table", "kernel profile table with three-way residuals (CSV)", treeberg::cmd_kernel_table},
        {"phase-diagram", "boundedness phase diagram of S/T operators (CSV)", treeberg::cmd_phase_diagram},
        {"cz-demo", "Calderon-Zygmund decompositions with verifier reports (JSON)", treeberg::cmd_cz_demo},
        {"hormander-scan", "truncated Hormander supremum and kernel L1 moments (CSV)",
         treeberg::cmd_hormander_scan},
    };
    std::vector<CLI::Option*> seed_options;
    for (const auto& c : commands) {
        auto* sub = app.add_subcommand(c.name, c.help);
        sub->add_option("--config", config_path, "key=value configuration file")->required()->check(CLI::ExistingFile);
        sub->add_option("--out", out_dir, "output directory");
        seed_options.push_back(sub->add_option("--seed", seed, "random seed (overrides [run] seed)"));
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : treeberg::kExitConfig;
    }

    for (std::size_t i = 0; i < std::size(commands); ++i) {
        const auto* sub = app.get_subcommands().front();
        if (sub->get_name() != commands[i].name) {
            continue;
        }
        treeberg::RunOptions options;
        options.out_dir = out_dir;
        if (seed_options[i]->count() > 0) {
            options.seed = seed;
        }
        options.log = &std::cerr;
        try {
            const auto config = treeberg::Config::load(config_path);
            return commands[i].run(config, options);
        } catch (const treeberg::ValidationError& e) {
            std::cerr << "config error: " << e.what() << '\n';
            return treeberg::kExitConfig;
        } catch (const treeberg::CapacityError& e) {
            std::cerr << "capacity error: " << e.what() << '\n';
            return treeberg::kExitConfig;
        } catch (const std::exception& e) {
            std::cerr << "error: " << e.what() << '\n';
            return treeberg::kExitBreach;
        }
    }
    return treeberg::kExitConfig;
}
