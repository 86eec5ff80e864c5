#include "spde/config.hpp"
#include "spde/errors.hpp"
#include "spde/orchestrator.hpp"

#include <CLI11.hpp>

#include <cstdlib>
#include <iostream>
#include <string>
#include <vector>

int main(int argc, char** argv) {
    CLI::App app{"Galerkin SALT Navier-Stokes ensembles and estimate diagnostics"};
    app.set_version_flag("--version", spde::artifact_version());

    std::string command;
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::string out;
    const std::vector<std::string> commands(std::begin(spde::kCommands), std::end(spde::kCommands));
    app.add_option("command", command, "Command to run")
        ->required()
        ->check(CLI::IsMember(commands));
    app.add_option("--config", config_path, "Run configuration file")->required();
    app.add_option("--seed", seed, "Master seed (overrides [ensemble] seed)");
    app.add_option("--out", out, "Output directory (overrides SPDE_OUT and [output] dir)");
    CLI11_PARSE(app, argc, argv);

    try {
        spde::RunConfig config = spde::load_config(config_path);
        config.command = command;
        if (seed) {
            config.ensemble.seed = *seed;
        }
        if (out.empty()) {
            const char* env = std::getenv("SPDE_OUT");
            out = env && *env ? env : config.output.dir;
        }
        const spde::RunManifest m = spde::run(command, config, out);
        for (const auto& e : m.errors) {
            std::cerr << "spde: " << command << ": " << e << "\n";
        }
        std::cout << command << ": " << (m.pass ? "pass" : "FAIL") << " (" << out << ")\n";
        return m.pass ? 0 : 1;
    } catch (const spde::ConfigError& e) {
        std::cerr << "spde: config error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "spde: " << e.what() << "\n";
        return 2;
    }
}
