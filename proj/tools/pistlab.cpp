#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "pistlab/cli.hpp"

int main(int argc, char** argv) {
    CLI::App app{"pistlab: partially integrable Hamiltonian systems laboratory"};
    std::string command;
    std::string config_path;
    std::optional<std::string> out_dir;
    std::optional<std::uint64_t> seed;
    app.add_option("command", command, "check | integrate | freqmap | sieve | measure | persist")
        ->required()
        ->check(CLI::IsMember(pistlab::command_names()));
    app.add_option("--config", config_path, "JSON run configuration")->required();
    app.add_option("--out", out_dir, "output directory (overrides output.directory)");
    app.add_option("--seed", seed, "seed for stochastic operations (overrides experiment.seed)");
    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 1;
    }

    try {
        pistlab::RunConfig cfg = pistlab::load_config(config_path);
        if (seed) cfg.experiment.seed = *seed;
        const std::string dir = out_dir.value_or(cfg.output.directory);
        const auto result = pistlab::dispatch(command, cfg, dir);
        for (const auto& f : result.files) std::cout << dir << "/" << f.file_name << "  " << f.sha256 << "\n";
        std::cout << dir << "/" << result.manifest << "\n";
        return 0;
    } catch (const pistlab::Error& e) {
        std::cerr << "error: " << e.code() << ": " << e.what() << "\n";
        return pistlab::exit_code_for(e);
    } catch (const std::exception& e) {
        std::cerr << "error: InternalError: " << e.what() << "\n";
        return 2;
    }
}
