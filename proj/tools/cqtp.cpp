#include "cqtp/cli.hpp"

#include <iostream>
#include <string>
#include <vector>

int main(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    if (!args.empty() && (args[0] == "-h" || args[0] == "--help")) {
        CLI::App app{"Cavity-QED teleportation simulator"};
        cqtp::cli::RawOptions raw;
        cqtp::cli::add_options(app, raw);
        std::cout << app.help();
        return 0;
    }
    cqtp::cli::RunConfig cfg;
    try {
        cfg = cqtp::cli::parse_config(args);
    } catch (const cqtp::cli::UsageError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return cqtp::cli::exit_code::usage;
    }
    return cqtp::cli::run_scenario(cfg, std::cerr);
}
