// gexp: run one experiment from a config file.
//
//   gexp eval --config square.cfg --out results/
//
// Outputs land in --out; a run record (config hash, outputs, wall time) is
// printed to stdout and never written to the output directory, so the files
// themselves are byte-reproducible.

#include <chrono>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "gexp/cli/commands.hpp"

namespace {

struct Options {
    std::string config;
    std::string out = ".";
};

int run(const std::string& command, const Options& opt) {
    using namespace gexp::cli;
    std::ifstream in(opt.config, std::ios::binary);
    if (!in) {
        std::cerr << "error: cannot read config file '" << opt.config << "'\n";
        return kConfigError;
    }
    std::ostringstream text;
    text << in.rdbuf();

    const auto start = std::chrono::steady_clock::now();
    const auto result = run_command(command, text.str(), opt.out, std::cout, std::cerr);
    const std::chrono::duration<double> wall = std::chrono::steady_clock::now() - start;

    Json record{{"command", command},
                {"config_hash", config_hash(text.str())},
                {"status", result.status},
                {"exit_code", result.exit_code},
                {"outputs", result.outputs},
                {"wall_time_s", wall.count()},
                {"version", kVersion}};
    std::cout << record.dump() << "\n";
    return result.exit_code;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Nonlinear expectation experiments"};
    app.set_version_flag("--version", std::string(gexp::cli::kVersion));
    app.require_subcommand(1);

    Options opt;
    const std::pair<const char*, const char*> subs[] = {
        {"eval", "value of E~[phi(B_T)] from the generator PDE"},
        {"repr", "scenario representation against the PDE value"},
        {"lq", "solve the linear-quadratic problem"},
        {"mp", "maximum-principle diagnostics for the LQ solution"},
    };
    for (const auto& [name, help] : subs) {
        auto* sub = app.add_subcommand(name, help);
        sub->add_option("-c,--config", opt.config, "experiment config file")->required();
        sub->add_option("-o,--out", opt.out, "output directory")->capture_default_str();
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : gexp::cli::kConfigError;
    }
    return run(app.get_subcommands().front()->get_name(), opt);
}
