// jscc-sim: experiment CLI for the OFDM feature-transmission simulator.
//
//   jscc-sim <papr|correlation|precode|e2e|schedule|stream>
//            --config <file.json> [--out <dir>] [--seed <n>]
//
// Outputs are CSV and key/value text artifacts stamped with the config hash;
// identical (config, seed) pairs reproduce byte-identical files.

#include <CLI11.hpp>
#include <json.hpp>

#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "jscc/experiment.hpp"

namespace {

struct SubArgs {
    std::string config_path;
    std::string out_dir = "out";
    std::uint64_t seed = 0;
    CLI::App* cmd = nullptr;
};

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"OFDM feature-transmission experiment runner"};
    app.require_subcommand(1);

    const std::pair<const char*, const char*> kinds[] = {
        {"papr", "PAPR CDFs with/without precoding and clip activation"},
        {"correlation", "feature and subcarrier-symbol correlation matrices"},
        {"precode", "optimize and persist a precoding matrix"},
        {"e2e", "full transmit/receive chain over an SNR sweep"},
        {"schedule", "latency-budget tables: max feature length and retained channels"},
        {"stream", "dual-worker streaming pipeline timing"},
    };
    std::vector<SubArgs> args(std::size(kinds));
    for (std::size_t i = 0; i < std::size(kinds); ++i) {
        CLI::App* sub = app.add_subcommand(kinds[i].first, kinds[i].second);
        sub->add_option("--config", args[i].config_path, "experiment config (JSON)")
            ->required()
            ->check(CLI::ExistingFile);
        sub->add_option("--out", args[i].out_dir, "output directory");
        sub->add_option("--seed", args[i].seed, "override the config seed");
        args[i].cmd = sub;
    }

    CLI11_PARSE(app, argc, argv);

    for (std::size_t i = 0; i < std::size(kinds); ++i) {
        if (!args[i].cmd->parsed()) continue;
        try {
            std::ifstream in(args[i].config_path);
            nlohmann::json config = nlohmann::json::parse(in);
            std::optional<std::uint64_t> seed;
            if (args[i].cmd->count("--seed") > 0) seed = args[i].seed;
            jscc::MetricsReport report =
                jscc::run_experiment(kinds[i].first, config, args[i].out_dir, seed);
            std::cout << report.to_text();
            return 0;
        } catch (const std::exception& e) {
            std::cerr << "error: " << e.what() << "\n";
            return 1;
        }
    }
    return 1;
}
