// qwitness: command-line driver (run, rates, validate)

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <iostream>
#include <string>
#include <vector>

#include "qwitness/cli/config.hpp"
#include "qwitness/cli/experiment.hpp"
#include "qwitness/parallel.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitNumerical = 3;

struct Args {
    std::string config;
    std::vector<std::string> overrides;
    int threads = 0;
    std::string out;
};

void add_common(CLI::App* cmd, Args& a, bool with_run_options) {
    cmd->add_option("config", a.config, "JSON configuration file")->required();
    cmd->add_option("--set", a.overrides, "override a config key, e.g. --set bath.alpha_exp=-0.5")
        ->type_name("KEY=VALUE");
    if (with_run_options) {
        cmd->add_option("--threads", a.threads, "worker thread cap (default: hardware concurrency)")
            ->check(CLI::PositiveNumber);
        cmd->add_option("--out", a.out, "output directory (overrides outputs.directory)");
    }
}

int execute(const std::string& command, const Args& a) {
    using namespace qwitness;
    try {
        cli::ExperimentConfig cfg = cli::load_config(a.config, a.overrides);
        if (!a.out.empty()) cfg.directory = a.out;
        if (command == "validate") {
            std::cout << cli::to_json(cfg).dump(2) << '\n';
            return kExitOk;
        }
        if (a.threads > 0) set_max_threads(static_cast<std::size_t>(a.threads));
        const auto mode = command == "rates" ? cli::RunMode::rates_only : cli::RunMode::full;
        const auto result = cli::run_experiment(cfg, cfg.directory, mode);
        spdlog::info("wrote {} files to {} in {:.2f} s", result.manifest["outputs"].size() + 1, cfg.directory,
                     result.manifest["wall_clock_seconds"].get<double>());
        return kExitOk;
    } catch (const ConfigError& e) {
        spdlog::error("config error: {}", e.what());
        return kExitConfig;
    } catch (const DomainError& e) {
        spdlog::error("invalid input: {}", e.what());
        return kExitConfig;
    } catch (const std::exception& e) {
        spdlog::error("numerical failure: {}", e.what());
        return kExitNumerical;
    }
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Two-time measurement witness for non-Markovian nonlinear damping"};
    app.require_subcommand(1);
    app.fallthrough();
    std::string level = "info";
    app.add_option("--log-level", level, "trace, debug, info, warn, error")
        ->check(CLI::IsMember({"trace", "debug", "info", "warn", "error", "off"}));

    Args run_args, rates_args, validate_args;
    auto* run = app.add_subcommand("run", "tabulate rates, sweep the witness and write CSV/SVG/manifest");
    add_common(run, run_args, true);
    auto* rates = app.add_subcommand("rates", "tabulate and write the decay rates only");
    add_common(rates, rates_args, true);
    auto* validate = app.add_subcommand("validate", "check a configuration and print it with defaults applied");
    add_common(validate, validate_args, false);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitConfig;
    }
    spdlog::set_default_logger(spdlog::stderr_color_mt("qwitness"));
    spdlog::set_level(spdlog::level::from_str(level));

    if (*run) return execute("run", run_args);
    if (*rates) return execute("rates", rates_args);
    return execute("validate", validate_args);
}
