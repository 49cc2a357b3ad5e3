// TETRA SDS peak-age simulator CLI: validate / sweep / run.

#include <fstream>
#include <iostream>
#include <memory>
#include <string>

#include <CLI11.hpp>

#include "tetrasim/cli.hpp"

using namespace tetrasim;

namespace {

std::unique_ptr<std::ofstream> open_out(const std::string& path) {
    if (path.empty()) return nullptr;
    auto os = std::make_unique<std::ofstream>(path, std::ios::binary);
    if (!*os) throw scenario::ConfigError("out: cannot open '" + path + "'");
    return os;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Peak-AoI evaluation of TETRA SDS links (TMO and DMO topologies)"};
    app.require_subcommand(1);

    std::string config_path, out_path;
    std::uint64_t seed = 0;
    bool seed_given = false;
    std::uint64_t deliveries = 1'000'000;
    int replications = 0;
    bool trace = false;

    auto add_common = [&](CLI::App* cmd, bool needs_config) {
        auto* copt = cmd->add_option("--config", config_path, "JSON configuration file");
        if (needs_config) copt->required();
        cmd->add_option("--seed", seed, "master seed override")
            ->each([&](const std::string&) { seed_given = true; });
        cmd->add_option("--out", out_path, "output file (CSV)");
    };

    auto* validate = app.add_subcommand(
        "validate", "compare closed-form PAoI with abstract-model simulation");
    add_common(validate, false);
    validate->add_option("--deliveries", deliveries, "deliveries per grid point");

    auto* sweep = app.add_subcommand("sweep", "run the sweep block of a configuration");
    add_common(sweep, true);
    sweep->add_option("--replications", replications, "override sweep.replications");

    auto* run = app.add_subcommand("run", "single simulation run");
    add_common(run, true);
    run->add_flag("--trace", trace, "write an event trace next to the output");

    CLI11_PARSE(app, argc, argv);

    try {
        if (app.got_subcommand(validate)) {
            cli::ValidateOptions opt;
            opt.deliveries = deliveries;
            if (seed_given) opt.seed = seed;
            auto csv = open_out(out_path);
            return cli::cmd_validate(opt, std::cout, csv.get());
        }

        auto parsed = config::load_config_file(config_path);
        if (seed_given) parsed.scenario.seed = seed;

        if (app.got_subcommand(sweep)) {
            if (replications > 0) {
                if (!parsed.sweep) throw scenario::ConfigError("sweep: block required");
                parsed.sweep->replications = replications;
            }
            auto csv = open_out(out_path);
            return cli::cmd_sweep(parsed, csv ? *csv : std::cout);
        }

        // run
        auto csv = open_out(out_path);
        std::unique_ptr<std::ofstream> trace_os;
        if (trace) {
            std::string tpath = (out_path.empty() ? std::string("run") : out_path) + ".trace";
            trace_os = std::make_unique<std::ofstream>(tpath, std::ios::binary);
            if (!*trace_os) throw scenario::ConfigError("trace: cannot open '" + tpath + "'");
        }
        return cli::cmd_run(parsed.scenario, std::cout, csv.get(), trace_os.get());
    } catch (const scenario::ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return cli::kExitConfig;
    } catch (const ParamError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return cli::kExitConfig;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return cli::kExitFail;
    }
}
