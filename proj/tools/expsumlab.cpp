// expsumlab <command> --config <path> [--set key=value]... [--out dir] [--seed n] [--workers n]

#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include <expsumlab/cli.hpp>

namespace cli = esl::cli;

int main(int argc, char** argv) {
    CLI::App app{"Exponential sum and decoupling experiments"};
    app.require_subcommand(1);
    std::string config_path, out_dir;
    std::vector<std::string> sets;
    std::int64_t seed = -1;
    int workers = 0;
    bool quiet = false;
    for (const auto& name : cli::commands()) {
        auto* sub = app.add_subcommand(name);
        sub->add_option("--config", config_path, "JSON config file");
        sub->add_option("--set", sets, "override a config field, key=value (dotted keys for nested fields)");
        sub->add_option("--out", out_dir, "output directory");
        sub->add_option("--seed", seed, "seed");
        sub->add_option("--workers", workers, "worker threads");
        sub->add_flag("--quiet", quiet, "no assertion listing on stdout");
    }
    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }
    const std::string command = app.get_subcommands().front()->get_name();

    cli::json cfg;
    try {
        cli::json file = cli::json::object();
        if (!config_path.empty()) {
            std::ifstream in(config_path);
            if (!in) throw cli::ConfigError("cannot read config file " + config_path);
            file = cli::json::parse(in);
        }
        cfg = cli::merge_config(file);
        for (const auto& kv : sets) {
            const auto key = kv.substr(0, kv.find_first_of("=."));
            if (!cfg.contains(key)) throw cli::ConfigError("unknown config key '" + key + "'");
            cli::apply_override(cfg, kv);
        }
        if (seed >= 0) cfg["seed"] = seed;
        if (workers > 0) cfg["workers"] = workers;
        if (!out_dir.empty()) cfg["out"] = out_dir;
    } catch (const std::exception& e) {
        std::cerr << "expsumlab: invalid config: " << e.what() << "\n";
        return 2;
    }

    const auto result = cli::run(command, cfg);
    if (!result.diagnostics.empty()) std::cerr << "expsumlab: " << result.diagnostics << "\n";
    if (result.exit_code == 2 || result.exit_code == 3) return result.exit_code;
    if (!result.summary.is_null()) {
        try {
            cli::write_outputs(result, result.summary["config"]["out"].get<std::string>());
        } catch (const std::exception& e) {
            std::cerr << "expsumlab: cannot write outputs: " << e.what() << "\n";
            return 1;
        }
    }
    if (!quiet)
        for (const auto& a : result.assertions)
            std::cout << (a.pass ? "PASS " : "FAIL ") << a.name << ": " << cli::fmt(a.value) << " " << a.relation << " "
                      << cli::fmt(a.limit) << "\n";
    return result.exit_code;
}
