// Command-line front end: generate, run, score, fit, report, verify.

#include <CLI11.hpp>

#include <iostream>

#include "lidbench/error.hpp"
#include "lidbench/pipeline.hpp"

using namespace lidbench;

int main(int argc, char** argv) {
    CLI::App app{"Lost-in-distance graph benchmark harness"};
    app.set_version_flag("--version", std::string(kToolVersion));
    app.require_subcommand(1);

    std::string run_dir = ".";
    std::string config_path;
    app.add_option("--run-dir", run_dir, "Run directory holding every artifact")->capture_default_str();

    auto* generate = app.add_subcommand("generate", "Sample task corpora from a config file");
    generate->add_option("config", config_path, "JSON configuration file")->required()->check(CLI::ExistingFile);
    auto* run = app.add_subcommand("run", "Query the configured backend for every corpus instance");
    auto* score = app.add_subcommand("score", "Parse responses and aggregate accuracy cells");
    auto* fit = app.add_subcommand("fit", "Fit the position-only and distance models");
    auto* report = app.add_subcommand("report", "Write tables, charts and the run summary");
    auto* verify = app.add_subcommand("verify", "Check every artifact against the manifest");

    CLI11_PARSE(app, argc, argv);

    Pipeline pipeline(run_dir);
    try {
        if (generate->parsed()) {
            pipeline.generate(load_config(config_path));
            std::cout << "corpora written to " << (pipeline.dir() / "corpus").string() << "\n";
        } else if (run->parsed()) {
            const auto stats = pipeline.run();
            std::cout << "requests: " << stats.requests << ", cache hits: " << stats.cache_hits << "\n";
        } else if (score->parsed()) {
            pipeline.score();
            std::cout << "cells written to " << (pipeline.dir() / "scores" / "cells.csv").string() << "\n";
        } else if (fit->parsed()) {
            for (const auto& f : pipeline.fit()) {
                std::cout << to_string(f.encoding) << ": gamma " << f.gamma_hat << ", test RMSE position-only "
                          << f.rmse_test_middle_only << ", with distance " << f.rmse_test_distance
                          << " (noise floor " << f.noise_floor << ")\n";
            }
        } else if (report->parsed()) {
            pipeline.report();
            std::cout << "report written to " << (pipeline.dir() / "report").string() << "\n";
        } else if (verify->parsed()) {
            const auto problems = pipeline.verify();
            for (const auto& p : problems) {
                std::cerr << p.path << ": " << (p.actual.empty() ? "missing" : "hash mismatch") << "\n";
            }
            if (!problems.empty()) return 2;
            std::cout << "all artifacts match the manifest\n";
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return exit_code_for(e);
    }
    return 0;
}
