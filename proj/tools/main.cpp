// Copyright 2026 The msd-ctr Authors
// SPDX-License-Identifier: Apache-2.0

// msd: runs the pipeline stages from the command line.
//
// Exit codes: 0 success, 1 invalid configuration or missing inputs,
// 2 any other failure.

#include <cstdio>
#include <exception>
#include <functional>
#include <map>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "app/config.hpp"
#include "app/stages.hpp"
#include "msd/error.hpp"

namespace {

struct Flags {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::string out = "out";
    std::string profile;
    bool quiet = false;
};

int run(const Flags& f, const std::function<void(msd::app::Pipeline&)>& body) {
    try {
        msd::app::set_logging(!f.quiet);
        msd::app::RunConfig cfg = f.config.empty()
                                      ? msd::app::profile_config(f.profile.empty() ? "desk" : f.profile)
                                      : msd::app::load_config(f.config, f.profile);
        if (f.seed) cfg.seed = *f.seed;
        msd::app::Pipeline p(cfg, f.out);
        body(p);
        msd::app::log("run", {{"status", "ok"},
                              {"executed", std::to_string(p.executed())},
                              {"skipped", std::to_string(p.skipped())}});
        return 0;
    } catch (const msd::ConfigError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Semantic-feature CTR pipeline: corpus, distillation, CTR training, ablations, serving"};
    app.require_subcommand(1);
    app.fallthrough();  // global flags may follow the subcommand
    Flags flags;
    app.add_option("--config", flags.config, "JSON config file")->check(CLI::ExistingFile);
    app.add_option("--seed", flags.seed, "Run seed (overrides the config file)");
    app.add_option("--out", flags.out, "Output directory")->capture_default_str();
    app.add_option("--profile", flags.profile, "Base profile")->check(CLI::IsMember({"tiny", "desk", "stress"}));
    app.add_flag("-q,--quiet", flags.quiet, "No log lines on stderr");

    using Stage = void (msd::app::Pipeline::*)();
    const std::map<std::string, std::pair<Stage, std::string>> commands = {
        {"gen", {&msd::app::Pipeline::gen, "Generate the synthetic corpus"}},
        {"knowledge", {&msd::app::Pipeline::knowledge, "Sample subjects and collect teacher records"}},
        {"distill", {&msd::app::Pipeline::distill, "Train the student on teacher records"}},
        {"train", {&msd::app::Pipeline::train, "Train the full and id-only CTR models"}},
        {"eval", {&msd::app::Pipeline::eval, "Test-split AUC and RelaImpr of full over id_only"}},
        {"ablate", {&msd::app::Pipeline::ablate, "All variants over n_seeds seeds"}},
        {"correlation", {&msd::app::Pipeline::correlation, "Phrase F1 against CTR AUC across checkpoints"}},
        {"serve-replay", {&msd::app::Pipeline::serve_replay, "Replay a request trace through the embedding tiers"}},
        {"pipeline", {&msd::app::Pipeline::run_all, "Every stage"}},
    };
    std::string chosen;
    for (const auto& [name, cmd] : commands)
        app.add_subcommand(name, cmd.second)->callback([&chosen, name = name] { chosen = name; });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }
    const Stage stage = commands.at(chosen).first;
    return run(flags, [stage](msd::app::Pipeline& p) { (p.*stage)(); });
}
