// Copyright 2026 The msd-ctr Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "config.hpp"
#include "manifest.hpp"

namespace msd::app {

/// Structured log lines on stderr: "stage=<name> key=value ...".
void set_logging(bool enabled);
void log(const std::string& stage, const std::vector<std::pair<std::string, std::string>>& kv);

/// "key=value" lines; later duplicates win. Blank lines are skipped.
std::map<std::string, std::string> read_key_values(const std::filesystem::path& p);

struct CorrelationPoint {
    std::size_t step = 0;
    double f1 = 0.0;
    double auc = 0.0;
};

struct CorrelationResult {
    std::vector<CorrelationPoint> points;  // sorted by F1, ties by step
    std::optional<double> rho;             // nullopt when undefined
};

/// Sorts the points and computes Spearman's rho between F1 and AUC.
CorrelationResult correlate(std::vector<CorrelationPoint> points);
std::string correlation_tsv(const CorrelationResult& r);
std::string correlation_summary(const CorrelationResult& r);

/// serving/events.tsv: one line per request, "item_id TAB source TAB evicted"
/// (evicted empty when nothing was evicted).
void write_events(const std::filesystem::path& p, const std::vector<serving::ServeEvent>& events);
std::vector<serving::ServeEvent> read_events(const std::filesystem::path& p);

/// Runs stages into `out`, each after its prerequisites. A stage whose
/// config sections, inputs and outputs match the manifest is skipped.
///
/// Layout: corpus/, knowledge/, student/, ctr/{full,id_only}/, eval/,
/// ablation/, correlation/, serving/, plus config.json and manifest.json.
class Pipeline {
public:
    Pipeline(RunConfig cfg, std::filesystem::path out);

    const RunConfig& config() const noexcept { return cfg_; }
    const std::filesystem::path& out() const noexcept { return out_; }

    void gen();
    void knowledge();
    void distill();
    void train();
    void eval();
    void ablate();
    void correlation();
    void serve_replay();
    /// Every stage above, in order.
    void run_all();

    std::size_t executed() const noexcept { return executed_; }
    std::size_t skipped() const noexcept { return skipped_; }

private:
    struct StageSpec {
        std::string name;
        std::vector<std::string> sections;
        std::vector<std::string> input_dirs;
        std::vector<std::string> output_dirs;
    };
    void run_stage(const StageSpec& spec, const std::function<void()>& body);

    RunConfig cfg_;
    std::filesystem::path out_;
    Manifest manifest_;
    std::map<std::string, bool> done_;  // stages settled during this process
    std::size_t executed_ = 0;
    std::size_t skipped_ = 0;
};

}  // namespace msd::app
