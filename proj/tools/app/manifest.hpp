// Copyright 2026 The msd-ctr Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace msd::app {

/// FNV-1a of a file's bytes as 16 hex digits.
std::string file_hash(const std::filesystem::path& p);

struct StageRecord {
    std::string name;
    std::string config_hash;
    std::map<std::string, std::string> inputs;   // path relative to the out dir -> hash
    std::map<std::string, std::string> outputs;  // same
};

/// out/manifest.json: the stages that have run, in first-run order. A stage
/// is up to date when its config hash matches and every recorded input and
/// output file still has its recorded hash. Because inputs are upstream
/// outputs, a changed upstream artifact makes every consumer stale.
class Manifest {
public:
    explicit Manifest(std::filesystem::path out_dir);

    const std::filesystem::path& out_dir() const noexcept { return out_; }
    const std::vector<StageRecord>& stages() const noexcept { return stages_; }

    bool up_to_date(const std::string& stage, const std::string& config_hash,
                    const std::vector<std::string>& inputs) const;

    /// Hashes `inputs` and every file under `output_dirs` and records them,
    /// replacing an earlier record of the stage. Saves the manifest.
    void record(const std::string& stage, const std::string& config_hash,
                const std::vector<std::string>& inputs, const std::vector<std::string>& output_dirs);

    void save() const;

private:
    std::filesystem::path out_;
    std::vector<StageRecord> stages_;
};

/// Files under `dir` (relative to `root`, '/' separated), sorted.
std::vector<std::string> list_files(const std::filesystem::path& root, const std::string& dir);

}  // namespace msd::app
