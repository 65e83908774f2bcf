// Copyright 2026 The msd-ctr Authors
// SPDX-License-Identifier: Apache-2.0

#include "manifest.hpp"

#include <algorithm>

#include "json.hpp"
#include "msd/error.hpp"
#include "msd/io/text.hpp"

namespace msd::app {

namespace fs = std::filesystem;
using nlohmann::json;

std::string file_hash(const fs::path& p) { return io::hex64(io::fnv1a(io::read_file(p))); }

std::vector<std::string> list_files(const fs::path& root, const std::string& dir) {
    std::vector<std::string> out;
    const fs::path base = root / dir;
    if (!fs::exists(base)) return out;
    if (fs::is_regular_file(base)) return {dir};
    for (const auto& e : fs::recursive_directory_iterator(base))
        if (e.is_regular_file()) out.push_back(fs::relative(e.path(), root).generic_string());
    std::sort(out.begin(), out.end());
    return out;
}

Manifest::Manifest(fs::path out_dir) : out_(std::move(out_dir)) {
    const fs::path p = out_ / "manifest.json";
    if (!fs::exists(p)) return;
    json j;
    try {
        j = json::parse(io::read_file(p));
        for (const auto& s : j.at("stages")) {
            StageRecord r;
            r.name = s.at("name").get<std::string>();
            r.config_hash = s.at("config_hash").get<std::string>();
            r.inputs = s.at("inputs").get<std::map<std::string, std::string>>();
            r.outputs = s.at("outputs").get<std::map<std::string, std::string>>();
            stages_.push_back(std::move(r));
        }
    } catch (const json::exception& e) {
        // An unreadable manifest only costs a rerun.
        stages_.clear();
    }
}

bool Manifest::up_to_date(const std::string& stage, const std::string& config_hash,
                          const std::vector<std::string>& inputs) const {
    auto it = std::find_if(stages_.begin(), stages_.end(), [&](const StageRecord& r) { return r.name == stage; });
    if (it == stages_.end() || it->config_hash != config_hash || it->outputs.empty()) return false;
    if (it->inputs.size() != inputs.size()) return false;
    auto matches = [&](const std::map<std::string, std::string>& files) {
        for (const auto& [rel, hash] : files) {
            const fs::path p = out_ / rel;
            if (!fs::exists(p) || file_hash(p) != hash) return false;
        }
        return true;
    };
    for (const auto& in : inputs)
        if (!it->inputs.count(in)) return false;
    return matches(it->inputs) && matches(it->outputs);
}

void Manifest::record(const std::string& stage, const std::string& config_hash,
                      const std::vector<std::string>& inputs, const std::vector<std::string>& output_dirs) {
    StageRecord r;
    r.name = stage;
    r.config_hash = config_hash;
    for (const auto& in : inputs) r.inputs[in] = file_hash(out_ / in);
    for (const auto& dir : output_dirs)
        for (const auto& f : list_files(out_, dir)) r.outputs[f] = file_hash(out_ / f);
    auto it = std::find_if(stages_.begin(), stages_.end(), [&](const StageRecord& s) { return s.name == stage; });
    if (it == stages_.end())
        stages_.push_back(std::move(r));
    else
        *it = std::move(r);
    save();
}

void Manifest::save() const {
    json stages = json::array();
    for (const auto& r : stages_)
        stages.push_back({{"name", r.name}, {"config_hash", r.config_hash}, {"inputs", r.inputs}, {"outputs", r.outputs}});
    io::write_file(out_ / "manifest.json", json{{"stages", stages}}.dump(2) + "\n");
}

}  // namespace msd::app
