// Copyright 2026 The msd-ctr Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace msd::io {

std::vector<std::string> split(std::string_view s, char delim);
std::string join(const std::vector<std::string>& parts, std::string_view delim);

/// Shortest-roundtrip-safe formatting ("%.17g").
std::string format_double(double v);

double parse_double(std::string_view s, std::string_view what);
std::uint64_t parse_u64(std::string_view s, std::string_view what);

std::string read_file(const std::filesystem::path& p);
/// Writes via a temporary sibling and rename, so readers never see a partial file.
void write_file(const std::filesystem::path& p, std::string_view contents);

/// Reads `p` line by line, checks that the first line equals `header`.
std::vector<std::string> read_lines_with_header(const std::filesystem::path& p,
                                                std::string_view header);

/// 64-bit FNV-1a; used for content hashes in manifests.
std::uint64_t fnv1a(std::string_view data, std::uint64_t seed = 0xcbf29ce484222325ULL);
std::string hex64(std::uint64_t v);

}  // namespace msd::io
