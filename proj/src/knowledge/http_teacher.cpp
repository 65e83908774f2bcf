// Copyright 2026 The msd-ctr Authors
// SPDX-License-Identifier: Apache-2.0

#include <cstdlib>

#include <httplib.h>

#include "msd/error.hpp"
#include "msd/io/text.hpp"
#include "msd/knowledge/teacher.hpp"

namespace msd::knowledge {

HttpTeacher::HttpTeacher(std::string url, std::string token) : token_(std::move(token)) {
    constexpr std::string_view scheme = "http://";
    if (url.rfind(scheme, 0) != 0)
        throw ConfigError("MSD_TEACHER_URL", "only http:// endpoints are supported: " + url);
    std::string rest = url.substr(scheme.size());
    const auto slash = rest.find('/');
    path_ = slash == std::string::npos ? "/" : rest.substr(slash);
    std::string authority = rest.substr(0, slash);
    const auto colon = authority.rfind(':');
    if (colon != std::string::npos) {
        port_ = static_cast<int>(io::parse_u64(authority.substr(colon + 1), "port"));
        authority.resize(colon);
    }
    if (authority.empty()) throw ConfigError("MSD_TEACHER_URL", "missing host in " + url);
    host_ = std::move(authority);
}

std::unique_ptr<HttpTeacher> HttpTeacher::from_env() {
    const char* url = std::getenv("MSD_TEACHER_URL");
    if (!url || !*url) return nullptr;
    const char* token = std::getenv("MSD_TEACHER_TOKEN");
    return std::make_unique<HttpTeacher>(url, token ? token : "");
}

std::string HttpTeacher::generate(const std::string& prompt) const {
    httplib::Client client(host_, port_);
    client.set_read_timeout(120, 0);
    httplib::Headers headers;
    if (!token_.empty()) headers.emplace("Authorization", "Bearer " + token_);
    auto res = client.Post(path_, headers, prompt, "text/plain");
    if (!res) throw Error("teacher request failed: " + httplib::to_string(res.error()));
    if (res->status != 200)
        throw Error("teacher returned HTTP " + std::to_string(res->status) + ": " + res->body);
    return res->body;
}

}  // namespace msd::knowledge
