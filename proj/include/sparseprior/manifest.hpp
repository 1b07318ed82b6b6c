#pragma once

#include <string>
#include <vector>

#include <json.hpp>

namespace sparseprior::manifest {

inline constexpr const char* tool_version = "0.1.0";

// FNV-1a 64 over the file bytes, hex-encoded.
std::string file_digest(const std::string& path);

// Write-then-rename so a manifest is either absent or complete.
void write_atomic(const std::string& path, const std::string& content);

struct RunManifest {
    std::string command;
    std::uint64_t seed = 0;
    nlohmann::ordered_json config;  // snapshot of whatever configured the run
    std::vector<std::pair<std::string, std::string>> inputs;  // path, digest (recorded up front)
    std::vector<std::string> outputs;

    void add_input(const std::string& path);
    void write(const std::string& path) const;
};

}  // namespace sparseprior::manifest
