#include "sparseprior/manifest.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "sparseprior/rng.hpp"

namespace sparseprior::manifest {

std::string file_digest(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot digest " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    const std::string data = ss.str();
    char buf[24];
    std::snprintf(buf, sizeof(buf), "%016llx",
                  static_cast<unsigned long long>(fnv1a64(data)));
    return buf;
}

void write_atomic(const std::string& path, const std::string& content) {
    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("cannot write " + tmp);
        out << content;
    }
    std::filesystem::rename(tmp, path);
}

void RunManifest::add_input(const std::string& path) {
    inputs.emplace_back(path, file_digest(path));
}

void RunManifest::write(const std::string& path) const {
    nlohmann::ordered_json j;
    j["tool"] = "sparseprior";
    j["version"] = tool_version;
    j["command"] = command;
    j["seed"] = seed;
    j["config"] = config;
    auto in = nlohmann::ordered_json::array();
    for (const auto& [p, d] : inputs) in.push_back({{"path", p}, {"digest", d}});
    j["inputs"] = in;
    j["outputs"] = outputs;
    write_atomic(path, j.dump(2) + "\n");
}

}  // namespace sparseprior::manifest
