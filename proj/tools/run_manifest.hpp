#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "json.hpp"

namespace rfod::cli {

inline constexpr int kRunManifestVersion = 1;

/// One record per CLI run: what was run, on which inputs, producing what.
struct RunManifest {
    std::string command;
    std::vector<std::string> argv;
    nlohmann::json config = nlohmann::json::object();
    std::uint64_t seed = 0;
    std::map<std::string, std::string> input_digests;  // path -> sha256 hex
    std::vector<std::string> outputs;
    nlohmann::json timings = nlohmann::json::object();

    void add_input(const std::filesystem::path& path);
    /// Digest over every regular file in a directory, in name order.
    void add_input_dir(const std::filesystem::path& dir);

    nlohmann::json to_json() const;
    void write(const std::filesystem::path& path) const;
};

std::string sha256_file(const std::filesystem::path& path);
std::string sha256_hex(std::string_view bytes);

}  // namespace rfod::cli
