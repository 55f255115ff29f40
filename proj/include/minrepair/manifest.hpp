#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "minrepair/util.hpp"

namespace minrepair {

// Provenance record written next to every artifact a subcommand produces.
struct RunManifest {
    std::vector<std::string> command_line;
    ordered_json config = ordered_json::object();
    std::vector<std::filesystem::path> inputs;
    std::vector<std::filesystem::path> outputs;
    std::vector<std::uint64_t> seeds;
    std::chrono::system_clock::time_point started_at = std::chrono::system_clock::now();

    // config_hash, input/output SHA-256s, tool version, and both timestamps.
    std::string to_json() const;
    void write(const std::filesystem::path& path) const;
};

std::string tool_version();

}  // namespace minrepair
