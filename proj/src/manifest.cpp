#include "minrepair/manifest.hpp"

#include <ctime>

#include "minrepair/error.hpp"

namespace minrepair {

namespace {

std::string iso_utc(std::chrono::system_clock::time_point tp) {
    const auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(tp.time_since_epoch()).count();
    const std::time_t secs = static_cast<std::time_t>(ms / 1000);
    std::tm tm{};
    ::gmtime_r(&secs, &tm);
    char buf[40];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%S", &tm);
    char out[48];
    std::snprintf(out, sizeof out, "%s.%03dZ", buf, static_cast<int>(ms % 1000));
    return out;
}

ordered_json hash_files(const std::vector<std::filesystem::path>& paths) {
    ordered_json out = ordered_json::array();
    for (const auto& p : paths) {
        ordered_json entry;
        entry["path"] = p.string();
        std::error_code ec;
        if (std::filesystem::is_regular_file(p, ec)) {
            entry["sha256"] = sha256_hex(read_file(p));
        } else {
            entry["sha256"] = nullptr;
        }
        out.push_back(entry);
    }
    return out;
}

}  // namespace

std::string tool_version() {
#ifdef MINREPAIR_VERSION
    return MINREPAIR_VERSION;
#else
    return "unknown";
#endif
}

std::string RunManifest::to_json() const {
    ordered_json j;
    j["tool_version"] = tool_version();
    j["command_line"] = command_line;
    j["config"] = config;
    j["config_hash"] = sha256_hex(config.dump());
    j["seeds"] = seeds;
    j["inputs"] = hash_files(inputs);
    j["outputs"] = hash_files(outputs);
    j["started_at"] = iso_utc(started_at);
    j["finished_at"] = iso_utc(std::chrono::system_clock::now());
    return j.dump(2) + "\n";
}

void RunManifest::write(const std::filesystem::path& path) const { write_file(path, to_json()); }

}  // namespace minrepair
