#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace topoembed {

/// Provenance record written next to every CLI output.
struct RunManifest {
    std::string subcommand;
    std::map<std::string, std::string> config;  // resolved option values
    std::map<std::string, std::string> inputs;  // path -> content hash
    std::vector<std::string> outputs;
    std::uint64_t seed = 0;
    std::string timestamp;  // UTC, ISO 8601

    void add_input(const std::filesystem::path& path);
    std::string to_json() const;
    /// Writes atomically; fills the timestamp when empty.
    void write(const std::filesystem::path& path);
};

std::string utc_timestamp();

/// `<prefix>.manifest.json`
std::filesystem::path manifest_path_for(const std::filesystem::path& output);

} // namespace topoembed
