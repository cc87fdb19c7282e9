#include "topoembed/manifest.hpp"

#include "topoembed/util.hpp"

#include "json.hpp"

#include <ctime>

namespace topoembed {

std::string utc_timestamp() {
    const std::time_t now = std::time(nullptr);
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

void RunManifest::add_input(const std::filesystem::path& path) { inputs[path.string()] = file_hash(path); }

std::string RunManifest::to_json() const {
    nlohmann::ordered_json doc;
    doc["subcommand"] = subcommand;
    doc["seed"] = seed;
    doc["timestamp"] = timestamp;
    doc["config"] = config;
    doc["inputs"] = inputs;
    doc["outputs"] = outputs;
    return doc.dump(2) + "\n";
}

void RunManifest::write(const std::filesystem::path& path) {
    if (timestamp.empty()) {
        timestamp = utc_timestamp();
    }
    write_file_atomic(path, to_json());
}

std::filesystem::path manifest_path_for(const std::filesystem::path& output) {
    auto p = output;
    p += ".manifest.json";
    return p;
}

} // namespace topoembed
