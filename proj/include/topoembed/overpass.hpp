#pragma once

#include "topoembed/geo.hpp"
#include "topoembed/labels.hpp"

#include <filesystem>
#include <mutex>
#include <string>
#include <vector>

namespace topoembed {

struct OverpassOptions {
    std::string endpoint = "https://overpass-api.de/api/interpreter";
    std::filesystem::path cache_dir = ".overpass-cache";
    int max_retries = 3;
    int timeout_s = 90;
    /// Query date recorded in the cache key, YYYY-MM-DD; empty means today (UTC).
    std::string date;
};

/// Point features (nodes, and way centers) for one tag over a polygon.
/// Responses are cached on disk as coordinate CSV keyed by
/// (selector, region, date); a cache hit never touches the network.
class OverpassClient {
public:
    explicit OverpassClient(OverpassOptions options);

    /// Throws Network after max_retries failed attempts.
    std::vector<GeoCoordinate> fetch(const ClassTag& tag, const AOIPolygon& region);

    std::string build_query(const ClassTag& tag, const AOIPolygon& region) const;
    std::filesystem::path cache_path(const ClassTag& tag, const AOIPolygon& region) const;
    const OverpassOptions& options() const noexcept { return options_; }
    /// HTTP attempts made by the most recent fetch (0 on a cache hit).
    int last_attempts() const noexcept { return last_attempts_; }

private:
    std::string post(const std::string& query);

    OverpassOptions options_;
    std::mutex mutex_;
    int last_attempts_ = 0;
};

/// Extracts lon/lat from an Overpass JSON body (`lat`/`lon` or `center`).
std::vector<GeoCoordinate> parse_overpass_json(std::string_view body);

std::string today_utc();

} // namespace topoembed
