#include "topoembed/overpass.hpp"

#include "topoembed/error.hpp"
#include "topoembed/util.hpp"

#include "httplib.h"
#include "json.hpp"

#include <chrono>
#include <ctime>
#include <thread>

namespace topoembed {

namespace {

struct Url {
    std::string origin;  // scheme://host[:port]
    std::string path;
};

Url split_url(const std::string& url) {
    const auto scheme_end = url.find("://");
    require(scheme_end != std::string::npos, ErrorKind::Network, "malformed endpoint URL: " + url);
    const auto path_start = url.find('/', scheme_end + 3);
    if (path_start == std::string::npos) {
        return {url, "/"};
    }
    return {url.substr(0, path_start), url.substr(path_start)};
}

} // namespace

std::string today_utc() {
    const std::time_t now = std::time(nullptr);
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[16];
    std::strftime(buf, sizeof buf, "%Y-%m-%d", &tm);
    return buf;
}

OverpassClient::OverpassClient(OverpassOptions options) : options_(std::move(options)) {
    require(options_.max_retries >= 1, ErrorKind::Domain, "max_retries must be at least 1");
    if (options_.date.empty()) {
        options_.date = today_utc();
    }
}

std::string OverpassClient::build_query(const ClassTag& tag, const AOIPolygon& region) const {
    require(is_valid_selector(tag.osm_selector), ErrorKind::Domain, "invalid selector '" + tag.osm_selector + "'");
    const auto eq = tag.osm_selector.find('=');
    const std::string filter =
        "[\"" + tag.osm_selector.substr(0, eq) + "\"=\"" + tag.osm_selector.substr(eq + 1) + "\"]";
    std::string poly;
    for (const auto& v : region.vertices()) {
        if (!poly.empty()) {
            poly += ' ';
        }
        poly += format_double(v.lat) + " " + format_double(v.lon);
    }
    return "[out:json][timeout:" + std::to_string(options_.timeout_s) + "];(node" + filter + "(poly:\"" + poly +
           "\");way" + filter + "(poly:\"" + poly + "\"););out center;";
}

std::filesystem::path OverpassClient::cache_path(const ClassTag& tag, const AOIPolygon& region) const {
    const std::string key = tag.osm_selector + "|" + region.to_wkt() + "|" + options_.date;
    return options_.cache_dir / (hex64(fnv1a64(key)) + ".csv");
}

std::string OverpassClient::post(const std::string& query) {
    const Url url = split_url(options_.endpoint);
    httplib::Client client(url.origin);
    client.set_connection_timeout(std::chrono::seconds(std::min(options_.timeout_s, 30)));
    client.set_read_timeout(std::chrono::seconds(options_.timeout_s));
    client.set_follow_location(true);
    std::string last_error;
    for (int attempt = 1; attempt <= options_.max_retries; ++attempt) {
        last_attempts_ = attempt;
        auto res = client.Post(url.path, httplib::Params{{"data", query}});
        if (res && res->status == 200) {
            return res->body;
        }
        last_error = res ? "HTTP " + std::to_string(res->status) : httplib::to_string(res.error());
        if (attempt < options_.max_retries) {
            std::this_thread::sleep_for(std::chrono::milliseconds(200 * attempt));
        }
    }
    fail(ErrorKind::Network, "query endpoint " + options_.endpoint + " unreachable after " +
                                 std::to_string(options_.max_retries) + " attempts (" + last_error + ")");
}

std::vector<GeoCoordinate> OverpassClient::fetch(const ClassTag& tag, const AOIPolygon& region) {
    std::lock_guard lock(mutex_);
    last_attempts_ = 0;
    const auto path = cache_path(tag, region);
    if (std::filesystem::exists(path)) {
        std::vector<GeoCoordinate> out;
        for (const auto& e : read_coord_csv(path)) {
            out.push_back(e.coord);
        }
        return out;
    }
    auto coords = parse_overpass_json(post(build_query(tag, region)));
    std::filesystem::create_directories(options_.cache_dir);
    write_file_atomic(path, format_coord_csv(std::span<const GeoCoordinate>(coords)));
    return coords;
}

std::vector<GeoCoordinate> parse_overpass_json(std::string_view body) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(body);
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorKind::Network, std::string("malformed query response: ") + e.what());
    }
    std::vector<GeoCoordinate> out;
    if (!doc.contains("elements")) {
        return out;
    }
    for (const auto& el : doc.at("elements")) {
        const nlohmann::json* src = nullptr;
        if (el.contains("lat") && el.contains("lon")) {
            src = &el;
        } else if (el.contains("center")) {
            src = &el.at("center");
        }
        if (src == nullptr) {
            continue;
        }
        const double lon = src->at("lon").get<double>();
        const double lat = src->at("lat").get<double>();
        if (is_valid_coordinate(lon, lat)) {
            out.push_back({lon, lat});
        }
    }
    return out;
}

} // namespace topoembed
