#include "topoembed/geo.hpp"

#include "topoembed/error.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <numbers>
#include <sstream>

namespace topoembed {

bool is_valid_coordinate(double lon, double lat) noexcept {
    return std::isfinite(lon) && std::isfinite(lat) && lon >= -180.0 && lon <= 180.0 && lat >= -90.0 &&
           lat <= 90.0;
}

GeoCoordinate make_coordinate(double lon, double lat) {
    if (!is_valid_coordinate(lon, lat)) {
        std::ostringstream msg;
        msg << "coordinate out of range: lon=" << lon << " lat=" << lat;
        fail(ErrorKind::Domain, msg.str());
    }
    return {lon, lat};
}

bool lon_lat_less(const GeoCoordinate& a, const GeoCoordinate& b) noexcept {
    if (a.lon != b.lon) {
        return a.lon < b.lon;
    }
    return a.lat < b.lat;
}

GeoCoordinate offset_by_meters(const GeoCoordinate& origin, double east_m, double north_m) {
    const double cos_lat = std::cos(origin.lat * std::numbers::pi / 180.0);
    return {origin.lon + east_m / (kMetersPerDegree * cos_lat), origin.lat + north_m / kMetersPerDegree};
}

double resolution_of(double radius_m, int half_extent_px) {
    if (!(radius_m > 0.0) || half_extent_px <= 0) {
        std::ostringstream msg;
        msg << "resolution_of requires positive arguments, got radius=" << radius_m
            << " half_extent=" << half_extent_px;
        fail(ErrorKind::Domain, msg.str());
    }
    return radius_m / half_extent_px;
}

ScaleSpec::ScaleSpec(double radius_m, int half_extent_px)
    : radius_m_(radius_m), half_extent_px_(half_extent_px),
      resolution_(resolution_of(radius_m, half_extent_px)) {}

ScaleSpec ScaleSpec::from_resolution(double resolution_m_per_px, int half_extent_px) {
    require(resolution_m_per_px > 0.0 && half_extent_px > 0, ErrorKind::Domain,
            "scale requires a positive resolution and half extent");
    // r = s * N, then s = r / N recovers the input exactly for power-of-two N.
    return ScaleSpec(resolution_m_per_px * half_extent_px, half_extent_px);
}

namespace {

BoundingBox compute_bounds(const std::vector<GeoCoordinate>& ring) {
    BoundingBox box{ring.front().lon, ring.front().lat, ring.front().lon, ring.front().lat};
    for (const auto& p : ring) {
        box.min_lon = std::min(box.min_lon, p.lon);
        box.max_lon = std::max(box.max_lon, p.lon);
        box.min_lat = std::min(box.min_lat, p.lat);
        box.max_lat = std::max(box.max_lat, p.lat);
    }
    return box;
}

double parse_number(std::string_view& s) {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) {
        s.remove_prefix(1);
    }
    double value = 0.0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
    if (ec != std::errc()) {
        fail(ErrorKind::Domain, "malformed WKT number near: " + std::string(s.substr(0, 20)));
    }
    s.remove_prefix(static_cast<std::size_t>(ptr - s.data()));
    return value;
}

} // namespace

AOIPolygon::AOIPolygon(std::vector<GeoCoordinate> ring) : ring_(std::move(ring)) {
    if (ring_.size() >= 2 && ring_.front() == ring_.back()) {
        ring_.pop_back();
    }
    require(ring_.size() >= 3, ErrorKind::Domain, "polygon needs at least 3 vertices");
    for (const auto& p : ring_) {
        make_coordinate(p.lon, p.lat);
    }
    bounds_ = compute_bounds(ring_);
}

AOIPolygon AOIPolygon::from_wkt(std::string_view wkt) {
    auto open = wkt.find("((");
    auto close = wkt.find("))");
    std::string head(wkt.substr(0, open == std::string_view::npos ? 0 : open));
    std::transform(head.begin(), head.end(), head.begin(), [](unsigned char c) { return std::toupper(c); });
    if (open == std::string_view::npos || close == std::string_view::npos || close < open ||
        head.find("POLYGON") == std::string::npos) {
        fail(ErrorKind::Domain, "expected WKT of the form POLYGON ((lon lat, ...))");
    }
    std::string_view body = wkt.substr(open + 2, close - open - 2);
    std::vector<GeoCoordinate> ring;
    while (true) {
        double lon = parse_number(body);
        double lat = parse_number(body);
        ring.push_back({lon, lat});
        while (!body.empty() && std::isspace(static_cast<unsigned char>(body.front()))) {
            body.remove_prefix(1);
        }
        if (body.empty()) {
            break;
        }
        if (body.front() != ',') {
            fail(ErrorKind::Domain, "malformed WKT ring separator");
        }
        body.remove_prefix(1);
    }
    return AOIPolygon(std::move(ring));
}

AOIPolygon AOIPolygon::from_bbox(const BoundingBox& box) {
    return AOIPolygon({{box.min_lon, box.max_lat},
                       {box.min_lon, box.min_lat},
                       {box.max_lon, box.min_lat},
                       {box.max_lon, box.max_lat}});
}

std::string AOIPolygon::to_wkt() const {
    std::ostringstream out;
    out.precision(17);
    out << "POLYGON ((";
    for (std::size_t i = 0; i <= ring_.size(); ++i) {
        const auto& p = ring_[i % ring_.size()];
        if (i > 0) {
            out << ", ";
        }
        out << p.lon << ' ' << p.lat;
    }
    out << "))";
    return out.str();
}

double AOIPolygon::area_deg2() const noexcept {
    double twice = 0.0;
    for (std::size_t i = 0, j = ring_.size() - 1; i < ring_.size(); j = i++) {
        twice += ring_[j].lon * ring_[i].lat - ring_[i].lon * ring_[j].lat;
    }
    return std::abs(twice) * 0.5;
}

bool AOIPolygon::contains(const GeoCoordinate& p) const noexcept {
    bool inside = false;
    for (std::size_t i = 0, j = ring_.size() - 1; i < ring_.size(); j = i++) {
        const auto& a = ring_[i];
        const auto& b = ring_[j];
        if ((a.lat > p.lat) != (b.lat > p.lat)) {
            double x = (b.lon - a.lon) * (p.lat - a.lat) / (b.lat - a.lat) + a.lon;
            if (p.lon < x) {
                inside = !inside;
            }
        }
    }
    return inside;
}

void AOIPolygon::check_non_degenerate() const {
    std::vector<GeoCoordinate> distinct;
    for (const auto& p : ring_) {
        if (std::find(distinct.begin(), distinct.end(), p) == distinct.end()) {
            distinct.push_back(p);
        }
    }
    if (distinct.size() < 3 || !(area_deg2() > 0.0)) {
        fail(ErrorKind::Domain, "degenerate polygon: " + to_wkt());
    }
}

AOIPolygon europe_train_polygon() {
    return AOIPolygon::from_wkt("POLYGON ((10 50, 10 45, 15 45, 15 50, 10 50))");
}

AOIPolygon europe_test_polygon() {
    return AOIPolygon::from_wkt("POLYGON ((5 45, 5 50, 10 50, 10 45, 5 45))");
}

} // namespace topoembed
