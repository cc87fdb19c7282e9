#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace topoembed {

/// WGS84 longitude/latitude in decimal degrees.
struct GeoCoordinate {
    double lon = 0.0;
    double lat = 0.0;

    friend bool operator==(const GeoCoordinate&, const GeoCoordinate&) = default;
};

/// Throws ErrorKind::Domain when lon/lat fall outside [-180,180] x [-90,90].
GeoCoordinate make_coordinate(double lon, double lat);
bool is_valid_coordinate(double lon, double lat) noexcept;

/// Lexicographic (lon, lat) ordering used for deterministic output order.
bool lon_lat_less(const GeoCoordinate& a, const GeoCoordinate& b) noexcept;

// Meters per degree of latitude on the WGS84 mean sphere.
inline constexpr double kMetersPerDegree = 111319.49079327357;

/// Moves `origin` by east/north meters using a local equirectangular
/// approximation (longitude scaled by cos(lat) at the origin).
GeoCoordinate offset_by_meters(const GeoCoordinate& origin, double east_m, double north_m);

/// Meters/pixel from patch radius and center-to-edge pixel count.
double resolution_of(double radius_m, int half_extent_px);

/// Radius r, half extent N and resolution s tied by s = r / N.
class ScaleSpec {
public:
    ScaleSpec(double radius_m, int half_extent_px);

    static ScaleSpec from_resolution(double resolution_m_per_px, int half_extent_px = 8);

    double radius_m() const noexcept { return radius_m_; }
    int half_extent_px() const noexcept { return half_extent_px_; }
    double resolution() const noexcept { return resolution_; }
    int side() const noexcept { return 2 * half_extent_px_ + 1; }

    friend bool operator==(const ScaleSpec&, const ScaleSpec&) = default;

private:
    double radius_m_;
    int half_extent_px_;
    double resolution_;
};

struct BoundingBox {
    double min_lon = 0.0;
    double min_lat = 0.0;
    double max_lon = 0.0;
    double max_lat = 0.0;

    double area_deg2() const noexcept { return (max_lon - min_lon) * (max_lat - min_lat); }
};

/// Simple polygon ring. The stored ring is open (no repeated closing vertex);
/// WKT output closes it.
class AOIPolygon {
public:
    explicit AOIPolygon(std::vector<GeoCoordinate> ring);

    static AOIPolygon from_wkt(std::string_view wkt);
    static AOIPolygon from_bbox(const BoundingBox& box);

    std::string to_wkt() const;

    const std::vector<GeoCoordinate>& vertices() const noexcept { return ring_; }
    BoundingBox bounds() const noexcept { return bounds_; }
    double area_deg2() const noexcept;

    /// Crossing-number test. Points on a shared edge belong to exactly one of
    /// two adjacent polygons.
    bool contains(const GeoCoordinate& p) const noexcept;

    /// Throws ErrorKind::Domain for rings with fewer than three distinct
    /// vertices or zero area.
    void check_non_degenerate() const;

private:
    std::vector<GeoCoordinate> ring_;
    BoundingBox bounds_;
};

/// Geographic train/test split polygons used by the experiments.
AOIPolygon europe_train_polygon();
AOIPolygon europe_test_polygon();

} // namespace topoembed
