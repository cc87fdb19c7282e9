#include "topoembed/sampling.hpp"

#include "topoembed/error.hpp"
#include "topoembed/util.hpp"

namespace topoembed {

std::vector<GeoCoordinate> sample_coords_in_polygon(const AOIPolygon& polygon, std::size_t n, std::uint64_t seed) {
    polygon.check_non_degenerate();
    std::vector<GeoCoordinate> out;
    out.reserve(n);
    auto rng = make_rng(seed, "polygon-sampling");
    const auto box = polygon.bounds();
    std::uniform_real_distribution<double> lon(box.min_lon, box.max_lon);
    std::uniform_real_distribution<double> lat(box.min_lat, box.max_lat);
    // Thin polygons inside a large box would spin forever; cap the attempts.
    const double fill = polygon.area_deg2() / box.area_deg2();
    const std::size_t max_attempts = static_cast<std::size_t>(static_cast<double>(n) / fill * 20.0) + 1000;
    std::size_t attempts = 0;
    while (out.size() < n) {
        require(++attempts <= max_attempts, ErrorKind::Domain, "polygon too thin to sample: " + polygon.to_wkt());
        GeoCoordinate p{lon(rng), lat(rng)};
        if (polygon.contains(p)) {
            out.push_back(p);
        }
    }
    return out;
}

} // namespace topoembed
