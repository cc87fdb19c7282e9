#pragma once

#include "topoembed/geo.hpp"

#include <cstdint>
#include <vector>

namespace topoembed {

/// Uniform (in lon/lat) points inside the polygon by bounding-box rejection.
/// Deterministic for a fixed seed. Throws Domain for degenerate polygons.
std::vector<GeoCoordinate> sample_coords_in_polygon(const AOIPolygon& polygon, std::size_t n, std::uint64_t seed);

} // namespace topoembed
