#include "topoembed/patch.hpp"

#include "topoembed/error.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

namespace topoembed {

namespace {

// Fills `out` with samples at the given east/north offset lattice. Offsets are
// converted with a single cos(lat) at the center.
ElevationRaster::SampleStatus sample_lattice(const ElevationRaster& raster, const GeoCoordinate& center, int side,
                                             double first_east, double first_north, double step,
                                             std::vector<double>& out) {
    const double cos_lat = std::cos(center.lat * std::numbers::pi / 180.0);
    const double deg_per_m_lon = 1.0 / (kMetersPerDegree * cos_lat);
    const double deg_per_m_lat = 1.0 / kMetersPerDegree;
    out.resize(static_cast<std::size_t>(side) * side);
    for (int i = 0; i < side; ++i) {
        const double north = first_north - i * step;
        for (int j = 0; j < side; ++j) {
            const double east = first_east + j * step;
            GeoCoordinate p{center.lon + east * deg_per_m_lon, center.lat + north * deg_per_m_lat};
            double v = 0.0;
            auto status = raster.try_sample(p, v);
            if (status != ElevationRaster::SampleStatus::Ok) {
                return status;
            }
            out[static_cast<std::size_t>(i) * side + j] = v;
        }
    }
    return ElevationRaster::SampleStatus::Ok;
}

} // namespace

std::optional<ElevationPatch> try_extract_patch(const ElevationRaster& raster, const GeoCoordinate& center,
                                                const ScaleSpec& scale, ElevationRaster::SampleStatus* status) {
    ElevationPatch patch{scale.side(), {}, center, scale};
    const int n = scale.half_extent_px();
    const double s = scale.resolution();
    auto st = sample_lattice(raster, center, scale.side(), -n * s, n * s, s, patch.values);
    if (status != nullptr) {
        *status = st;
    }
    if (st != ElevationRaster::SampleStatus::Ok) {
        return std::nullopt;
    }
    return patch;
}

ElevationPatch extract_patch(const ElevationRaster& raster, const GeoCoordinate& center, const ScaleSpec& scale) {
    ElevationRaster::SampleStatus status{};
    auto patch = try_extract_patch(raster, center, scale, &status);
    if (!patch) {
        std::ostringstream msg;
        msg << "patch of radius " << scale.radius_m() << " m around (" << center.lon << ", " << center.lat << ")";
        if (status == ElevationRaster::SampleStatus::OutOfBounds) {
            fail(ErrorKind::Boundary, msg.str() + " leaves the raster");
        }
        fail(ErrorKind::DataQuality, msg.str() + " touches nodata");
    }
    return std::move(*patch);
}

void normalize_in_place(std::vector<double>& values) {
    if (values.empty()) {
        return;
    }
    auto [lo, hi] = std::minmax_element(values.begin(), values.end());
    const double min = *lo;
    const double range = *hi - min;
    if (!(range > 0.0)) {
        std::fill(values.begin(), values.end(), 0.0);
        return;
    }
    for (auto& v : values) {
        v = (v - min) / range;
    }
}

ElevationPatch normalize_patch(ElevationPatch patch) {
    normalize_in_place(patch.values);
    return patch;
}

std::optional<std::vector<double>> try_sample_footprint(const ElevationRaster& raster, const GeoCoordinate& center,
                                                        double radius_m, int side,
                                                        ElevationRaster::SampleStatus* status) {
    require(radius_m > 0.0 && side > 0, ErrorKind::Domain, "footprint needs positive radius and side");
    const double step = 2.0 * radius_m / side;
    const double first = -radius_m + 0.5 * step;
    std::vector<double> out;
    auto st = sample_lattice(raster, center, side, first, -first, step, out);
    if (status != nullptr) {
        *status = st;
    }
    if (st != ElevationRaster::SampleStatus::Ok) {
        return std::nullopt;
    }
    return out;
}

} // namespace topoembed
