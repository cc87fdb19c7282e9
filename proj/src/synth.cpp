#include "topoembed/synth.hpp"

#include "topoembed/error.hpp"
#include "topoembed/util.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace topoembed {

bool is_diamond_square_side(int side_px) noexcept {
    if (side_px < 5) {
        return false;
    }
    const int n = side_px - 1;
    return (n & (n - 1)) == 0;
}

ElevationRaster synth_fractal_raster(std::uint64_t seed, int side_px, double roughness, double base_resolution,
                                     const SynthOptions& options) {
    require(is_diamond_square_side(side_px), ErrorKind::Domain,
            "synthetic raster side must be 2^m+1 with m >= 2, got " + std::to_string(side_px));
    require(roughness > 0.0 && roughness <= 1.0, ErrorKind::Domain, "roughness must lie in (0, 1]");
    require(base_resolution > 0.0, ErrorKind::Domain, "base resolution must be positive");

    const std::size_t n = static_cast<std::size_t>(side_px);
    std::vector<double> h(n * n, 0.0);
    auto at = [&](std::size_t r, std::size_t c) -> double& { return h[r * n + c]; };
    auto rng = make_rng(seed, "diamond-square");
    std::uniform_real_distribution<double> unit(-1.0, 1.0);

    const std::size_t last = n - 1;
    for (auto [r, c] : {std::pair{std::size_t{0}, std::size_t{0}}, {0, last}, {last, 0}, {last, last}}) {
        at(r, c) = options.zero_corners ? 0.0 : options.amplitude_m * unit(rng);
    }

    double amp = options.amplitude_m * roughness;
    for (std::size_t step = last; step > 1; step /= 2, amp *= roughness) {
        const std::size_t half = step / 2;
        // Diamond: square centers.
        for (std::size_t r = half; r < n; r += step) {
            for (std::size_t c = half; c < n; c += step) {
                const double mean =
                    0.25 * (at(r - half, c - half) + at(r - half, c + half) + at(r + half, c - half) + at(r + half, c + half));
                at(r, c) = mean + amp * unit(rng);
            }
        }
        // Square: edge midpoints, averaging the in-grid neighbors.
        for (std::size_t r = 0; r < n; r += half) {
            for (std::size_t c = (r / half) % 2 == 0 ? half : 0; c < n; c += step) {
                double sum = 0.0;
                int count = 0;
                if (r >= half) { sum += at(r - half, c); ++count; }
                if (r + half < n) { sum += at(r + half, c); ++count; }
                if (c >= half) { sum += at(r, c - half); ++count; }
                if (c + half < n) { sum += at(r, c + half); ++count; }
                at(r, c) = sum / count + amp * unit(rng);
            }
        }
    }

    std::vector<float> values(h.size());
    std::transform(h.begin(), h.end(), values.begin(),
                   [&](double v) { return static_cast<float>(v + options.base_elevation_m); });

    const double cos_lat = std::cos(options.center.lat * std::numbers::pi / 180.0);
    const double px_w = base_resolution / (kMetersPerDegree * cos_lat);
    const double px_h = base_resolution / kMetersPerDegree;
    const double origin_lon = options.center.lon - 0.5 * side_px * px_w;
    const double origin_lat = options.center.lat + 0.5 * side_px * px_h;
    return ElevationRaster(side_px, side_px, std::move(values),
                           GeoTransform::north_up(origin_lon, origin_lat, px_w, px_h), std::nullopt,
                           base_resolution);
}

const char* to_string(FeatureKind kind) noexcept {
    switch (kind) {
    case FeatureKind::Peak: return "peak";
    case FeatureKind::Pit: return "pit";
    case FeatureKind::Ridge: return "ridge";
    case FeatureKind::Valley: return "valley";
    case FeatureKind::Saddle: return "saddle";
    case FeatureKind::Cliff: return "cliff";
    }
    return "unknown";
}

double feature_profile(const PlantedFeature& f, double east_m, double north_m) noexcept {
    const double cu = std::cos(f.orientation_rad);
    const double su = std::sin(f.orientation_rad);
    const double u = east_m * cu + north_m * su;   // along axis
    const double v = -east_m * su + north_m * cu;  // across axis
    const double s2 = f.size_m * f.size_m;
    auto gauss = [&](double d2) { return std::exp(-0.5 * d2 / s2); };
    auto along_window = [&] {
        const double excess = std::max(0.0, std::abs(u) - 0.5 * f.length_m);
        return gauss(excess * excess);
    };
    switch (f.kind) {
    case FeatureKind::Peak:
        return f.height_m * gauss(u * u + v * v);
    case FeatureKind::Pit:
        return -f.height_m * gauss(u * u + v * v);
    case FeatureKind::Ridge:
        return f.height_m * gauss(v * v) * along_window();
    case FeatureKind::Valley:
        return -f.height_m * gauss(v * v) * along_window();
    case FeatureKind::Saddle:
        return f.height_m * (u * u - v * v) / s2 * gauss(u * u + v * v);
    case FeatureKind::Cliff:
        return 0.5 * f.height_m * std::tanh(4.0 * v / f.size_m) * along_window() * std::exp(-0.125 * v * v / s2);
    }
    return 0.0;
}

double feature_reach_m(const PlantedFeature& f) noexcept {
    return 0.5 * f.length_m + 6.0 * f.size_m;
}

ElevationRaster plant_features(const ElevationRaster& raster, std::span<const PlantedFeature> features) {
    std::vector<float> values = raster.values();
    const auto& gt = raster.transform();
    for (const auto& f : features) {
        const double reach = feature_reach_m(f);
        const double cos_lat = std::cos(f.center.lat * std::numbers::pi / 180.0);
        const auto ne = offset_by_meters(f.center, reach, reach);
        const auto sw = offset_by_meters(f.center, -reach, -reach);
        auto a = gt.to_pixel(sw);
        auto b = gt.to_pixel(ne);
        const int c0 = std::max(0, static_cast<int>(std::floor(std::min(a[0], b[0]))));
        const int c1 = std::min(raster.width() - 1, static_cast<int>(std::ceil(std::max(a[0], b[0]))));
        const int r0 = std::max(0, static_cast<int>(std::floor(std::min(a[1], b[1]))));
        const int r1 = std::min(raster.height() - 1, static_cast<int>(std::ceil(std::max(a[1], b[1]))));
        for (int r = r0; r <= r1; ++r) {
            for (int c = c0; c <= c1; ++c) {
                auto p = gt.pixel_center(c, r);
                const double east = (p.lon - f.center.lon) * kMetersPerDegree * cos_lat;
                const double north = (p.lat - f.center.lat) * kMetersPerDegree;
                auto& v = values[static_cast<std::size_t>(r) * raster.width() + c];
                if (!raster.is_nodata(v)) {
                    v = static_cast<float>(v + feature_profile(f, east, north));
                }
            }
        }
    }
    return ElevationRaster(raster.width(), raster.height(), std::move(values), raster.transform(), raster.nodata(),
                           raster.source_resolution());
}

ElevationRaster constant_like(const ElevationRaster& raster, float value) {
    return ElevationRaster(raster.width(), raster.height(), std::vector<float>(raster.values().size(), value),
                           raster.transform(), raster.nodata(), raster.source_resolution());
}

} // namespace topoembed
