#pragma once

#include "topoembed/geo.hpp"
#include "topoembed/raster.hpp"

#include <cstdint>
#include <span>

namespace topoembed {

struct SynthOptions {
    double amplitude_m = 400.0;       // displacement bound of the corner seeds
    double base_elevation_m = 1000.0;
    bool zero_corners = false;
    GeoCoordinate center{12.5, 47.5}; // raster center, also the longitude-scaling latitude
};

/// Diamond-square terrain on a (2^m+1)^2 grid, m >= 2. Octave l (the l-th
/// halving of the step, starting at 0) adds uniform displacements bounded by
/// amplitude * roughness^(l+1). Deterministic per seed.
ElevationRaster synth_fractal_raster(std::uint64_t seed, int side_px, double roughness, double base_resolution,
                                     const SynthOptions& options = {});

bool is_diamond_square_side(int side_px) noexcept;

enum class FeatureKind { Peak, Pit, Ridge, Valley, Saddle, Cliff };

const char* to_string(FeatureKind kind) noexcept;

/// A landform added on top of a raster. `size_m` is the cross-section
/// standard deviation, `length_m` the along-axis extent of linear forms.
struct PlantedFeature {
    FeatureKind kind = FeatureKind::Peak;
    GeoCoordinate center;
    double size_m = 60.0;
    double height_m = 50.0;
    double orientation_rad = 0.0;  // axis direction, counter-clockwise from east
    double length_m = 0.0;
};

/// Elevation change contributed by a feature at an east/north offset.
double feature_profile(const PlantedFeature& feature, double east_m, double north_m) noexcept;

/// Radius beyond which feature_profile is negligible.
double feature_reach_m(const PlantedFeature& feature) noexcept;

ElevationRaster plant_features(const ElevationRaster& raster, std::span<const PlantedFeature> features);

/// Copy of `raster` with every pixel set to `value`.
ElevationRaster constant_like(const ElevationRaster& raster, float value);

} // namespace topoembed
