#pragma once

#include "topoembed/geo.hpp"
#include "topoembed/raster.hpp"

#include <optional>
#include <vector>

namespace topoembed {

/// Square elevation window of side 2N+1 centered on a coordinate.
struct ElevationPatch {
    int side = 0;
    std::vector<double> values;  // row-major, row 0 is north
    GeoCoordinate center;
    ScaleSpec scale{8.0, 8};

    double at(int row, int col) const { return values[static_cast<std::size_t>(row) * side + col]; }
};

/// Pixel (i,j) is the bilinear elevation at ((j-N)*s, (N-i)*s) meters
/// east/north of the center. Throws Boundary or DataQuality errors.
ElevationPatch extract_patch(const ElevationRaster& raster, const GeoCoordinate& center, const ScaleSpec& scale);

/// Non-throwing variant; returns the failure status through `status`.
std::optional<ElevationPatch> try_extract_patch(const ElevationRaster& raster, const GeoCoordinate& center,
                                                const ScaleSpec& scale, ElevationRaster::SampleStatus* status = nullptr);

/// Per-patch min-max to [0,1]; constant patches map to zeros.
ElevationPatch normalize_patch(ElevationPatch patch);
void normalize_in_place(std::vector<double>& values);

/// `side` x `side` grid of cell-centered samples tiling the square of
/// half-width radius_m around `center`. Cell (i,j) sits at
/// (-r + (j+0.5)*2r/side, r - (i+0.5)*2r/side) meters east/north.
std::optional<std::vector<double>> try_sample_footprint(const ElevationRaster& raster, const GeoCoordinate& center,
                                                        double radius_m, int side,
                                                        ElevationRaster::SampleStatus* status = nullptr);

} // namespace topoembed
