#pragma once

#include "topoembed/geo.hpp"

#include <array>
#include <optional>
#include <vector>

namespace topoembed {

/// GDAL-ordered affine transform: lon = c[0] + col*c[1] + row*c[2],
/// lat = c[3] + col*c[4] + row*c[5], where (col,row) address pixel corners.
class GeoTransform {
public:
    GeoTransform() = default;
    explicit GeoTransform(std::array<double, 6> coeffs);

    /// North-up transform from the top-left corner and pixel size in degrees.
    static GeoTransform north_up(double origin_lon, double origin_lat, double pixel_width_deg,
                                 double pixel_height_deg);

    const std::array<double, 6>& coefficients() const noexcept { return c_; }

    /// Continuous pixel-center index (col, row) of a coordinate; pixel (0,0)
    /// center maps to (0.0, 0.0).
    std::array<double, 2> to_pixel(const GeoCoordinate& p) const noexcept;
    GeoCoordinate pixel_center(double col, double row) const noexcept;

private:
    std::array<double, 6> c_{0, 1, 0, 0, 0, -1};
    std::array<double, 4> inv_{1, 0, 0, -1};
};

/// Single-band elevation grid in meters. Immutable once constructed.
class ElevationRaster {
public:
    ElevationRaster(int width, int height, std::vector<float> values, GeoTransform transform,
                    std::optional<double> nodata, double source_resolution);

    int width() const noexcept { return width_; }
    int height() const noexcept { return height_; }
    const std::vector<float>& values() const noexcept { return values_; }
    const GeoTransform& transform() const noexcept { return transform_; }
    std::optional<double> nodata() const noexcept { return nodata_; }
    double source_resolution() const noexcept { return source_resolution_; }

    float at(int col, int row) const noexcept { return values_[static_cast<std::size_t>(row) * width_ + col]; }
    bool is_nodata(float v) const noexcept;

    /// Geographic extent covered by pixel centers.
    BoundingBox center_bounds() const noexcept;

    /// Bilinear elevation at a coordinate. Sample positions within 1e-9 px of
    /// a pixel center return that pixel's stored value unchanged.
    /// Throws ErrorKind::Boundary outside the center grid and
    /// ErrorKind::DataQuality when a contributing pixel is nodata.
    double sample(const GeoCoordinate& p) const;

    /// Same as sample() but reports failure through the return value.
    enum class SampleStatus { Ok, OutOfBounds, NoData };
    SampleStatus try_sample(const GeoCoordinate& p, double& out) const noexcept;

private:
    int width_;
    int height_;
    std::vector<float> values_;
    GeoTransform transform_;
    std::optional<double> nodata_;
    double source_resolution_;
};

} // namespace topoembed
