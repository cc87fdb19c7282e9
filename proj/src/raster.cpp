#include "topoembed/raster.hpp"

#include "topoembed/error.hpp"

#include <cmath>
#include <sstream>

namespace topoembed {

GeoTransform::GeoTransform(std::array<double, 6> coeffs) : c_(coeffs) {
    const double det = c_[1] * c_[5] - c_[2] * c_[4];
    require(std::isfinite(det) && det != 0.0, ErrorKind::Domain, "geo transform is not invertible");
    inv_ = {c_[5] / det, -c_[2] / det, -c_[4] / det, c_[1] / det};
}

GeoTransform GeoTransform::north_up(double origin_lon, double origin_lat, double pixel_width_deg,
                                    double pixel_height_deg) {
    return GeoTransform({origin_lon, pixel_width_deg, 0.0, origin_lat, 0.0, -pixel_height_deg});
}

std::array<double, 2> GeoTransform::to_pixel(const GeoCoordinate& p) const noexcept {
    const double dx = p.lon - c_[0];
    const double dy = p.lat - c_[3];
    return {inv_[0] * dx + inv_[1] * dy - 0.5, inv_[2] * dx + inv_[3] * dy - 0.5};
}

GeoCoordinate GeoTransform::pixel_center(double col, double row) const noexcept {
    const double x = col + 0.5;
    const double y = row + 0.5;
    return {c_[0] + x * c_[1] + y * c_[2], c_[3] + x * c_[4] + y * c_[5]};
}

ElevationRaster::ElevationRaster(int width, int height, std::vector<float> values, GeoTransform transform,
                                 std::optional<double> nodata, double source_resolution)
    : width_(width), height_(height), values_(std::move(values)), transform_(transform), nodata_(nodata),
      source_resolution_(source_resolution) {
    require(width_ > 0 && height_ > 0, ErrorKind::Domain, "raster grid must be non-empty");
    require(values_.size() == static_cast<std::size_t>(width_) * static_cast<std::size_t>(height_),
            ErrorKind::Contract, "raster value count does not match width*height");
    require(source_resolution_ > 0.0 && std::isfinite(source_resolution_), ErrorKind::Domain,
            "raster source resolution must be positive");
}

bool ElevationRaster::is_nodata(float v) const noexcept {
    if (std::isnan(v)) {
        return true;
    }
    return nodata_.has_value() && static_cast<double>(v) == *nodata_;
}

BoundingBox ElevationRaster::center_bounds() const noexcept {
    BoundingBox box{1e300, 1e300, -1e300, -1e300};
    for (int corner = 0; corner < 4; ++corner) {
        auto p = transform_.pixel_center((corner & 1) ? width_ - 1 : 0, (corner & 2) ? height_ - 1 : 0);
        box.min_lon = std::min(box.min_lon, p.lon);
        box.max_lon = std::max(box.max_lon, p.lon);
        box.min_lat = std::min(box.min_lat, p.lat);
        box.max_lat = std::max(box.max_lat, p.lat);
    }
    return box;
}

namespace {

constexpr double kSnap = 1e-9;

// Splits a continuous index into base cell and fractional weight, snapping
// near-integers so grid-aligned reads involve a single pixel.
void split_index(double x, int& base, double& frac) {
    double fl = std::floor(x);
    frac = x - fl;
    base = static_cast<int>(fl);
    if (frac < kSnap) {
        frac = 0.0;
    } else if (frac > 1.0 - kSnap) {
        frac = 0.0;
        base += 1;
    }
}

} // namespace

ElevationRaster::SampleStatus ElevationRaster::try_sample(const GeoCoordinate& p, double& out) const noexcept {
    auto [x, y] = transform_.to_pixel(p);
    if (!std::isfinite(x) || !std::isfinite(y) || x < -1.0 || y < -1.0 || x > width_ || y > height_) {
        return SampleStatus::OutOfBounds;
    }
    int col = 0;
    int row = 0;
    double fx = 0.0;
    double fy = 0.0;
    split_index(x, col, fx);
    split_index(y, row, fy);
    const int col1 = fx > 0.0 ? col + 1 : col;
    const int row1 = fy > 0.0 ? row + 1 : row;
    if (col < 0 || row < 0 || col1 >= width_ || row1 >= height_) {
        return SampleStatus::OutOfBounds;
    }
    const float v00 = at(col, row);
    if (is_nodata(v00)) {
        return SampleStatus::NoData;
    }
    if (fx == 0.0 && fy == 0.0) {
        out = v00;
        return SampleStatus::Ok;
    }
    const float v10 = at(col1, row);
    const float v01 = at(col, row1);
    const float v11 = at(col1, row1);
    if ((fx > 0.0 && is_nodata(v10)) || (fy > 0.0 && is_nodata(v01)) || (fx > 0.0 && fy > 0.0 && is_nodata(v11))) {
        return SampleStatus::NoData;
    }
    if (fy == 0.0) {
        out = (1.0 - fx) * v00 + fx * v10;
    } else if (fx == 0.0) {
        out = (1.0 - fy) * v00 + fy * v01;
    } else {
        out = (1.0 - fy) * ((1.0 - fx) * v00 + fx * v10) + fy * ((1.0 - fx) * v01 + fx * v11);
    }
    return SampleStatus::Ok;
}

double ElevationRaster::sample(const GeoCoordinate& p) const {
    double value = 0.0;
    switch (try_sample(p, value)) {
    case SampleStatus::Ok:
        return value;
    case SampleStatus::OutOfBounds: {
        std::ostringstream msg;
        msg << "coordinate (" << p.lon << ", " << p.lat << ") outside raster";
        fail(ErrorKind::Boundary, msg.str());
    }
    case SampleStatus::NoData: {
        std::ostringstream msg;
        msg << "nodata near (" << p.lon << ", " << p.lat << ")";
        fail(ErrorKind::DataQuality, msg.str());
    }
    }
    return value;
}

} // namespace topoembed
