#pragma once

#include "topoembed/error.hpp"
#include "topoembed/raster.hpp"

#include "doctest.h"

#include <filesystem>
#include <functional>
#include <random>
#include <string>

namespace testing {

using namespace topoembed;

/// Raster whose pixel (col,row) holds f(col,row); top-left corner at
/// (lon0, lat0) with square pixels of `deg` degrees.
inline ElevationRaster make_raster(int w, int h, const std::function<double(int, int)>& f, double lon0 = 7.0,
                                   double lat0 = 47.0, double deg = 1e-3) {
    std::vector<float> v(static_cast<std::size_t>(w) * h);
    for (int r = 0; r < h; ++r) {
        for (int c = 0; c < w; ++c) {
            v[static_cast<std::size_t>(r) * w + c] = static_cast<float>(f(c, r));
        }
    }
    return ElevationRaster(w, h, std::move(v), GeoTransform::north_up(lon0, lat0, deg, deg), std::nullopt,
                           deg * kMetersPerDegree);
}

inline std::filesystem::path temp_dir(const std::string& name) {
    auto p = std::filesystem::temp_directory_path() / ("topoembed-test-" + name);
    std::filesystem::remove_all(p);
    std::filesystem::create_directories(p);
    return p;
}

template <typename Fn>
ErrorKind error_kind_of(Fn&& fn) {
    try {
        fn();
    } catch (const Error& e) {
        return e.kind();
    }
    FAIL("expected a topoembed::Error");
    return ErrorKind::Io;
}

} // namespace testing
