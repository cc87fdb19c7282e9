#include "support.hpp"

#include "topoembed/patch.hpp"

#include <cmath>
#include <numbers>
#include <random>

using namespace topoembed;

namespace {

double plane(double x, double y) { return 100.0 + 3.0 * x - 2.0 * y; }

// Continuous pixel-center coordinates of a point for the make_raster layout.
std::pair<double, double> pixel_of(const GeoCoordinate& p, double lon0 = 7.0, double lat0 = 47.0, double deg = 1e-3) {
    return {(p.lon - lon0) / deg - 0.5, (lat0 - p.lat) / deg - 0.5};
}

/// Pixels are res_m square (in the local metric frame) along row `row`.
ElevationRaster metric_square_raster(std::vector<float> values, int side, double lat_center, double res_m, int row) {
    const double ph = res_m / kMetersPerDegree;
    const double top = lat_center + 0.5 * side * ph;
    const double lat = GeoTransform::north_up(7.0, top, ph, ph).pixel_center(0.0, row).lat;
    const double pw = res_m / (kMetersPerDegree * std::cos(lat * std::numbers::pi / 180.0));
    return ElevationRaster(side, side, std::move(values), GeoTransform::north_up(7.0, top, pw, ph), std::nullopt,
                           res_m);
}

} // namespace

TEST_SUITE("raster") {

TEST_CASE("geotransform maps pixel centers both ways") {
    const auto t = GeoTransform::north_up(7.0, 47.0, 0.01, 0.02);
    const auto p = t.pixel_center(0.0, 0.0);
    CHECK(p.lon == doctest::Approx(7.005));
    CHECK(p.lat == doctest::Approx(46.99));
    const auto px = t.to_pixel({7.105, 46.93});
    CHECK(px[0] == doctest::Approx(10.0));
    CHECK(px[1] == doctest::Approx(3.0));
}

TEST_CASE("bilinear sampling reproduces a planar ramp") {
    const auto r = testing::make_raster(40, 30, [](int c, int row) { return plane(c, row); });
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> ux(0.0, 39.0), uy(0.0, 29.0);
    for (int i = 0; i < 200; ++i) {
        const double x = ux(rng);
        const double y = uy(rng);
        const auto p = r.transform().pixel_center(x, y);
        CHECK(r.sample(p) == doctest::Approx(plane(x, y)).epsilon(1e-9));
    }
}

TEST_CASE("sampling at a pixel center returns the stored value exactly") {
    std::mt19937_64 rng(2);
    std::uniform_real_distribution<float> u(-500.0f, 4000.0f);
    const auto r = testing::make_raster(20, 20, [&](int, int) { return u(rng); });
    for (int row = 0; row < 20; ++row) {
        for (int c = 0; c < 20; ++c) {
            CHECK(r.sample(r.transform().pixel_center(c, row)) == static_cast<double>(r.at(c, row)));
        }
    }
}

TEST_CASE("sampling outside the center grid or on nodata fails") {
    auto r = testing::make_raster(10, 10, [](int c, int) { return c == 4 ? -9999.0 : 1.0; });
    r = ElevationRaster(r.width(), r.height(), r.values(), r.transform(), -9999.0, r.source_resolution());
    CHECK(testing::error_kind_of([&] { r.sample(r.transform().pixel_center(-0.6, 3)); }) == ErrorKind::Boundary);
    CHECK(testing::error_kind_of([&] { r.sample(r.transform().pixel_center(3.5, 3)); }) == ErrorKind::DataQuality);
    double out = 0.0;
    CHECK(r.try_sample(r.transform().pixel_center(9.5, 0), out) == ElevationRaster::SampleStatus::OutOfBounds);
    CHECK(r.try_sample(r.transform().pixel_center(2, 2), out) == ElevationRaster::SampleStatus::Ok);
    CHECK(out == 1.0);
}

TEST_CASE("patch pixels are bilinear samples at metric offsets from the center") {
    const auto r = testing::make_raster(400, 400, [](int c, int row) { return plane(c, row); });
    const GeoCoordinate center{7.2003, 46.8011};
    const ScaleSpec scale(200.0, 8);
    const auto patch = extract_patch(r, center, scale);
    REQUIRE(patch.side == 17);
    REQUIRE(patch.values.size() == 289);
    for (int i = 0; i < 17; ++i) {
        for (int j = 0; j < 17; ++j) {
            const auto p = offset_by_meters(center, (j - 8) * scale.resolution(), (8 - i) * scale.resolution());
            const auto [x, y] = pixel_of(p);
            CHECK(patch.at(i, j) == doctest::Approx(plane(x, y)).epsilon(1e-9));
        }
    }
    // row 0 is north: the ramp decreases southwards
    CHECK(patch.at(0, 8) > patch.at(16, 8));
    CHECK(patch.at(8, 16) > patch.at(8, 0));
}

TEST_CASE("patch at native resolution on a pixel center is the raster window bit for bit") {
    const int side = 65;
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<float> u(0.0f, 3000.0f);
    std::vector<float> v(side * side);
    for (auto& x : v) {
        x = u(rng);
    }
    for (auto [c0, r0] : {std::pair{8, 8}, {30, 41}, {56, 56}}) {
        const auto r = metric_square_raster(v, side, 47.3, 25.0, r0);
        const auto patch = extract_patch(r, r.transform().pixel_center(c0, r0), ScaleSpec::from_resolution(25.0));
        for (int i = 0; i < 17; ++i) {
            for (int j = 0; j < 17; ++j) {
                CHECK(patch.at(i, j) == static_cast<double>(r.at(c0 + j - 8, r0 + i - 8)));
            }
        }
    }
    const auto r = metric_square_raster(v, side, 47.3, 25.0, 30);
    CHECK(testing::error_kind_of([&] {
              extract_patch(r, r.transform().pixel_center(7, 30), ScaleSpec::from_resolution(25.0));
          }) == ErrorKind::Boundary);
    CHECK_FALSE(try_extract_patch(r, r.transform().pixel_center(57, 30), ScaleSpec::from_resolution(25.0)));
}

TEST_CASE("min-max normalization") {
    ElevationPatch p;
    p.side = 17;
    p.values.assign(289, 5.0);
    CHECK(normalize_patch(p).values == std::vector<double>(289, 0.0));
    for (int i = 0; i < 289; ++i) {
        p.values[i] = 100.0 + 2.0 * i;
    }
    const auto n = normalize_patch(p);
    CHECK(n.values.front() == 0.0);
    CHECK(n.values.back() == 1.0);
    CHECK(n.values[144] == doctest::Approx(0.5));
}

TEST_CASE("footprint samples are cell centered over the patch square") {
    const auto r = testing::make_raster(400, 400, [](int c, int row) { return plane(c, row); });
    const GeoCoordinate center{7.2, 46.8};
    const int side = 16;
    const double radius = 300.0;
    const auto fp = try_sample_footprint(r, center, radius, side);
    REQUIRE(fp);
    REQUIRE(fp->size() == 256);
    for (int i = 0; i < side; i += 5) {
        for (int j = 0; j < side; j += 3) {
            const double step = 2.0 * radius / side;
            const auto p = offset_by_meters(center, -radius + (j + 0.5) * step, radius - (i + 0.5) * step);
            const auto [x, y] = pixel_of(p);
            CHECK((*fp)[static_cast<std::size_t>(i) * side + j] == doctest::Approx(plane(x, y)).epsilon(1e-9));
        }
    }
}

} // TEST_SUITE
