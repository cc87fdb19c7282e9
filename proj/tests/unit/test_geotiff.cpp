#include "support.hpp"

#include "topoembed/geotiff.hpp"
#include "topoembed/synth.hpp"
#include "topoembed/util.hpp"

#include <filesystem>

using namespace topoembed;

namespace {

const std::filesystem::path kFixtures{TOPOEMBED_FIXTURE_DIR};

double expected(int col, int row, double offset) { return 1000.0 + 2.0 * col - 3.0 * row + offset; }

void check_fixture(const ElevationRaster& r, double offset) {
    REQUIRE(r.width() == 37);
    REQUIRE(r.height() == 23);
    for (int row = 0; row < 23; ++row) {
        for (int c = 0; c < 37; ++c) {
            if (r.at(c, row) != static_cast<float>(expected(c, row, offset))) {
                FAIL_CHECK("pixel " << c << "," << row << " = " << r.at(c, row));
            }
        }
    }
    const auto p = r.transform().pixel_center(0, 0);
    CHECK(p.lon == doctest::Approx(7.0005).epsilon(1e-12));
    CHECK(p.lat == doctest::Approx(46.9995).epsilon(1e-12));
    const auto q = r.transform().pixel_center(36, 22);
    CHECK(q.lon == doctest::Approx(7.0365).epsilon(1e-12));
    CHECK(q.lat == doctest::Approx(46.9775).epsilon(1e-12));
}

} // namespace

TEST_SUITE("geotiff") {

TEST_CASE("reads strip rasters written by an independent encoder") {
    for (const char* name : {"float_raw.tif", "float_lzw.tif", "float_deflate.tif"}) {
        CAPTURE(name);
        const auto r = read_geotiff(kFixtures / name);
        check_fixture(r, 0.25);
        CHECK_FALSE(r.nodata());
    }
    check_fixture(read_geotiff(kFixtures / "int16_lzw.tif"), 0.0);
}

TEST_CASE("pixel-is-point tie points address pixel centers") {
    check_fixture(read_geotiff(kFixtures / "float_point.tif"), 0.25);
}

TEST_CASE("GDAL nodata marks holes that sampling refuses") {
    const auto r = read_geotiff(kFixtures / "float_nodata.tif");
    REQUIRE(r.nodata());
    CHECK(*r.nodata() == -9999.0);
    CHECK(r.is_nodata(r.at(7, 5)));
    CHECK(testing::error_kind_of([&] { r.sample(r.transform().pixel_center(7.5, 5.0)); }) == ErrorKind::DataQuality);
    CHECK(r.sample(r.transform().pixel_center(20, 15)) == doctest::Approx(expected(20, 15, 0.25)));
}

TEST_CASE("writer round trip preserves values, georeferencing and resolution") {
    const auto src = synth_fractal_raster(4, 65, 0.6, 12.5);
    const auto dir = testing::temp_dir("geotiff");
    write_geotiff(dir / "a.tif", src);
    const auto back = read_geotiff(dir / "a.tif");
    CHECK(back.values() == src.values());
    for (int i = 0; i < 6; ++i) {
        CHECK(back.transform().coefficients()[i] == doctest::Approx(src.transform().coefficients()[i]).epsilon(1e-15));
    }
    CHECK(back.source_resolution() == doctest::Approx(12.5));
    write_geotiff(dir / "b.tif", src);
    CHECK(file_hash(dir / "a.tif") == file_hash(dir / "b.tif"));
}

TEST_CASE("malformed input is an I/O error") {
    CHECK(testing::error_kind_of([] { decode_geotiff("not a tiff at all"); }) == ErrorKind::Io);
    CHECK(testing::error_kind_of([] { decode_geotiff(""); }) == ErrorKind::Io);
    CHECK(testing::error_kind_of([] { read_geotiff("/nonexistent/x.tif"); }) == ErrorKind::Io);
}

} // TEST_SUITE
