#include "support.hpp"

#include "topoembed/geo.hpp"
#include "topoembed/sampling.hpp"

#include <cmath>
#include <numbers>

using namespace topoembed;

TEST_SUITE("geo") {

TEST_CASE("coordinates outside WGS84 ranges are rejected") {
    CHECK_NOTHROW(make_coordinate(180.0, -90.0));
    CHECK(testing::error_kind_of([] { make_coordinate(180.5, 0.0); }) == ErrorKind::Domain);
    CHECK(testing::error_kind_of([] { make_coordinate(0.0, 91.0); }) == ErrorKind::Domain);
    CHECK(testing::error_kind_of([] { make_coordinate(std::nan(""), 0.0); }) == ErrorKind::Domain);
}

TEST_CASE("scale spec ties radius, half extent and resolution") {
    const ScaleSpec s(240.0, 8);
    CHECK(s.resolution() == doctest::Approx(30.0));
    CHECK(s.side() == 17);
    const auto t = ScaleSpec::from_resolution(15.0);
    CHECK(t.radius_m() == doctest::Approx(120.0));
    CHECK(resolution_of(480.0, 8) == doctest::Approx(60.0));
    CHECK(testing::error_kind_of([] { ScaleSpec(0.0, 8); }) == ErrorKind::Domain);
    CHECK(testing::error_kind_of([] { ScaleSpec(10.0, 0); }) == ErrorKind::Domain);
}

TEST_CASE("metric offsets follow the local equirectangular approximation") {
    const GeoCoordinate o{8.0, 60.0};
    const auto p = offset_by_meters(o, 1000.0, 2000.0);
    CHECK(p.lat - o.lat == doctest::Approx(2000.0 / kMetersPerDegree));
    CHECK(p.lon - o.lon == doctest::Approx(1000.0 / (kMetersPerDegree * 0.5)).epsilon(1e-9));
}

TEST_CASE("WKT round trip and containment") {
    const auto poly = AOIPolygon::from_wkt("POLYGON ((0 0, 4 0, 4 2, 0 2, 0 0))");
    CHECK(poly.vertices().size() == 4);
    CHECK(poly.area_deg2() == doctest::Approx(8.0));
    const auto again = AOIPolygon::from_wkt(poly.to_wkt());
    CHECK(again.vertices() == poly.vertices());
    CHECK(poly.contains({1.0, 1.0}));
    CHECK_FALSE(poly.contains({5.0, 1.0}));
    CHECK_FALSE(poly.contains({1.0, -0.5}));
    CHECK(testing::error_kind_of([] { AOIPolygon::from_wkt("POLYGON ((0 0, 1 1, 2 2, 0 0))").check_non_degenerate(); }) ==
          ErrorKind::Domain);
    CHECK(testing::error_kind_of([] { AOIPolygon::from_wkt("LINESTRING (0 0, 1 1)"); }) == ErrorKind::Domain);
}

TEST_CASE("train and test polygons share an edge without overlapping") {
    const auto train = europe_train_polygon();
    const auto test = europe_test_polygon();
    CHECK(train.bounds().min_lon == 10.0);
    CHECK(test.bounds().max_lon == 10.0);
    for (double lat : {45.5, 47.25, 49.9}) {
        const GeoCoordinate edge{10.0, lat};
        CHECK(train.contains(edge) != test.contains(edge));
    }
    CHECK(train.contains({12.5, 47.5}));
    CHECK(test.contains({7.5, 47.5}));
    CHECK_FALSE(train.contains({7.5, 47.5}));
}

TEST_CASE("polygon sampling is uniform, inside and deterministic") {
    const auto tri = AOIPolygon::from_wkt("POLYGON ((0 0, 2 0, 0 2, 0 0))");
    const auto a = sample_coords_in_polygon(tri, 4000, 3);
    const auto b = sample_coords_in_polygon(tri, 4000, 3);
    REQUIRE(a.size() == 4000);
    CHECK(a == b);
    std::size_t lower = 0;
    for (const auto& p : a) {
        CHECK(tri.contains(p));
        lower += p.lat < 1.0;
    }
    // area below lat=1 is 3/4 of the triangle
    CHECK(static_cast<double>(lower) / 4000.0 == doctest::Approx(0.75).epsilon(0.05));
    CHECK(sample_coords_in_polygon(tri, 10, 4) != sample_coords_in_polygon(tri, 10, 5));
}

} // TEST_SUITE
