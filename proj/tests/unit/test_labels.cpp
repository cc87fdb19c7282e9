#include "support.hpp"

#include "topoembed/labels.hpp"
#include "topoembed/sampling.hpp"
#include "topoembed/util.hpp"

#include <algorithm>
#include <set>

using namespace topoembed;

namespace {

const AOIPolygon kSquare = AOIPolygon::from_wkt("POLYGON ((7 47, 8 47, 8 48, 7 48, 7 47))");

std::vector<GeoCoordinate> grid_points(int n) {
    std::vector<GeoCoordinate> out;
    for (int i = 0; i < n; ++i) {
        out.push_back({7.01 + 0.98 * (i % 37) / 37.0, 47.01 + 0.98 * (i / 37) / 37.0});
    }
    return out;
}

} // namespace

TEST_SUITE("labels") {

TEST_CASE("class tags") {
    CHECK(known_class_tag("peak").osm_selector == "natural=peak");
    CHECK(known_class_tag("river").osm_selector == "waterway=river");
    CHECK(testing::error_kind_of([] { known_class_tag("volcano-lake"); }) == ErrorKind::Domain);
    CHECK(make_class_tag("hut", "tourism=alpine_hut").name == "hut");
    CHECK_FALSE(is_valid_selector("natural"));
    CHECK_FALSE(is_valid_selector("natural=peak\"];out;"));
    CHECK(testing::error_kind_of([] { make_class_tag("x", "a=b;c"); }) == ErrorKind::Domain);
    const auto names = known_class_names();
    CHECK(std::find(names.begin(), names.end(), "cliff") != names.end());
}

TEST_CASE("coordinate CSV parsing") {
    const auto rows = parse_coord_csv("\xEF\xBB\xBFlat,lon,label\n47.5,7.25,0\n\n47.6, 7.5 ,1\n");
    REQUIRE(rows.size() == 2);
    CHECK(rows[0].coord == GeoCoordinate{7.25, 47.5});
    CHECK(rows[0].label == 0);
    CHECK(rows[1].label == 1);
    const auto unlabeled = parse_coord_csv("lon,lat\n1,2\n");
    CHECK(unlabeled.at(0).label == 1);
    CHECK(testing::error_kind_of([] { parse_coord_csv("x,y\n1,2\n"); }) == ErrorKind::Io);
    CHECK(testing::error_kind_of([] { parse_coord_csv("lon,lat\n1,abc\n"); }) == ErrorKind::Io);
    CHECK(testing::error_kind_of([] { parse_coord_csv("lon,lat,label\n1,2,3\n"); }) == ErrorKind::Io);
    CHECK(testing::error_kind_of([] { parse_coord_csv("lon,lat\n200,2\n"); }) == ErrorKind::Domain);

    std::vector<LabeledCoord> coords{{{7.125, 47.0625}, 1}, {{0.1, -0.3}, 0}};
    const auto again = parse_coord_csv(format_coord_csv(coords));
    REQUIRE(again.size() == 2);
    CHECK(again[0].coord == coords[0].coord);
    CHECK(again[1].coord == coords[1].coord);
    CHECK(again[1].label == 0);
}

TEST_CASE("canonical class coordinates are filtered, sorted and deduplicated") {
    const std::vector<GeoCoordinate> raw{{7.5, 47.5}, {9.0, 47.5}, {7.2, 47.9}, {7.5, 47.5000000001}, {7.2, 47.1}};
    const auto c = canonical_coords(raw, kSquare);
    REQUIRE(c.size() == 3);
    CHECK(c[0] == GeoCoordinate{7.2, 47.1});
    CHECK(c[1] == GeoCoordinate{7.2, 47.9});
    CHECK(c[2].lon == 7.5);

    const auto dir = testing::temp_dir("labels");
    write_file_atomic(dir / "peaks.csv", format_coord_csv(raw));
    CHECK(load_class_coords((dir / "peaks.csv").string(), known_class_tag("peak"), kSquare).size() == 3);
    write_file_atomic(dir / "far.csv", "lon,lat\n20,20\n");
    CHECK(testing::error_kind_of([&] {
              load_class_coords((dir / "far.csv").string(), known_class_tag("peak"), kSquare);
          }) == ErrorKind::EmptyClass);
}

TEST_CASE("balanced class datasets") {
    const auto positives = grid_points(600);
    const auto ds = build_class_dataset(positives, kSquare, 1000, 4, known_class_tag("peak"));
    CHECK(ds.entries.size() == 1000);
    CHECK(ds.count(1) == 500);
    CHECK(ds.count(0) == 500);
    std::set<std::pair<double, double>> pos(
        [&] {
            std::set<std::pair<double, double>> s;
            for (const auto& p : positives) s.insert({p.lon, p.lat});
            return s;
        }());
    std::set<std::pair<double, double>> drawn;
    for (const auto& e : ds.entries) {
        CHECK(kSquare.contains(e.coord));
        if (e.label == 1) {
            CHECK(pos.count({e.coord.lon, e.coord.lat}) == 1);
            drawn.insert({e.coord.lon, e.coord.lat});
        }
    }
    CHECK(drawn.size() == 500);  // without replacement
    // shuffled: labels are not in blocks
    int switches = 0;
    for (std::size_t i = 1; i < ds.entries.size(); ++i) {
        switches += ds.entries[i].label != ds.entries[i - 1].label;
    }
    CHECK(switches > 300);

    const auto same = build_class_dataset(positives, kSquare, 1000, 4);
    CHECK(same.entries.size() == ds.entries.size());
    CHECK(std::equal(same.entries.begin(), same.entries.end(), ds.entries.begin(),
                     [](const LabeledCoord& a, const LabeledCoord& b) { return a.coord == b.coord && a.label == b.label; }));
}

TEST_CASE("dataset capacity and domain errors") {
    const auto few = grid_points(400);
    try {
        build_class_dataset(few, kSquare, 1000, 0, known_class_tag("saddle"));
        FAIL("expected a capacity error");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::Capacity);
        CHECK(std::string(e.what()).find("short by 100") != std::string::npos);
    }
    CHECK(testing::error_kind_of([&] { build_class_dataset(few, kSquare, 101, 0); }) == ErrorKind::Domain);
}

TEST_CASE("image datasets drop unusable locations and report the rate") {
    const auto r = testing::make_raster(300, 300, [](int c, int row) { return c + 2.0 * row; });
    const auto bounds = r.center_bounds();
    const GeoCoordinate inside{0.5 * (bounds.min_lon + bounds.max_lon), 0.5 * (bounds.min_lat + bounds.max_lat)};
    const GeoCoordinate edge{bounds.min_lon, inside.lat};
    const std::vector<GeoCoordinate> coords{inside, edge, inside, edge, edge};
    const auto ds = to_image_dataset(coords, ScaleSpec::from_resolution(20.0), r);
    CHECK(ds.size() == 2);
    CHECK(ds.rejected == 3);
    CHECK(ds.source_index == std::vector<std::size_t>{0, 2});
    CHECK(ds.rejection_rate() == doctest::Approx(0.6));
    CHECK(ds.quality_warning());
    for (const auto& p : ds.patches) {
        CHECK(*std::min_element(p.begin(), p.end()) == 0.0);
        CHECK(*std::max_element(p.begin(), p.end()) == 1.0);
    }
}

} // TEST_SUITE
