#include "support.hpp"

#include "topoembed/desk.hpp"
#include "topoembed/evaluation.hpp"
#include "topoembed/patch.hpp"
#include "topoembed/synth.hpp"

#include "json.hpp"

#include <cmath>

using namespace topoembed;

namespace {

Scene small_peak_pit_scene() {
    SceneConfig c;
    c.seed = 4;
    c.side = 513;
    c.resolution = 15.0;
    c.spacing_m = 500.0;
    c.classes = {{"peak", FeatureKind::Peak, 60, 70.0, 60.0}, {"pit", FeatureKind::Pit, 60, 70.0, 60.0}};
    return make_scene(c);
}

const Scene& scene() {
    static const Scene s = small_peak_pit_scene();
    return s;
}

LabeledCoordSet pool_of(const Scene& s) {
    LabeledCoordSet pool{{}, {"peak", "natural=peak"}, s.region, 0};
    for (const auto& c : s.labels.at("peak")) pool.entries.push_back({c, 1});
    for (const auto& c : s.labels.at("pit")) pool.entries.push_back({c, 0});
    return pool;
}

} // namespace

TEST_SUITE("evaluation") {

TEST_CASE("summary statistics") {
    const std::vector<double> v{1.0, 2.0, 3.0, 4.0};
    const auto ms = mean_std(v);
    CHECK(ms.mean == doctest::Approx(2.5));
    CHECK(ms.std == doctest::Approx(std::sqrt(1.25)));
    CHECK(mean_std(std::vector<double>{7.0}).std == 0.0);
    CHECK(seed_range(3, 2) == std::vector<std::uint64_t>{3, 4});
    const auto ladder = radius_ladder(7.5, 0, 5);
    REQUIRE(ladder.size() == 6);
    CHECK(ladder.front() == 60.0);
    CHECK(ladder.back() == 1920.0);
    CHECK(radius_ladder(10.0, -1, 1) == std::vector<double>{40.0, 80.0, 160.0});
}

TEST_CASE("exact nearest neighbours with deterministic ties") {
    EmbeddingIndex index(2, 30.0, "h");
    index.add({1.0, 0.0}, std::vector<double>{0.0, 0.0});
    index.add({0.5, 0.0}, std::vector<double>{1.0, 0.0});
    index.add({0.2, 0.0}, std::vector<double>{0.0, 1.0});
    index.add({0.3, 0.0}, std::vector<double>{3.0, 4.0});
    const std::vector<double> q{0.0, 0.0};
    const auto hits = knn_search(index, q, 4);
    REQUIRE(hits.size() == 4);
    CHECK(hits[0].coord.lon == 1.0);
    CHECK(hits[0].distance == 0.0);
    CHECK(hits[1].coord.lon == 0.2);  // tie at distance 1 broken by longitude
    CHECK(hits[2].coord.lon == 0.5);
    CHECK(hits[3].distance == doctest::Approx(5.0));
    CHECK(knn_search(index, q, 0).empty());
    CHECK(testing::error_kind_of([&] { knn_search(index, q, 5); }) == ErrorKind::Capacity);
    CHECK(testing::error_kind_of([&] { knn_search(index, std::vector<double>{1.0}, 1); }) == ErrorKind::Contract);
    CHECK(testing::error_kind_of([&] { index.add({}, std::vector<double>{1.0}); }) == ErrorKind::Contract);

    const auto dir = testing::temp_dir("index");
    index.save(dir / "idx");
    const auto back = EmbeddingIndex::load(dir / "idx");
    CHECK(back.size() == 4);
    CHECK(back.scale() == 30.0);
    CHECK(back.model_hash() == "h");
    for (std::size_t i = 0; i < 4; ++i) {
        CHECK(back.coord(i) == index.coord(i));
        CHECK(std::equal(back.vector(i).begin(), back.vector(i).end(), index.vector(i).begin()));
    }
    const auto csv = format_neighbors_csv(hits);
    CHECK(csv.rfind("lon,lat,distance\n", 0) == 0);
}

TEST_CASE("self retrieval returns the indexed point at distance zero") {
    const auto model = EmbeddingModelHandle::topo2vec(std::make_shared<const ModelBundle>(init_params(3, 4)));
    const auto& s = scene();
    std::vector<GeoCoordinate> coords(s.labels.at("peak").begin(), s.labels.at("peak").begin() + 20);
    const auto index = build_embedding_index(coords, model, s.raster, ScaleSpec::from_resolution(30.0));
    REQUIRE(index.size() == 20);
    CHECK(index.dim() == 128);
    CHECK(index.model_hash() == model.checkpoint_hash());
    for (std::size_t i : {0u, 7u, 19u}) {
        const std::vector<GeoCoordinate> q{index.coord(i)};
        const auto hits = knn_retrieve(index, model, s.raster, q, 3);
        CHECK(hits[0].coord == index.coord(i));
        CHECK(hits[0].distance == 0.0);
    }
    const std::vector<GeoCoordinate> outside{{0.0, 0.0}};
    CHECK(testing::error_kind_of([&] { knn_retrieve(index, model, s.raster, outside, 1); }) == ErrorKind::Boundary);
}

TEST_CASE("probe classification separates peaks from pits") {
    const auto& s = scene();
    ProbeConfig cfg;
    cfg.n_train = 60;
    cfg.n_test = 40;
    cfg.seeds = seed_range(0, 3);
    const auto r = probe_classification(EmbeddingModelHandle::id(), pool_of(s), s.raster,
                                        ScaleSpec::from_resolution(30.0), cfg);
    CHECK(r.accuracies.size() == 3);
    CHECK(r.mean_accuracy >= 0.95);
    CHECK(r.n_train == 60);
    CHECK(r.model == "id");
    CHECK(ProbeResult::csv_header().rfind("class,model,", 0) == 0);
    CHECK(r.markdown_row().rfind("| id |", 0) == 0);

    cfg.n_train = 200;
    CHECK(testing::error_kind_of([&] {
              probe_classification(EmbeddingModelHandle::id(), pool_of(s), s.raster, ScaleSpec::from_resolution(30.0),
                                   cfg);
          }) == ErrorKind::Capacity);
}

TEST_CASE("geographic hygiene") {
    const auto train = AOIPolygon::from_bbox({10.0, 45.0, 15.0, 50.0});
    const std::vector<GeoCoordinate> ok{{7.5, 47.5}, {8.0, 46.0}};
    const std::vector<GeoCoordinate> bad{{7.5, 47.5}, {12.0, 47.0}};
    CHECK(count_inside(ok, train) == 0);
    CHECK(count_inside(bad, train) == 1);
    CHECK_NOTHROW(require_outside(ok, train));
    CHECK(testing::error_kind_of([&] { require_outside(bad, train); }) == ErrorKind::Contract);
}

TEST_CASE("grid classification and probe persistence") {
    const auto& s = scene();
    const auto model = EmbeddingModelHandle::id();
    ProbeSet probes{model.checkpoint_hash(), {}};
    probes.probes.push_back(train_probe(model, pool_of(s), s.raster, ScaleSpec::from_resolution(30.0)));
    probes.probes.back().class_name = "peak";
    probes.probes.push_back(probes.probes.back());
    probes.probes.back().scale = 60.0;
    CHECK(probes.find("peak", 40.0)->scale == 30.0);
    CHECK(probes.find("peak", 50.0)->scale == 60.0);
    CHECK(probes.find("saddle", 30.0) == nullptr);
    CHECK(probes.class_names() == std::vector<std::string>{"peak"});

    const auto dir = testing::temp_dir("probes");
    save_probes(dir / "p.json", probes);
    const auto back = load_probes(dir / "p.json");
    REQUIRE(back.probes.size() == 2);
    const auto z = model.embed_one(std::vector<double>(289, 0.25));
    CHECK(back.probes[0].score(z) == probes.probes[0].score(z));

    // a peak lattice point near the first labeled peak should be flagged
    const auto b = s.raster.center_bounds();
    const auto inner = AOIPolygon::from_bbox({b.min_lon + 0.2 * (b.max_lon - b.min_lon),
                                              b.min_lat + 0.2 * (b.max_lat - b.min_lat),
                                              b.max_lon - 0.2 * (b.max_lon - b.min_lon),
                                              b.max_lat - 0.2 * (b.max_lat - b.min_lat)});
    GridConfig grid;
    grid.scales = {30.0, 60.0};
    const auto maps = grid_classify(inner, model, probes, s.raster, grid);
    REQUIRE(maps.size() == 2);
    CHECK(maps[0].scale == 30.0);
    CHECK(maps[0].stride_m == 240.0);
    CHECK(maps[0].points == region_lattice(inner, 240.0).size());
    CHECK_FALSE(maps[0].detections.empty());
    const auto fc = nlohmann::json::parse(to_geojson(maps));
    CHECK(fc["type"] == "FeatureCollection");
    CHECK(fc["features"].size() == maps[0].detections.size() + maps[1].detections.size());

    const auto flat = constant_like(s.raster, 500.0f);
    const auto none = grid_classify(inner, model, probes, flat, grid);
    REQUIRE(none.size() == 2);
    CHECK(none[0].detections.empty());
    CHECK(nlohmann::json::parse(to_geojson(none))["features"].empty());

    grid.classes = {"saddle"};
    CHECK(testing::error_kind_of([&] { grid_classify(inner, model, probes, s.raster, grid); }) == ErrorKind::Domain);
    grid.classes.clear();
    CHECK(testing::error_kind_of([&] {
              grid_classify(AOIPolygon::from_bbox({0.0, 0.0, 1.0, 1.0}), model, probes, s.raster, grid);
          }) == ErrorKind::Boundary);
}

TEST_CASE("lattice spacing") {
    const auto box = AOIPolygon::from_bbox({7.0, 47.0, 7.01, 47.01});
    const auto pts = region_lattice(box, 100.0);
    CHECK(pts.size() > 50);
    for (const auto& p : pts) {
        CHECK(box.contains(p));
    }
}

} // TEST_SUITE
