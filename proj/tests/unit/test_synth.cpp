#include "support.hpp"

#include "topoembed/desk.hpp"
#include "topoembed/synth.hpp"

#include <algorithm>
#include <cmath>

using namespace topoembed;

TEST_SUITE("synth") {

TEST_CASE("diamond-square sides") {
    CHECK(is_diamond_square_side(5));
    CHECK(is_diamond_square_side(257));
    CHECK_FALSE(is_diamond_square_side(3));
    CHECK_FALSE(is_diamond_square_side(100));
    CHECK_FALSE(is_diamond_square_side(256));
    CHECK(testing::error_kind_of([] { synth_fractal_raster(0, 100, 0.5, 30.0); }) == ErrorKind::Domain);
    CHECK(testing::error_kind_of([] { synth_fractal_raster(0, 65, 0.0, 30.0); }) == ErrorKind::Domain);
}

TEST_CASE("deterministic per seed") {
    const auto a = synth_fractal_raster(7, 129, 0.5, 30.0);
    const auto b = synth_fractal_raster(7, 129, 0.5, 30.0);
    const auto c = synth_fractal_raster(8, 129, 0.5, 30.0);
    CHECK(a.values() == b.values());
    CHECK(a.values() != c.values());
    CHECK(a.source_resolution() == 30.0);
}

TEST_CASE("each octave displaces its points by at most amplitude * roughness^(l+1)") {
    SynthOptions opts;
    opts.amplitude_m = 400.0;
    opts.base_elevation_m = 0.0;
    const double rough = 0.55;
    const int n = 129;
    const auto r = synth_fractal_raster(11, n, rough, 10.0, opts);
    auto h = [&](int row, int col) { return static_cast<double>(r.at(col, row)); };
    int level = 0;
    for (int step = n - 1; step > 1; step /= 2, ++level) {
        const int half = step / 2;
        const double bound = opts.amplitude_m * std::pow(rough, level + 1);
        double worst = 0.0;
        for (int row = half; row < n; row += step) {
            for (int col = half; col < n; col += step) {
                const double mean = 0.25 * (h(row - half, col - half) + h(row - half, col + half) +
                                            h(row + half, col - half) + h(row + half, col + half));
                worst = std::max(worst, std::abs(h(row, col) - mean));
            }
        }
        for (int row = 0; row < n; row += half) {
            for (int col = (row / half) % 2 == 0 ? half : 0; col < n; col += step) {
                double sum = 0.0;
                int count = 0;
                for (auto [dr, dc] : {std::pair{-half, 0}, {half, 0}, {0, -half}, {0, half}}) {
                    if (row + dr >= 0 && row + dr < n && col + dc >= 0 && col + dc < n) {
                        sum += h(row + dr, col + dc);
                        ++count;
                    }
                }
                worst = std::max(worst, std::abs(h(row, col) - sum / count));
            }
        }
        CAPTURE(level);
        CHECK(worst <= bound * (1.0 + 1e-6) + 1e-3);
        if (step <= 32) {
            // enough draws that the bound is nearly reached
            CHECK(worst >= 0.9 * bound);
        }
    }
}

TEST_CASE("rougher terrain carries relatively more fine-scale energy") {
    auto fine_ratio = [](double rough) {
        const auto r = synth_fractal_raster(2, 257, rough, 10.0);
        double fine = 0.0;
        double coarse = 0.0;
        for (int row = 0; row < 256; ++row) {
            for (int c = 0; c < 256; ++c) {
                fine += std::abs(r.at(c + 1, row) - r.at(c, row));
            }
        }
        for (int row = 0; row < 256; ++row) {
            for (int c = 0; c + 32 < 257; c += 32) {
                coarse += std::abs(r.at(c + 32, row) - r.at(c, row));
            }
        }
        return fine / 256.0 / (coarse / 8.0);
    };
    CHECK(fine_ratio(0.8) > fine_ratio(0.4));
}

TEST_CASE("planted features shape the terrain around their centers") {
    const auto base = constant_like(synth_fractal_raster(1, 129, 0.5, 10.0), 500.0f);
    const auto c = base.transform().pixel_center(64, 64);
    PlantedFeature peak{FeatureKind::Peak, c, 50.0, 80.0};
    const auto raised = plant_features(base, std::span<const PlantedFeature>(&peak, 1));
    CHECK(raised.sample(c) == doctest::Approx(580.0).epsilon(1e-6));
    CHECK(raised.at(0, 0) == doctest::Approx(500.0));
    PlantedFeature pit = peak;
    pit.kind = FeatureKind::Pit;
    CHECK(plant_features(base, std::span<const PlantedFeature>(&pit, 1)).sample(c) ==
          doctest::Approx(420.0).epsilon(1e-6));
    CHECK(feature_profile(PlantedFeature{FeatureKind::Saddle, c, 40.0, 10.0}, 0.0, 0.0) == 0.0);
    CHECK(feature_profile(PlantedFeature{FeatureKind::Saddle, c, 40.0, 10.0}, 40.0, 0.0) > 0.0);
    CHECK(feature_profile(PlantedFeature{FeatureKind::Saddle, c, 40.0, 10.0}, 0.0, 40.0) < 0.0);
}

TEST_CASE("benchmark scenes keep labels inside the region and features apart") {
    auto cfg = ridge_scene(3);
    const auto scene = make_scene(cfg);
    REQUIRE(scene.labels.at("ridge").size() == 60);
    REQUIRE(scene.features.size() == 60);
    for (const auto& p : scene.labels.at("ridge")) {
        CHECK(scene.region.contains(p));
    }
    for (std::size_t i = 0; i < scene.features.size(); ++i) {
        CHECK(scene.feature_class[i] == "ridge");
        CHECK(distance_to_axis(scene.features[i], scene.features[i].center) == 0.0);
    }
    const auto again = make_scene(cfg);
    CHECK(again.raster.values() == scene.raster.values());
    CHECK(again.labels.at("ridge") == scene.labels.at("ridge"));
}

} // TEST_SUITE
