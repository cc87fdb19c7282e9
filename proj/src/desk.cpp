#include "topoembed/desk.hpp"

#include "topoembed/error.hpp"
#include "topoembed/sampling.hpp"
#include "topoembed/util.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

namespace topoembed {

namespace {

constexpr double kMetersPerDegree = 111319.49079327357;

std::pair<double, double> east_north(const GeoCoordinate& origin, const GeoCoordinate& p) {
    const double cos_lat = std::cos(origin.lat * std::numbers::pi / 180.0);
    return {(p.lon - origin.lon) * kMetersPerDegree * cos_lat, (p.lat - origin.lat) * kMetersPerDegree};
}

} // namespace

Scene make_scene(const SceneConfig& config) {
    require(config.spacing_m > 0.0 && config.margin_m >= 0.0, ErrorKind::Domain, "invalid scene layout");
    SynthOptions opts;
    opts.amplitude_m = config.amplitude_m;
    opts.center = config.center;
    auto base = synth_fractal_raster(config.seed, config.side, config.roughness, config.resolution, opts);

    const double half = 0.5 * (config.side - 1) * config.resolution - config.margin_m;
    require(half > config.spacing_m, ErrorKind::Domain, "raster too small for the requested margin");
    const auto sw = offset_by_meters(config.center, -half, -half);
    const auto ne = offset_by_meters(config.center, half, half);
    Scene scene{base, AOIPolygon::from_bbox({sw.lon, sw.lat, ne.lon, ne.lat}), {}, {}, {}};

    const int per_axis = static_cast<int>(std::floor(2.0 * half / config.spacing_m));
    std::vector<std::pair<int, int>> slots;
    for (int i = 0; i < per_axis; ++i) {
        for (int j = 0; j < per_axis; ++j) {
            slots.emplace_back(i, j);
        }
    }
    std::size_t wanted = 0;
    for (const auto& c : config.classes) {
        require(c.count >= 0, ErrorKind::Domain, "class counts must be non-negative");
        wanted += static_cast<std::size_t>(c.count);
    }
    require(wanted <= slots.size(), ErrorKind::Capacity,
            "scene holds " + std::to_string(slots.size()) + " features, " + std::to_string(wanted) + " requested");
    auto rng = make_rng(config.seed, "scene/layout");
    std::shuffle(slots.begin(), slots.end(), rng);
    std::uniform_real_distribution<double> unit(0.0, 1.0);

    std::size_t next = 0;
    for (const auto& c : config.classes) {
        auto& labels = scene.labels[c.name];
        for (int n = 0; n < c.count; ++n) {
            const auto [i, j] = slots[next++];
            const double wiggle = config.spacing_m / 6.0;
            const double east = -half + (j + 0.5) * config.spacing_m + (unit(rng) - 0.5) * 2.0 * wiggle;
            const double north = -half + (i + 0.5) * config.spacing_m + (unit(rng) - 0.5) * 2.0 * wiggle;
            PlantedFeature f;
            f.kind = c.kind;
            f.center = offset_by_meters(config.center, east, north);
            f.size_m = c.size_m * std::exp((2.0 * unit(rng) - 1.0) * std::log(std::max(1.0, c.size_spread)));
            f.height_m = c.height_m;
            f.length_m = c.length_m;
            f.orientation_rad = c.orientation_rad >= 0.0 ? c.orientation_rad : unit(rng) * std::numbers::pi;
            const double r = c.jitter_m * std::sqrt(unit(rng));
            const double theta = 2.0 * std::numbers::pi * unit(rng);
            labels.push_back(offset_by_meters(f.center, r * std::cos(theta), r * std::sin(theta)));
            scene.features.push_back(f);
            scene.feature_class.push_back(c.name);
        }
    }
    scene.raster = plant_features(base, scene.features);
    return scene;
}

SceneConfig peak_pit_scene(std::uint64_t seed) {
    SceneConfig c;
    c.seed = seed;
    c.side = 2049;
    c.resolution = 15.0;
    c.spacing_m = 700.0;
    c.classes = {{"peak", FeatureKind::Peak, 620, 70.0, 60.0},
                 {"pit", FeatureKind::Pit, 620, 70.0, 60.0}};
    return c;
}

SceneConfig scale_scan_scene(std::uint64_t seed) {
    SceneConfig c;
    c.seed = seed;
    c.side = 2049;
    c.resolution = 7.5;
    c.spacing_m = 520.0;
    c.margin_m = 600.0;
    c.classes = {{"peak", FeatureKind::Peak, 600, 70.0, 40.0, 0.0, 140.0}};
    return c;
}

SceneConfig multiscale_scene(std::uint64_t seed, GeoCoordinate center, double spread) {
    SceneConfig c;
    c.seed = seed;
    c.side = 2049;
    c.resolution = 10.0;
    c.spacing_m = 500.0;
    c.center = center;
    c.classes = {{"peak", FeatureKind::Peak, 260, 40.0, 40.0, 0.0, 0.0, -1.0, spread},
                 {"saddle", FeatureKind::Saddle, 260, 50.0, 40.0, 0.0, 0.0, -1.0, spread},
                 {"ridge", FeatureKind::Ridge, 260, 25.0, 30.0, 300.0, 0.0, -1.0, spread},
                 {"cliff", FeatureKind::Cliff, 260, 30.0, 40.0, 300.0, 0.0, -1.0, spread}};
    return c;
}

SceneConfig ridge_scene(std::uint64_t seed) {
    SceneConfig c;
    c.seed = seed;
    c.side = 1025;
    c.resolution = 10.0;
    c.spacing_m = 500.0;
    c.margin_m = 500.0;
    c.classes = {{"ridge", FeatureKind::Ridge, 60, 35.0, 40.0, 400.0, 0.0, 0.0}};
    return c;
}

double distance_to_axis(const PlantedFeature& f, const GeoCoordinate& p) {
    const auto [east, north] = east_north(f.center, p);
    const double u = east * std::cos(f.orientation_rad) + north * std::sin(f.orientation_rad);
    const double v = -east * std::sin(f.orientation_rad) + north * std::cos(f.orientation_rad);
    const double excess = std::max(0.0, std::abs(u) - 0.5 * f.length_m);
    return std::hypot(excess, v);
}

DeskSeeds DeskSeeds::shifted(std::uint64_t offset) {
    DeskSeeds s;
    for (auto* v : {&s.training_scene, &s.training, &s.peak_pit, &s.scale_scan, &s.multiscale, &s.ridge}) {
        *v += offset;
    }
    return s;
}

SceneConfig training_scene(std::uint64_t seed) { return multiscale_scene(seed, {12.5, 47.5}); }

TrainConfig desk_train_config(const Scene& scene, int k, bool adversarial, long long steps, std::uint64_t seed) {
    TrainConfig c;
    c.k = k;
    c.scales = kBenchmarkScales;
    c.max_steps = steps;
    c.seed = seed;
    c.stop_on_convergence = false;
    if (adversarial) {
        c.lambda_rec = 100.0;
        c.lambda_adv = 1.0;
    }
    c.locations = sample_coords_in_polygon(scene.region, 4000, substream_seed(seed, "desk/train-locations"));
    return c;
}

LabeledCoordSet peak_pit_pool(const Scene& scene) {
    LabeledCoordSet pool{{}, {"peak", "natural=peak"}, scene.region, 0};
    for (const auto& c : scene.labels.at("peak")) {
        pool.entries.push_back({c, 1});
    }
    for (const auto& c : scene.labels.at("pit")) {
        pool.entries.push_back({c, 0});
    }
    return pool;
}

std::vector<ProbeResult> multiscale_benchmark(const EmbeddingModelHandle& model, const Scene& scene,
                                              std::span<const double> scales, const ProbeConfig& config) {
    std::vector<ProbeResult> out;
    for (const auto& [name, coords] : scene.labels) {
        for (double s : scales) {
            auto r = probe_classification(model, coords, scene.region, ClassTag{name, "landform=" + name},
                                          scene.raster, ScaleSpec::from_resolution(s), config);
            r.class_name = name + "@" + format_double(s);
            out.push_back(std::move(r));
        }
    }
    return out;
}

RidgeRetrievalResult ridge_retrieval_oracle(const EmbeddingModelHandle& model, const Scene& scene, double scale,
                                            std::uint64_t seed, int pairs, std::size_t random_points) {
    require(pairs >= 1 && scene.features.size() >= 2 * static_cast<std::size_t>(pairs), ErrorKind::Capacity,
            "not enough ridges for the requested query pairs");
    auto rng = make_rng(seed, "ridge-oracle/points");
    std::uniform_real_distribution<double> along(-0.4, 0.4);
    RidgeRetrievalResult result;
    for (const auto& f : scene.features) {
        const double t = along(rng) * f.length_m;
        result.indexed.push_back(
            offset_by_meters(f.center, t * std::cos(f.orientation_rad), t * std::sin(f.orientation_rad)));
    }
    const std::size_t ridge_points = result.indexed.size();
    const auto random = sample_coords_in_polygon(scene.region, random_points, substream_seed(seed, "ridge-oracle/random"));
    result.indexed.insert(result.indexed.end(), random.begin(), random.end());

    const auto index = build_embedding_index(result.indexed, model, scene.raster, ScaleSpec::from_resolution(scale));
    result.index_size = index.size();
    const auto on_ridge = [&](const GeoCoordinate& p) {
        return std::any_of(scene.features.begin(), scene.features.end(),
                           [&](const PlantedFeature& f) { return distance_to_axis(f, p) <= 2.0 * f.size_m; });
    };
    std::vector<std::size_t> order(ridge_points);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::shuffle(order.begin(), order.end(), rng);
    for (int q = 0; q < pairs; ++q) {
        const std::vector<GeoCoordinate> query{result.indexed[order[2 * q]], result.indexed[order[2 * q + 1]]};
        const auto hits = knn_retrieve(index, model, scene.raster, query, 10);
        const auto n = std::count_if(hits.begin(), hits.end(), [&](const Neighbor& h) { return on_ridge(h.coord); });
        result.precision_at_10.push_back(static_cast<double>(n) / 10.0);
    }
    result.mean_precision = mean_std(result.precision_at_10).mean;
    return result;
}

} // namespace topoembed
