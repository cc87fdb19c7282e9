#pragma once

#include "topoembed/evaluation.hpp"
#include "topoembed/geo.hpp"
#include "topoembed/raster.hpp"
#include "topoembed/synth.hpp"
#include "topoembed/training.hpp"

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace topoembed {

/// One planted landform class of a synthetic benchmark scene.
struct SceneClass {
    std::string name;
    FeatureKind kind = FeatureKind::Peak;
    int count = 0;
    double size_m = 60.0;
    double height_m = 50.0;
    double length_m = 0.0;
    /// Labels are displaced from the true feature center by up to this much.
    double jitter_m = 0.0;
    /// Axis orientation; negative means uniformly random.
    double orientation_rad = -1.0;
    /// Sizes are log-uniform in [size_m/spread, size_m*spread].
    double size_spread = 1.0;
};

struct SceneConfig {
    std::uint64_t seed = 0;
    int side = 2049;
    double resolution = 10.0;
    double roughness = 0.5;
    double amplitude_m = 300.0;
    GeoCoordinate center{7.5, 47.5};
    /// Features occupy distinct cells of a lattice with this spacing.
    double spacing_m = 600.0;
    /// Labels and features keep this distance from the raster edge.
    double margin_m = 800.0;
    std::vector<SceneClass> classes;
};

struct Scene {
    ElevationRaster raster;
    AOIPolygon region;
    std::vector<PlantedFeature> features;
    std::vector<std::string> feature_class;  // aligned with features
    std::map<std::string, std::vector<GeoCoordinate>> labels;
};

/// Fractal terrain plus planted classes on a shuffled lattice. Deterministic
/// per config.
Scene make_scene(const SceneConfig& config);

/// Peaks vs pits at 30 m/pixel footprint.
SceneConfig peak_pit_scene(std::uint64_t seed);
/// Peaks whose footprint matches 30 m/pixel, on a 7.5 m grid.
SceneConfig scale_scan_scene(std::uint64_t seed);
/// Peaks, saddles, ridges and cliffs at mixed sizes.
SceneConfig multiscale_scene(std::uint64_t seed, GeoCoordinate center = {7.5, 47.5}, double spread = 2.5);
/// East-west ridges for retrieval.
SceneConfig ridge_scene(std::uint64_t seed);

/// Distance in meters from `p` to the feature's axis segment (its center
/// for point-like features).
double distance_to_axis(const PlantedFeature& feature, const GeoCoordinate& p);

/// Scene and training seeds of one desk run.
struct DeskSeeds {
    std::uint64_t training_scene = 101;
    std::uint64_t training = 5;
    std::uint64_t peak_pit = 7;
    std::uint64_t scale_scan = 11;
    std::uint64_t multiscale = 303;
    std::uint64_t ridge = 1;

    /// Every seed shifted by `offset` (offset 0 gives the defaults).
    static DeskSeeds shifted(std::uint64_t offset);
};

/// Training scene inside the train polygon used by the desk benchmarks.
SceneConfig training_scene(std::uint64_t seed);

/// Self-supervised training on uniformly sampled scene locations at
/// scales {15, 30, 60}.
TrainConfig desk_train_config(const Scene& scene, int k, bool adversarial, long long steps, std::uint64_t seed);

/// Peaks labeled 1 and pits labeled 0.
LabeledCoordSet peak_pit_pool(const Scene& scene);

inline const std::vector<double> kBenchmarkScales{15.0, 30.0, 60.0};

/// Every (class, scale) pair of a multi-scale scene probed with one model.
std::vector<ProbeResult> multiscale_benchmark(const EmbeddingModelHandle& model, const Scene& scene,
                                              std::span<const double> scales, const ProbeConfig& config);

struct RidgeRetrievalResult {
    std::size_t index_size = 0;
    std::vector<double> precision_at_10;  // one per query pair
    double mean_precision = 0.0;
    std::vector<GeoCoordinate> indexed;    // every coordinate offered to the index
};

/// Indexes one point on each ridge plus `random_points` uniform points and
/// queries `pairs` pairs of ridge points. A hit lies within two cross-section
/// sigmas of a ridge axis.
RidgeRetrievalResult ridge_retrieval_oracle(const EmbeddingModelHandle& model, const Scene& scene, double scale,
                                            std::uint64_t seed, int pairs = 10, std::size_t random_points = 300);

} // namespace topoembed
