#pragma once

#include "topoembed/baselines.hpp"
#include "topoembed/labels.hpp"
#include "topoembed/svm.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace topoembed {

/// Seeds base, base+1, ..., base+count-1.
std::vector<std::uint64_t> seed_range(std::uint64_t base, int count);

struct MeanStd {
    double mean = 0.0;
    double std = 0.0;  // population standard deviation
};
MeanStd mean_std(std::span<const double> values);

// Scale scan ------------------------------------------------------------

/// Radii 8*s0*2^i for i in [lo, hi].
std::vector<double> radius_ladder(double base_resolution, int lo, int hi, int half_extent = kPatchHalfExtent);

struct ScaleScanConfig {
    std::vector<double> radii;
    std::size_t n = 1000;
    double train_fraction = 0.8;
    std::vector<std::uint64_t> seeds = seed_range(0, 10);
    CnnConfig cnn;
    int jobs = 1;
};

struct ScaleRecord {
    double radius_m = 0.0;
    double resolution = 0.0;
    double mean_accuracy = 0.0;
    double std_accuracy = 0.0;
    std::vector<double> accuracies;  // one per seed, in seed order
};

struct ScaleScanResult {
    std::vector<ScaleRecord> records;  // ascending radius
    double best_resolution = 0.0;
    std::vector<std::uint64_t> seeds;

    /// Argmax resolution for a single seed's accuracies.
    double best_resolution_for_seed(std::size_t seed_index) const;
    std::string to_csv() const;
    std::string to_markdown() const;
};

/// Per seed: one balanced dataset of size n; per radius: train the probe CNN
/// on the first train_fraction and score the rest. Ties in mean accuracy
/// favour the finer resolution.
ScaleScanResult scale_scan(std::span<const GeoCoordinate> positives, const AOIPolygon& region,
                           const ElevationRaster& raster, const ScaleScanConfig& config);

// Probe classification ----------------------------------------------------

struct ProbeConfig {
    std::size_t n_train = 1000;
    std::size_t n_test = 200;
    std::vector<std::uint64_t> seeds = seed_range(0, 10);
    SvmConfig svm;
    /// Permutes training labels (chance-level control).
    bool shuffle_labels = false;
    int jobs = 1;
};

struct ProbeResult {
    std::string class_name;
    std::string model;
    double mean_accuracy = 0.0;
    double std_accuracy = 0.0;
    std::size_t n_train = 0;
    std::size_t n_test = 0;
    std::size_t n_seeds = 0;
    std::vector<double> accuracies;
    std::size_t rejected = 0;

    static std::string csv_header();
    std::string csv_row() const;
    std::string markdown_row() const;
};

std::string probe_markdown_table(std::span<const ProbeResult> results);

/// Balanced stratified train/test split of `pool` per seed; fits the SVM on
/// embeddings of the training half. Pool must hold n_train/2 + n_test/2 of
/// each label.
ProbeResult probe_classification(const EmbeddingModelHandle& model, const LabeledCoordSet& pool,
                                 const ElevationRaster& raster, const ScaleSpec& scale, const ProbeConfig& config);

/// Builds a fresh balanced dataset from `positives` inside `region` for each
/// seed, then proceeds as above.
ProbeResult probe_classification(const EmbeddingModelHandle& model, std::span<const GeoCoordinate> positives,
                                 const AOIPolygon& region, const ClassTag& tag, const ElevationRaster& raster,
                                 const ScaleSpec& scale, const ProbeConfig& config);

// Grid classification -----------------------------------------------------

struct ClassProbe {
    std::string class_name;
    double scale = 0.0;  // meters/pixel the probe was trained at
    LinearSvm svm;

    /// Sigmoid of the SVM margin; > 0.5 exactly when the SVM says positive.
    double score(std::span<const double> embedding) const;
};

struct ProbeSet {
    std::string model_hash;
    std::vector<ClassProbe> probes;

    /// Probe of `class_name` whose training scale is closest to `scale`.
    const ClassProbe* find(const std::string& class_name, double scale) const;
    std::vector<std::string> class_names() const;
};

ClassProbe train_probe(const EmbeddingModelHandle& model, const LabeledCoordSet& dataset,
                       const ElevationRaster& raster, const ScaleSpec& scale, const SvmConfig& config = {});

void save_probes(const std::filesystem::path& path, const ProbeSet& probes);
ProbeSet load_probes(const std::filesystem::path& path);

struct GridDetection {
    GeoCoordinate coord;
    std::string class_name;
    double score = 0.0;
};

struct GridMap {
    double scale = 0.0;
    double stride_m = 0.0;
    std::size_t points = 0;
    std::vector<GridDetection> detections;
};

struct GridConfig {
    std::vector<double> scales;
    /// Lattice spacing; 0 means one patch radius at each scale.
    double stride_m = 0.0;
    double threshold = 0.5;
    /// Patches with less raw relief are featureless and never flagged.
    double min_relief_m = 0.01;
    /// Classes to evaluate; empty means every class in the probe set.
    std::vector<std::string> classes;
};

/// Lattice points inside `region` spaced stride_m apart (cell-centered on
/// the region's bounding box).
std::vector<GeoCoordinate> region_lattice(const AOIPolygon& region, double stride_m);

/// Throws Boundary when the region's bounding box leaves the raster and
/// Domain for unknown classes.
std::vector<GridMap> grid_classify(const AOIPolygon& region, const EmbeddingModelHandle& model,
                                   const ProbeSet& probes, const ElevationRaster& raster, const GridConfig& config);

/// FeatureCollection of points with properties {class, scale, score}.
std::string to_geojson(std::span<const GridMap> maps);

// Retrieval ---------------------------------------------------------------

/// Exact nearest-neighbour store of (coordinate, embedding) pairs.
class EmbeddingIndex {
public:
    EmbeddingIndex() = default;
    EmbeddingIndex(int dim, double scale, std::string model_hash);

    void add(const GeoCoordinate& coord, std::span<const double> embedding);

    std::size_t size() const noexcept { return coords_.size(); }
    bool empty() const noexcept { return coords_.empty(); }
    int dim() const noexcept { return dim_; }
    double scale() const noexcept { return scale_; }
    const std::string& model_hash() const noexcept { return model_hash_; }
    const GeoCoordinate& coord(std::size_t i) const { return coords_[i]; }
    std::span<const double> vector(std::size_t i) const;
    std::size_t rejected = 0;

    /// `<prefix>.f64` (row-major little-endian float64), `<prefix>.csv`
    /// (aligned lon,lat) and `<prefix>.json` (manifest).
    void save(const std::filesystem::path& prefix) const;
    static EmbeddingIndex load(const std::filesystem::path& prefix);

private:
    int dim_ = 0;
    double scale_ = 0.0;
    std::string model_hash_;
    std::vector<GeoCoordinate> coords_;
    std::vector<double> data_;
};

EmbeddingIndex build_embedding_index(std::span<const GeoCoordinate> coords, const EmbeddingModelHandle& model,
                                     const ElevationRaster& raster, const ScaleSpec& scale);

struct Neighbor {
    GeoCoordinate coord;
    double distance = 0.0;
};

/// Ascending Euclidean distance, ties by (lon, lat). Capacity error when k
/// exceeds the index size.
std::vector<Neighbor> knn_search(const EmbeddingIndex& index, std::span<const double> query, std::size_t k);

/// Embeds each query at the index scale, averages, then searches. Boundary
/// or DataQuality errors when a query cannot be embedded.
std::vector<Neighbor> knn_retrieve(const EmbeddingIndex& index, const EmbeddingModelHandle& model,
                                   const ElevationRaster& raster, std::span<const GeoCoordinate> queries,
                                   std::size_t k);

std::string format_neighbors_csv(std::span<const Neighbor> neighbors);

// Geographic hygiene --------------------------------------------------------

/// Number of coordinates inside `train_region`.
std::size_t count_inside(std::span<const GeoCoordinate> coords, const AOIPolygon& train_region);

/// Throws Contract naming the first offending coordinate.
void require_outside(std::span<const GeoCoordinate> coords, const AOIPolygon& train_region);

} // namespace topoembed
