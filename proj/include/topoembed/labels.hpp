#pragma once

#include "topoembed/geo.hpp"
#include "topoembed/patch.hpp"
#include "topoembed/raster.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace topoembed {

class OverpassClient;

struct ClassTag {
    std::string name;
    std::string osm_selector;  // key=value
};

/// Tags for the topographic and topography-correlated classes; unknown names
/// throw Domain. User-defined classes are built with make_class_tag().
ClassTag known_class_tag(std::string_view name);
ClassTag make_class_tag(std::string name, std::string osm_selector);
bool is_valid_selector(std::string_view selector) noexcept;
std::vector<std::string> known_class_names();

struct LabeledCoord {
    GeoCoordinate coord;
    int label = 0;
};

struct LabeledCoordSet {
    std::vector<LabeledCoord> entries;
    ClassTag class_tag;
    AOIPolygon region;
    std::uint64_t seed = 0;

    std::size_t count(int label) const noexcept;
};

/// Coordinates closer than this (in both axes, degrees) are duplicates.
inline constexpr double kDuplicateDegrees = 1e-6;

/// CSV with header `lon,lat[,label]`. Missing labels read as 1.
std::vector<LabeledCoord> read_coord_csv(const std::filesystem::path& path);
std::vector<LabeledCoord> parse_coord_csv(std::string_view text);
std::string format_coord_csv(std::span<const GeoCoordinate> coords);
std::string format_coord_csv(std::span<const LabeledCoord> coords);

/// Sorted by (lon, lat), deduplicated, in-region class coordinates from a
/// CSV path or, when `source` starts with http(s)://, from an Overpass
/// endpoint through `client`. Throws EmptyClass when nothing survives.
std::vector<GeoCoordinate> load_class_coords(const std::string& source, const ClassTag& tag, const AOIPolygon& region,
                                             OverpassClient* client = nullptr);

/// Filters, sorts and deduplicates coordinates.
std::vector<GeoCoordinate> canonical_coords(std::vector<GeoCoordinate> coords, const AOIPolygon& region);

/// total_n/2 positives drawn without replacement plus total_n/2 uniform
/// in-region negatives, shuffled by seed. Throws Capacity when positives
/// are short and Domain for odd total_n.
LabeledCoordSet build_class_dataset(std::span<const GeoCoordinate> positives, const AOIPolygon& region,
                                    std::size_t total_n, std::uint64_t seed, ClassTag tag = {});

/// Normalized patches for the coordinates that survive extraction, in input
/// order. `source_index[i]` is the input position of patch i.
struct ImageDataset {
    std::vector<std::vector<double>> patches;
    std::vector<int> labels;
    std::vector<GeoCoordinate> coords;
    std::vector<std::size_t> source_index;
    std::size_t rejected = 0;
    std::size_t requested = 0;

    std::size_t size() const noexcept { return patches.size(); }
    double rejection_rate() const noexcept;
    /// More than 20% of the requested coordinates were dropped.
    bool quality_warning() const noexcept { return rejection_rate() > 0.2; }
};

ImageDataset to_image_dataset(std::span<const GeoCoordinate> coords, const ScaleSpec& scale,
                              const ElevationRaster& raster);
ImageDataset to_image_dataset(const LabeledCoordSet& set, const ScaleSpec& scale, const ElevationRaster& raster);
ImageDataset to_image_dataset(std::span<const LabeledCoord> entries, const ScaleSpec& scale,
                              const ElevationRaster& raster);

} // namespace topoembed
