#pragma once

#include "topoembed/error.hpp"
#include "topoembed/geo.hpp"
#include "topoembed/manifest.hpp"
#include "topoembed/raster.hpp"

#include "CLI11.hpp"

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

namespace topoembed::cli {

using Runner = std::function<void(CLI::App&)>;

struct Registry {
    std::vector<std::pair<CLI::App*, Runner>> commands;

    CLI::App* add(CLI::App& app, const std::string& name, const std::string& description, Runner run);
};

void register_synth(CLI::App& app, Registry& reg);
void register_train(CLI::App& app, Registry& reg);
void register_scale_scan(CLI::App& app, Registry& reg);
void register_eval(CLI::App& app, Registry& reg);
void register_index(CLI::App& app, Registry& reg);
void register_retrieve(CLI::App& app, Registry& reg);
void register_train_probes(CLI::App& app, Registry& reg);
void register_grid_classify(CLI::App& app, Registry& reg);
void register_serve(CLI::App& app, Registry& reg);
void register_repro_desk(CLI::App& app, Registry& reg);

/// TOML reader that assigns section-less keys to the invoked subcommand.
class SubcommandConfig : public CLI::ConfigTOML {
public:
    std::string subcommand;
    std::vector<CLI::ConfigItem> from_config(std::istream& input) const override;
};

/// Manifest pre-filled with every option value of `sub`.
RunManifest manifest_for(const CLI::App& sub, std::uint64_t seed);

/// Writes `manifest` next to `primary_output`.
void finish(RunManifest& manifest, const std::filesystem::path& primary_output);

/// Parses WKT, or falls back to the raster's pixel-center bounds shrunk by
/// `margin_m` when `wkt` is empty.
AOIPolygon region_or_raster(const std::string& wkt, const ElevationRaster& raster, double margin_m);

/// "minlon,minlat,maxlon,maxlat"
BoundingBox parse_bbox(const std::string& text);

/// A CSV path, or inline "lon,lat;lon,lat".
std::vector<GeoCoordinate> parse_points(const std::string& text);

/// `n` locations inside both `polygon` and the raster.
std::vector<GeoCoordinate> sample_training_locations(const AOIPolygon& polygon, const ElevationRaster& raster,
                                                     std::size_t n, std::uint64_t seed);

void ensure_parent(const std::filesystem::path& path);

int exit_code_for(ErrorKind kind) noexcept;

} // namespace topoembed::cli
