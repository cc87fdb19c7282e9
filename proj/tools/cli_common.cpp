#include "cli_common.hpp"

#include "topoembed/labels.hpp"
#include "topoembed/sampling.hpp"
#include "topoembed/util.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace topoembed::cli {

CLI::App* Registry::add(CLI::App& app, const std::string& name, const std::string& description, Runner run) {
    auto* sub = app.add_subcommand(name, description);
    commands.emplace_back(sub, std::move(run));
    return sub;
}

std::vector<CLI::ConfigItem> SubcommandConfig::from_config(std::istream& input) const {
    auto items = CLI::ConfigTOML::from_config(input);
    for (auto& item : items) {
        if (item.parents.empty() && !subcommand.empty()) {
            item.parents.push_back(subcommand);
        }
    }
    return items;
}

RunManifest manifest_for(const CLI::App& sub, std::uint64_t seed) {
    RunManifest m;
    m.subcommand = sub.get_name();
    m.seed = seed;
    for (const auto* opt : sub.get_options()) {
        if (opt->get_lnames().empty() || opt->get_lnames().front() == "help" ||
            opt->get_lnames().front() == "config") {
            continue;
        }
        const std::string key = opt->get_lnames().front();
        if (opt->count() > 0) {
            const auto& results = opt->results();
            std::string joined;
            for (std::size_t i = 0; i < results.size(); ++i) {
                joined += (i ? "," : "") + results[i];
            }
            m.config[key] = opt->get_type_size() == 0 && joined.empty() ? "true" : joined;
        } else {
            m.config[key] = opt->get_default_str();
        }
    }
    return m;
}

void finish(RunManifest& manifest, const std::filesystem::path& primary_output) {
    manifest.write(manifest_path_for(primary_output));
}

AOIPolygon region_or_raster(const std::string& wkt, const ElevationRaster& raster, double margin_m) {
    if (!wkt.empty()) {
        auto poly = AOIPolygon::from_wkt(wkt);
        poly.check_non_degenerate();
        return poly;
    }
    auto b = raster.center_bounds();
    const double mid_lat = 0.5 * (b.min_lat + b.max_lat);
    const double dlat = margin_m / kMetersPerDegree;
    const double dlon = dlat / std::cos(mid_lat * std::numbers::pi / 180.0);
    b.min_lon += dlon;
    b.max_lon -= dlon;
    b.min_lat += dlat;
    b.max_lat -= dlat;
    require(b.min_lon < b.max_lon && b.min_lat < b.max_lat, ErrorKind::Capacity,
            "raster is too small for a " + format_double(margin_m) + " m margin");
    return AOIPolygon::from_bbox(b);
}

BoundingBox parse_bbox(const std::string& text) {
    const auto parts = split(text, ',');
    require(parts.size() == 4, ErrorKind::Domain, "bbox must be minlon,minlat,maxlon,maxlat");
    BoundingBox b;
    try {
        b = {std::stod(parts[0]), std::stod(parts[1]), std::stod(parts[2]), std::stod(parts[3])};
    } catch (const std::exception&) {
        fail(ErrorKind::Domain, "bbox has a non-numeric value: " + text);
    }
    make_coordinate(b.min_lon, b.min_lat);
    make_coordinate(b.max_lon, b.max_lat);
    require(b.min_lon < b.max_lon && b.min_lat < b.max_lat, ErrorKind::Domain, "bbox is empty: " + text);
    return b;
}

std::vector<GeoCoordinate> parse_points(const std::string& text) {
    std::vector<GeoCoordinate> out;
    if (std::filesystem::exists(text)) {
        for (const auto& e : read_coord_csv(text)) {
            out.push_back(e.coord);
        }
        return out;
    }
    for (const auto& item : split(text, ';')) {
        if (trim(item).empty()) {
            continue;
        }
        const auto xy = split(item, ',');
        require(xy.size() == 2, ErrorKind::Domain, "point must be lon,lat: " + item);
        try {
            out.push_back(make_coordinate(std::stod(xy[0]), std::stod(xy[1])));
        } catch (const std::invalid_argument&) {
            fail(ErrorKind::Domain, "point has a non-numeric value: " + item);
        }
    }
    return out;
}

std::vector<GeoCoordinate> sample_training_locations(const AOIPolygon& polygon, const ElevationRaster& raster,
                                                     std::size_t n, std::uint64_t seed) {
    const auto rb = raster.center_bounds();
    const auto pb = polygon.bounds();
    BoundingBox box{std::max(rb.min_lon, pb.min_lon), std::max(rb.min_lat, pb.min_lat),
                    std::min(rb.max_lon, pb.max_lon), std::min(rb.max_lat, pb.max_lat)};
    require(box.min_lon < box.max_lon && box.min_lat < box.max_lat, ErrorKind::Boundary,
            "train polygon does not overlap the raster");
    const auto sampler = AOIPolygon::from_bbox(box);
    std::vector<GeoCoordinate> out;
    for (std::uint64_t round = 0; out.size() < n && round < 64; ++round) {
        for (const auto& c : sample_coords_in_polygon(sampler, n, substream_seed(seed, "train/locations", round))) {
            if (polygon.contains(c) && out.size() < n) {
                out.push_back(c);
            }
        }
    }
    require(out.size() == n, ErrorKind::Capacity, "train polygon overlaps too little of the raster");
    return out;
}

void ensure_parent(const std::filesystem::path& path) {
    if (path.has_parent_path()) {
        std::filesystem::create_directories(path.parent_path());
    }
}

int exit_code_for(ErrorKind kind) noexcept {
    switch (kind) {
    case ErrorKind::Domain:
    case ErrorKind::Contract:
        return 2;
    case ErrorKind::Capacity:
    case ErrorKind::Boundary:
    case ErrorKind::DataQuality:
    case ErrorKind::EmptyClass:
        return 3;
    default:
        return 1;
    }
}

} // namespace topoembed::cli
