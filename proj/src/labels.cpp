#include "topoembed/labels.hpp"

#include "topoembed/error.hpp"
#include "topoembed/overpass.hpp"
#include "topoembed/sampling.hpp"
#include "topoembed/util.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <map>

namespace topoembed {

namespace {

const std::map<std::string, std::string, std::less<>>& class_selectors() {
    static const std::map<std::string, std::string, std::less<>> selectors = {
        {"peak", "natural=peak"},
        {"river", "waterway=river"},
        {"cliff", "natural=cliff"},
        {"saddle", "natural=saddle"},
        {"aerialway_station", "aerialway=station"},
        {"alpine_hut", "tourism=alpine_hut"},
        {"waterfall", "waterway=waterfall"},
        {"sinkhole", "natural=sinkhole"},
    };
    return selectors;
}

bool is_selector_char(char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == ':' || c == '-';
}

bool near_duplicate(const GeoCoordinate& a, const GeoCoordinate& b) {
    return std::abs(a.lon - b.lon) < kDuplicateDegrees && std::abs(a.lat - b.lat) < kDuplicateDegrees;
}

double parse_double(const std::string& field, std::size_t line) {
    const std::string t = trim(field);
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
    if (ec != std::errc() || ptr != t.data() + t.size()) {
        fail(ErrorKind::Io, "CSV line " + std::to_string(line) + ": not a number: '" + t + "'");
    }
    return v;
}

} // namespace

bool is_valid_selector(std::string_view selector) noexcept {
    auto eq = selector.find('=');
    if (eq == std::string_view::npos || eq == 0 || eq + 1 == selector.size()) {
        return false;
    }
    auto key = selector.substr(0, eq);
    auto value = selector.substr(eq + 1);
    return std::all_of(key.begin(), key.end(), is_selector_char) &&
           std::all_of(value.begin(), value.end(), is_selector_char);
}

ClassTag make_class_tag(std::string name, std::string osm_selector) {
    require(!name.empty(), ErrorKind::Domain, "class name must be non-empty");
    require(is_valid_selector(osm_selector), ErrorKind::Domain, "invalid OSM selector '" + osm_selector + "'");
    return {std::move(name), std::move(osm_selector)};
}

ClassTag known_class_tag(std::string_view name) {
    const auto& selectors = class_selectors();
    auto it = selectors.find(name);
    require(it != selectors.end(), ErrorKind::Domain, "unknown class '" + std::string(name) + "'");
    return {it->first, it->second};
}

std::vector<std::string> known_class_names() {
    std::vector<std::string> names;
    for (const auto& [name, selector] : class_selectors()) {
        names.push_back(name);
    }
    return names;
}

std::size_t LabeledCoordSet::count(int label) const noexcept {
    return static_cast<std::size_t>(
        std::count_if(entries.begin(), entries.end(), [&](const LabeledCoord& e) { return e.label == label; }));
}

std::vector<LabeledCoord> parse_coord_csv(std::string_view text) {
    std::vector<LabeledCoord> out;
    auto lines = split(text, '\n');
    bool header_seen = false;
    int lon_col = -1;
    int lat_col = -1;
    int label_col = -1;
    for (std::size_t i = 0; i < lines.size(); ++i) {
        std::string line = trim(lines[i]);
        if (line.empty()) {
            continue;
        }
        if (!header_seen) {
            if (line.size() >= 3 && static_cast<unsigned char>(line[0]) == 0xEF) {
                line = line.substr(3);  // UTF-8 BOM
            }
            auto cols = split(line, ',');
            for (std::size_t c = 0; c < cols.size(); ++c) {
                const auto name = trim(cols[c]);
                if (name == "lon") lon_col = static_cast<int>(c);
                if (name == "lat") lat_col = static_cast<int>(c);
                if (name == "label") label_col = static_cast<int>(c);
            }
            require(lon_col >= 0 && lat_col >= 0, ErrorKind::Io, "coordinate CSV needs a 'lon,lat' header");
            header_seen = true;
            continue;
        }
        auto cols = split(line, ',');
        const auto needed = static_cast<std::size_t>(std::max({lon_col, lat_col, label_col})) + 1;
        require(cols.size() >= needed, ErrorKind::Io, "CSV line " + std::to_string(i + 1) + " has too few fields");
        LabeledCoord entry;
        entry.coord = make_coordinate(parse_double(cols[static_cast<std::size_t>(lon_col)], i + 1),
                                      parse_double(cols[static_cast<std::size_t>(lat_col)], i + 1));
        entry.label = 1;
        if (label_col >= 0) {
            const double label = parse_double(cols[static_cast<std::size_t>(label_col)], i + 1);
            require(label == 0.0 || label == 1.0, ErrorKind::Io, "labels must be 0 or 1");
            entry.label = static_cast<int>(label);
        }
        out.push_back(entry);
    }
    return out;
}

std::vector<LabeledCoord> read_coord_csv(const std::filesystem::path& path) {
    return parse_coord_csv(read_file(path));
}

std::string format_coord_csv(std::span<const GeoCoordinate> coords) {
    std::string out = "lon,lat\n";
    for (const auto& c : coords) {
        out += format_double(c.lon) + "," + format_double(c.lat) + "\n";
    }
    return out;
}

std::string format_coord_csv(std::span<const LabeledCoord> coords) {
    std::string out = "lon,lat,label\n";
    for (const auto& c : coords) {
        out += format_double(c.coord.lon) + "," + format_double(c.coord.lat) + "," + std::to_string(c.label) + "\n";
    }
    return out;
}

std::vector<GeoCoordinate> canonical_coords(std::vector<GeoCoordinate> coords, const AOIPolygon& region) {
    std::erase_if(coords, [&](const GeoCoordinate& c) { return !region.contains(c); });
    std::sort(coords.begin(), coords.end(), lon_lat_less);
    std::vector<GeoCoordinate> kept;
    kept.reserve(coords.size());
    for (const auto& c : coords) {
        bool dup = false;
        for (auto it = kept.rbegin(); it != kept.rend() && c.lon - it->lon < kDuplicateDegrees; ++it) {
            if (near_duplicate(c, *it)) {
                dup = true;
                break;
            }
        }
        if (!dup) {
            kept.push_back(c);
        }
    }
    return kept;
}

std::vector<GeoCoordinate> load_class_coords(const std::string& source, const ClassTag& tag, const AOIPolygon& region,
                                             OverpassClient* client) {
    region.check_non_degenerate();
    std::vector<GeoCoordinate> raw;
    if (source.starts_with("http://") || source.starts_with("https://")) {
        require(client != nullptr, ErrorKind::Network, "no query client configured for " + source);
        raw = client->fetch(tag, region);
    } else {
        for (const auto& e : read_coord_csv(source)) {
            if (e.label == 1) {
                raw.push_back(e.coord);
            }
        }
    }
    auto coords = canonical_coords(std::move(raw), region);
    require(!coords.empty(), ErrorKind::EmptyClass,
            "no '" + tag.name + "' coordinates inside " + region.to_wkt() + " from " + source);
    return coords;
}

LabeledCoordSet build_class_dataset(std::span<const GeoCoordinate> positives, const AOIPolygon& region,
                                    std::size_t total_n, std::uint64_t seed, ClassTag tag) {
    require(total_n % 2 == 0, ErrorKind::Domain, "dataset size must be even, got " + std::to_string(total_n));
    const std::size_t half = total_n / 2;
    std::vector<GeoCoordinate> pool;
    for (const auto& p : positives) {
        if (region.contains(p)) {
            pool.push_back(p);
        }
    }
    if (pool.size() < half) {
        fail(ErrorKind::Capacity, "class '" + tag.name + "' has " + std::to_string(pool.size()) +
                                      " positives in region, " + std::to_string(half) + " needed (short by " +
                                      std::to_string(half - pool.size()) + ")");
    }
    LabeledCoordSet set{{}, tag, region, seed};
    if (total_n == 0) {
        return set;
    }
    auto rng = make_rng(seed, "class-dataset/positives");
    std::vector<std::size_t> idx(pool.size());
    for (std::size_t i = 0; i < idx.size(); ++i) {
        idx[i] = i;
    }
    // Partial Fisher-Yates: the first `half` slots are the draw.
    for (std::size_t i = 0; i < half; ++i) {
        std::uniform_int_distribution<std::size_t> pick(i, idx.size() - 1);
        std::swap(idx[i], idx[pick(rng)]);
    }
    std::vector<GeoCoordinate> chosen;
    for (std::size_t i = 0; i < half; ++i) {
        chosen.push_back(pool[idx[i]]);
        set.entries.push_back({pool[idx[i]], 1});
    }
    std::uint64_t round = 0;
    while (set.entries.size() < total_n) {
        auto candidates = sample_coords_in_polygon(region, total_n - set.entries.size(),
                                                   substream_seed(seed, "class-dataset/negatives", round++));
        for (const auto& c : candidates) {
            const bool dup = std::any_of(set.entries.begin(), set.entries.end(),
                                         [&](const LabeledCoord& e) { return near_duplicate(e.coord, c); });
            if (!dup) {
                set.entries.push_back({c, 0});
            }
        }
    }
    auto shuffle_rng = make_rng(seed, "class-dataset/shuffle");
    std::shuffle(set.entries.begin(), set.entries.end(), shuffle_rng);
    return set;
}

double ImageDataset::rejection_rate() const noexcept {
    return requested == 0 ? 0.0 : static_cast<double>(rejected) / static_cast<double>(requested);
}

ImageDataset to_image_dataset(std::span<const LabeledCoord> entries, const ScaleSpec& scale,
                              const ElevationRaster& raster) {
    ImageDataset ds;
    ds.requested = entries.size();
    for (std::size_t i = 0; i < entries.size(); ++i) {
        auto patch = try_extract_patch(raster, entries[i].coord, scale);
        if (!patch) {
            ++ds.rejected;
            continue;
        }
        normalize_in_place(patch->values);
        ds.patches.push_back(std::move(patch->values));
        ds.labels.push_back(entries[i].label);
        ds.coords.push_back(entries[i].coord);
        ds.source_index.push_back(i);
    }
    return ds;
}

ImageDataset to_image_dataset(std::span<const GeoCoordinate> coords, const ScaleSpec& scale,
                              const ElevationRaster& raster) {
    std::vector<LabeledCoord> entries;
    entries.reserve(coords.size());
    for (const auto& c : coords) {
        entries.push_back({c, 0});
    }
    auto ds = to_image_dataset(std::span<const LabeledCoord>(entries), scale, raster);
    ds.labels.clear();
    return ds;
}

ImageDataset to_image_dataset(const LabeledCoordSet& set, const ScaleSpec& scale, const ElevationRaster& raster) {
    return to_image_dataset(std::span<const LabeledCoord>(set.entries), scale, raster);
}

} // namespace topoembed
