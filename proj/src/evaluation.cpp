#include "topoembed/evaluation.hpp"

#include "topoembed/error.hpp"
#include "topoembed/patch.hpp"
#include "topoembed/util.hpp"

#include "json.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <map>
#include <numbers>
#include <numeric>

namespace topoembed {

namespace {

double sigmoid(double x) {
    return x >= 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
}

std::string fixed(double v, int digits) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", digits, v);
    return buf;
}

nlohmann::json parse_json_file(const std::filesystem::path& path) {
    try {
        return nlohmann::json::parse(read_file(path));
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorKind::Io, "malformed JSON in " + path.string() + ": " + e.what());
    }
}

std::filesystem::path with_suffix(std::filesystem::path prefix, const char* suffix) {
    prefix += suffix;
    return prefix;
}

// Embeddings for every pool entry that survives extraction; nullopt otherwise.
std::vector<std::optional<std::vector<double>>> embed_entries(const EmbeddingModelHandle& model,
                                                              std::span<const LabeledCoord> entries,
                                                              const ElevationRaster& raster, const ScaleSpec& scale,
                                                              std::size_t* rejected) {
    auto ds = to_image_dataset(entries, scale, raster);
    auto vectors = model.embed(ds.patches);
    std::vector<std::optional<std::vector<double>>> out(entries.size());
    for (std::size_t i = 0; i < ds.size(); ++i) {
        out[ds.source_index[i]] = std::move(vectors[i]);
    }
    if (rejected != nullptr) {
        *rejected = ds.rejected;
    }
    return out;
}

double probe_one_seed(std::span<const LabeledCoord> entries,
                      const std::vector<std::optional<std::vector<double>>>& embeddings, std::uint64_t seed,
                      const ProbeConfig& config) {
    std::vector<std::size_t> pos;
    std::vector<std::size_t> neg;
    for (std::size_t i = 0; i < entries.size(); ++i) {
        (entries[i].label == 1 ? pos : neg).push_back(i);
    }
    auto rng = make_rng(seed, "probe/split");
    std::shuffle(pos.begin(), pos.end(), rng);
    std::shuffle(neg.begin(), neg.end(), rng);
    const std::size_t half_train = config.n_train / 2;
    const std::size_t half_test = config.n_test / 2;

    std::vector<std::vector<double>> xtr;
    std::vector<int> ytr;
    std::vector<std::vector<double>> xte;
    std::vector<int> yte;
    for (const auto* group : {&pos, &neg}) {
        for (std::size_t j = 0; j < half_train + half_test; ++j) {
            const auto& e = embeddings[(*group)[j]];
            if (!e) {
                continue;
            }
            const int label = entries[(*group)[j]].label;
            if (j < half_train) {
                xtr.push_back(*e);
                ytr.push_back(label);
            } else {
                xte.push_back(*e);
                yte.push_back(label);
            }
        }
    }
    require(!xte.empty(), ErrorKind::Capacity, "no test example survived patch extraction");
    if (config.shuffle_labels) {
        auto shuffle_rng = make_rng(seed, "probe/shuffle-labels");
        std::shuffle(ytr.begin(), ytr.end(), shuffle_rng);
    }
    SvmConfig svm = config.svm;
    svm.seed = seed;
    return LinearSvm::fit(xtr, ytr, svm).accuracy(xte, yte);
}

void check_probe_config(const ProbeConfig& c) {
    require(c.n_train >= 2 && c.n_train % 2 == 0 && c.n_test >= 2 && c.n_test % 2 == 0, ErrorKind::Domain,
            "n_train and n_test must be positive and even");
    require(!c.seeds.empty(), ErrorKind::Domain, "at least one seed is required");
}

ProbeResult summarize(std::string class_name, std::string model, std::vector<double> accuracies,
                      const ProbeConfig& config, std::size_t rejected) {
    ProbeResult r;
    r.class_name = std::move(class_name);
    r.model = std::move(model);
    const auto ms = mean_std(accuracies);
    r.mean_accuracy = ms.mean;
    r.std_accuracy = ms.std;
    r.n_train = config.n_train;
    r.n_test = config.n_test;
    r.n_seeds = accuracies.size();
    r.accuracies = std::move(accuracies);
    r.rejected = rejected;
    return r;
}

} // namespace

std::vector<std::uint64_t> seed_range(std::uint64_t base, int count) {
    std::vector<std::uint64_t> seeds;
    for (int i = 0; i < count; ++i) {
        seeds.push_back(base + static_cast<std::uint64_t>(i));
    }
    return seeds;
}

MeanStd mean_std(std::span<const double> values) {
    require(!values.empty(), ErrorKind::Domain, "mean of an empty set");
    const double mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
    double var = 0.0;
    for (double v : values) {
        var += (v - mean) * (v - mean);
    }
    return {mean, std::sqrt(var / static_cast<double>(values.size()))};
}

std::vector<double> radius_ladder(double base_resolution, int lo, int hi, int half_extent) {
    require(base_resolution > 0.0 && lo <= hi && half_extent >= 1, ErrorKind::Domain, "invalid radius ladder");
    std::vector<double> radii;
    for (int i = lo; i <= hi; ++i) {
        radii.push_back(half_extent * base_resolution * std::ldexp(1.0, i));
    }
    return radii;
}

// Scale scan ------------------------------------------------------------

double ScaleScanResult::best_resolution_for_seed(std::size_t seed_index) const {
    require(!records.empty() && seed_index < records.front().accuracies.size(), ErrorKind::Contract,
            "seed index out of range");
    const ScaleRecord* best = &records.front();
    for (const auto& r : records) {
        if (r.accuracies[seed_index] > best->accuracies[seed_index]) {
            best = &r;
        }
    }
    return best->resolution;
}

std::string ScaleScanResult::to_csv() const {
    std::string out = "radius_m,resolution,mean_accuracy,std_accuracy\n";
    for (const auto& r : records) {
        out += format_double(r.radius_m) + "," + format_double(r.resolution) + "," + format_double(r.mean_accuracy) +
               "," + format_double(r.std_accuracy) + "\n";
    }
    return out;
}

std::string ScaleScanResult::to_markdown() const {
    std::string out = "| radius (m) | resolution (m/px) | accuracy |\n|---:|---:|---|\n";
    for (const auto& r : records) {
        out += "| " + format_double(r.radius_m) + " | " + format_double(r.resolution) + " | " +
               fixed(100.0 * r.mean_accuracy, 1) + " ± " + fixed(100.0 * r.std_accuracy, 1) + " |\n";
    }
    return out;
}

ScaleScanResult scale_scan(std::span<const GeoCoordinate> positives, const AOIPolygon& region,
                           const ElevationRaster& raster, const ScaleScanConfig& config) {
    require(!config.radii.empty(), ErrorKind::Domain, "scale scan needs at least one radius");
    require(!config.seeds.empty(), ErrorKind::Domain, "scale scan needs at least one seed");
    require(config.n >= 4 && config.n % 2 == 0, ErrorKind::Domain, "n must be even and at least 4");
    require(config.train_fraction > 0.0 && config.train_fraction < 1.0, ErrorKind::Domain,
            "train_fraction must lie in (0,1)");
    std::vector<double> radii = config.radii;
    for (double r : radii) {
        require(std::isfinite(r) && r > 0.0, ErrorKind::Domain, "radii must be positive");
    }
    std::sort(radii.begin(), radii.end());
    radii.erase(std::unique(radii.begin(), radii.end()), radii.end());

    const std::size_t n_seeds = config.seeds.size();
    std::vector<std::vector<double>> acc(radii.size(), std::vector<double>(n_seeds, 0.0));
    parallel_for(n_seeds, config.jobs, [&](std::size_t si) {
        const std::uint64_t seed = config.seeds[si];
        const auto set = build_class_dataset(positives, region, config.n, seed);
        for (std::size_t ri = 0; ri < radii.size(); ++ri) {
            const auto ds = to_image_dataset(set, ScaleSpec(radii[ri], kPatchHalfExtent), raster);
            const auto n_train = static_cast<std::size_t>(config.train_fraction * static_cast<double>(ds.size()));
            require(n_train >= 2 && n_train < ds.size(), ErrorKind::Capacity,
                    "too few patches survive at radius " + format_double(radii[ri]));
            std::vector<std::vector<double>> train(ds.patches.begin(),
                                                   ds.patches.begin() + static_cast<std::ptrdiff_t>(n_train));
            std::vector<std::vector<double>> val(ds.patches.begin() + static_cast<std::ptrdiff_t>(n_train),
                                                 ds.patches.end());
            std::vector<int> ytrain(ds.labels.begin(), ds.labels.begin() + static_cast<std::ptrdiff_t>(n_train));
            CnnConfig cnn = config.cnn;
            cnn.seed = substream_seed(seed, "scan/cnn", ri);
            CnnClassifier probe({"class"}, cnn.hidden, cnn.seed);
            fit_cnn(probe, patches_to_tensor(train), ytrain, cnn);
            const auto prob = probe.probabilities(patches_to_tensor(val));
            std::size_t correct = 0;
            for (std::size_t i = 0; i < prob.size(); ++i) {
                correct += (prob[i] > 0.5 ? 1 : 0) == ds.labels[n_train + i];
            }
            acc[ri][si] = static_cast<double>(correct) / static_cast<double>(prob.size());
        }
    });

    ScaleScanResult result;
    result.seeds = config.seeds;
    for (std::size_t ri = 0; ri < radii.size(); ++ri) {
        ScaleRecord rec;
        rec.radius_m = radii[ri];
        rec.resolution = resolution_of(radii[ri], kPatchHalfExtent);
        const auto ms = mean_std(acc[ri]);
        rec.mean_accuracy = ms.mean;
        rec.std_accuracy = ms.std;
        rec.accuracies = acc[ri];
        result.records.push_back(std::move(rec));
    }
    const ScaleRecord* best = &result.records.front();
    for (const auto& r : result.records) {
        if (r.mean_accuracy > best->mean_accuracy) {
            best = &r;
        }
    }
    result.best_resolution = best->resolution;
    return result;
}

// Probe classification ----------------------------------------------------

std::string ProbeResult::csv_header() {
    return "class,model,mean_accuracy,std_accuracy,n_train,n_test,n_seeds\n";
}

std::string ProbeResult::csv_row() const {
    return class_name + "," + model + "," + format_double(mean_accuracy) + "," + format_double(std_accuracy) + "," +
           std::to_string(n_train) + "," + std::to_string(n_test) + "," + std::to_string(n_seeds) + "\n";
}

std::string ProbeResult::markdown_row() const {
    return "| " + model + " | " + class_name + " | " + fixed(100.0 * mean_accuracy, 1) + " ± " +
           fixed(100.0 * std_accuracy, 1) + " |\n";
}

std::string probe_markdown_table(std::span<const ProbeResult> results) {
    std::string out = "| model | class | accuracy |\n|---|---|---|\n";
    for (const auto& r : results) {
        out += r.markdown_row();
    }
    return out;
}

ProbeResult probe_classification(const EmbeddingModelHandle& model, const LabeledCoordSet& pool,
                                 const ElevationRaster& raster, const ScaleSpec& scale, const ProbeConfig& config) {
    check_probe_config(config);
    const std::size_t need = config.n_train / 2 + config.n_test / 2;
    const std::size_t pos = pool.count(1);
    const std::size_t neg = pool.count(0);
    if (pos < need || neg < need) {
        fail(ErrorKind::Capacity, "class '" + pool.class_tag.name + "' pool has " + std::to_string(pos) +
                                      " positives and " + std::to_string(neg) + " negatives; " +
                                      std::to_string(need) + " of each needed (short by " +
                                      std::to_string(need - std::min(pos, neg)) + ")");
    }
    std::size_t rejected = 0;
    const auto embeddings = embed_entries(model, pool.entries, raster, scale, &rejected);
    std::vector<double> acc(config.seeds.size());
    parallel_for(config.seeds.size(), config.jobs,
                 [&](std::size_t i) { acc[i] = probe_one_seed(pool.entries, embeddings, config.seeds[i], config); });
    return summarize(pool.class_tag.name, model.name(), std::move(acc), config, rejected);
}

ProbeResult probe_classification(const EmbeddingModelHandle& model, std::span<const GeoCoordinate> positives,
                                 const AOIPolygon& region, const ClassTag& tag, const ElevationRaster& raster,
                                 const ScaleSpec& scale, const ProbeConfig& config) {
    check_probe_config(config);
    std::vector<double> acc(config.seeds.size());
    std::vector<std::size_t> rejected(config.seeds.size());
    parallel_for(config.seeds.size(), config.jobs, [&](std::size_t i) {
        const auto set = build_class_dataset(positives, region, config.n_train + config.n_test, config.seeds[i], tag);
        const auto embeddings = embed_entries(model, set.entries, raster, scale, &rejected[i]);
        acc[i] = probe_one_seed(set.entries, embeddings, config.seeds[i], config);
    });
    return summarize(tag.name, model.name(), std::move(acc), config,
                     std::accumulate(rejected.begin(), rejected.end(), std::size_t{0}));
}

// Grid classification -----------------------------------------------------

double ClassProbe::score(std::span<const double> embedding) const { return sigmoid(svm.decision(embedding)); }

const ClassProbe* ProbeSet::find(const std::string& class_name, double scale) const {
    const ClassProbe* best = nullptr;
    for (const auto& p : probes) {
        if (p.class_name != class_name) {
            continue;
        }
        const double gap = std::abs(std::log(p.scale / scale));
        if (best == nullptr || gap < std::abs(std::log(best->scale / scale))) {
            best = &p;
        }
    }
    return best;
}

std::vector<std::string> ProbeSet::class_names() const {
    std::vector<std::string> names;
    for (const auto& p : probes) {
        if (std::find(names.begin(), names.end(), p.class_name) == names.end()) {
            names.push_back(p.class_name);
        }
    }
    return names;
}

ClassProbe train_probe(const EmbeddingModelHandle& model, const LabeledCoordSet& dataset,
                       const ElevationRaster& raster, const ScaleSpec& scale, const SvmConfig& config) {
    auto ds = to_image_dataset(dataset, scale, raster);
    require(ds.size() > 0, ErrorKind::Capacity, "no probe training patch survived extraction");
    return {dataset.class_tag.name, scale.resolution(), LinearSvm::fit(model.embed(ds.patches), ds.labels, config)};
}

void save_probes(const std::filesystem::path& path, const ProbeSet& set) {
    nlohmann::ordered_json doc;
    doc["model_hash"] = set.model_hash;
    doc["probes"] = nlohmann::ordered_json::array();
    for (const auto& p : set.probes) {
        doc["probes"].push_back({{"class", p.class_name},
                                 {"scale", p.scale},
                                 {"bias", p.svm.bias()},
                                 {"weights", p.svm.weights()},
                                 {"mean", p.svm.mean()},
                                 {"inv_std", p.svm.inv_std()}});
    }
    write_file_atomic(path, doc.dump(1) + "\n");
}

ProbeSet load_probes(const std::filesystem::path& path) {
    const auto doc = parse_json_file(path);
    ProbeSet set;
    try {
        set.model_hash = doc.value("model_hash", "");
        for (const auto& p : doc.at("probes")) {
            set.probes.push_back({p.at("class").get<std::string>(), p.at("scale").get<double>(),
                                  LinearSvm::from_parts(p.at("mean").get<std::vector<double>>(),
                                                        p.at("inv_std").get<std::vector<double>>(),
                                                        p.at("weights").get<std::vector<double>>(),
                                                        p.at("bias").get<double>())});
        }
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorKind::Io, "malformed probe file " + path.string() + ": " + e.what());
    }
    return set;
}

std::vector<GeoCoordinate> region_lattice(const AOIPolygon& region, double stride_m) {
    require(stride_m > 0.0, ErrorKind::Domain, "stride must be positive");
    region.check_non_degenerate();
    const auto box = region.bounds();
    const double mid_lat = 0.5 * (box.min_lat + box.max_lat);
    const double dlat = stride_m / kMetersPerDegree;
    const double dlon = stride_m / (kMetersPerDegree * std::cos(mid_lat * std::numbers::pi / 180.0));
    const auto count = [](double extent, double step) {
        return std::max<long long>(1, static_cast<long long>(std::floor(extent / step)) + 1);
    };
    const long long rows = count(box.max_lat - box.min_lat, dlat);
    const long long cols = count(box.max_lon - box.min_lon, dlon);
    const double lat0 = box.max_lat - 0.5 * ((box.max_lat - box.min_lat) - static_cast<double>(rows - 1) * dlat);
    const double lon0 = box.min_lon + 0.5 * ((box.max_lon - box.min_lon) - static_cast<double>(cols - 1) * dlon);
    require(rows * cols <= 50'000'000, ErrorKind::Capacity, "lattice too dense for the region");
    std::vector<GeoCoordinate> out;
    for (long long r = 0; r < rows; ++r) {
        for (long long c = 0; c < cols; ++c) {
            const GeoCoordinate p{lon0 + static_cast<double>(c) * dlon, lat0 - static_cast<double>(r) * dlat};
            if (region.contains(p)) {
                out.push_back(p);
            }
        }
    }
    return out;
}

std::vector<GridMap> grid_classify(const AOIPolygon& region, const EmbeddingModelHandle& model,
                                   const ProbeSet& probes, const ElevationRaster& raster, const GridConfig& config) {
    require(!config.scales.empty(), ErrorKind::Domain, "grid classification needs at least one scale");
    const auto box = region.bounds();
    const auto cover = raster.center_bounds();
    require(box.min_lon >= cover.min_lon && box.max_lon <= cover.max_lon && box.min_lat >= cover.min_lat &&
                box.max_lat <= cover.max_lat,
            ErrorKind::Boundary, "region " + region.to_wkt() + " extends beyond the raster");
    std::vector<std::string> classes = config.classes.empty() ? probes.class_names() : config.classes;
    for (const auto& c : classes) {
        require(probes.find(c, 1.0) != nullptr, ErrorKind::Domain, "no probe loaded for class '" + c + "'");
    }

    std::vector<GridMap> maps;
    for (double s : config.scales) {
        const ScaleSpec spec = ScaleSpec::from_resolution(s, kPatchHalfExtent);
        GridMap map;
        map.scale = s;
        map.stride_m = config.stride_m > 0.0 ? config.stride_m : spec.radius_m();
        const auto lattice = region_lattice(region, map.stride_m);
        map.points = lattice.size();
        for (const auto& p : lattice) {
            auto patch = try_extract_patch(raster, p, spec);
            if (!patch) {
                continue;
            }
            const auto [lo, hi] = std::minmax_element(patch->values.begin(), patch->values.end());
            if (*hi - *lo < config.min_relief_m) {
                continue;
            }
            normalize_in_place(patch->values);
            const auto z = model.embed_one(patch->values);
            for (const auto& c : classes) {
                const double score = probes.find(c, s)->score(z);
                if (score > config.threshold) {
                    map.detections.push_back({p, c, score});
                }
            }
        }
        maps.push_back(std::move(map));
    }
    return maps;
}

std::string to_geojson(std::span<const GridMap> maps) {
    nlohmann::ordered_json fc;
    fc["type"] = "FeatureCollection";
    fc["features"] = nlohmann::ordered_json::array();
    for (const auto& m : maps) {
        for (const auto& d : m.detections) {
            nlohmann::ordered_json f;
            f["type"] = "Feature";
            f["geometry"] = {{"type", "Point"}, {"coordinates", {d.coord.lon, d.coord.lat}}};
            f["properties"] = {{"class", d.class_name}, {"scale", m.scale}, {"score", d.score}};
            fc["features"].push_back(std::move(f));
        }
    }
    return fc.dump();
}

// Retrieval ---------------------------------------------------------------

EmbeddingIndex::EmbeddingIndex(int dim, double scale, std::string model_hash)
    : dim_(dim), scale_(scale), model_hash_(std::move(model_hash)) {
    require(dim >= 1, ErrorKind::Domain, "index dimension must be positive");
    require(scale > 0.0, ErrorKind::Domain, "index scale must be positive");
}

void EmbeddingIndex::add(const GeoCoordinate& coord, std::span<const double> embedding) {
    require(embedding.size() == static_cast<std::size_t>(dim_), ErrorKind::Contract, "embedding dimension mismatch");
    coords_.push_back(coord);
    data_.insert(data_.end(), embedding.begin(), embedding.end());
}

std::span<const double> EmbeddingIndex::vector(std::size_t i) const {
    return std::span<const double>(data_).subspan(i * static_cast<std::size_t>(dim_), static_cast<std::size_t>(dim_));
}

void EmbeddingIndex::save(const std::filesystem::path& prefix) const {
    std::string blob;
    blob.reserve(data_.size() * 8);
    for (double v : data_) {
        const auto bits = std::bit_cast<std::uint64_t>(v);
        for (int i = 0; i < 8; ++i) {
            blob.push_back(static_cast<char>((bits >> (8 * i)) & 0xFF));
        }
    }
    nlohmann::ordered_json manifest = {{"dim", dim_},
                                       {"count", size()},
                                       {"scale", scale_},
                                       {"model_hash", model_hash_},
                                       {"dtype", "float64-le"},
                                       {"data_hash", hex64(fnv1a64(blob))},
                                       {"rejected", rejected}};
    write_file_atomic(with_suffix(prefix, ".f64"), blob);
    write_file_atomic(with_suffix(prefix, ".csv"), format_coord_csv(std::span<const GeoCoordinate>(coords_)));
    write_file_atomic(with_suffix(prefix, ".json"), manifest.dump(2) + "\n");
}

EmbeddingIndex EmbeddingIndex::load(const std::filesystem::path& prefix) {
    const auto manifest = parse_json_file(with_suffix(prefix, ".json"));
    EmbeddingIndex index(manifest.at("dim").get<int>(), manifest.at("scale").get<double>(),
                         manifest.value("model_hash", ""));
    index.rejected = manifest.value("rejected", std::size_t{0});
    const std::string blob = read_file(with_suffix(prefix, ".f64"));
    require(hex64(fnv1a64(blob)) == manifest.value("data_hash", ""), ErrorKind::Io, "index data hash mismatch");
    const auto coords = read_coord_csv(with_suffix(prefix, ".csv"));
    const auto count = manifest.at("count").get<std::size_t>();
    require(coords.size() == count && blob.size() == count * static_cast<std::size_t>(index.dim_) * 8,
            ErrorKind::Io, "index files disagree on entry count");
    std::vector<double> row(static_cast<std::size_t>(index.dim_));
    for (std::size_t i = 0; i < count; ++i) {
        for (std::size_t j = 0; j < row.size(); ++j) {
            std::uint64_t bits = 0;
            const std::size_t at = (i * row.size() + j) * 8;
            for (int b = 7; b >= 0; --b) {
                bits = bits << 8 | static_cast<unsigned char>(blob[at + static_cast<std::size_t>(b)]);
            }
            row[j] = std::bit_cast<double>(bits);
        }
        index.add(coords[i].coord, row);
    }
    return index;
}

EmbeddingIndex build_embedding_index(std::span<const GeoCoordinate> coords, const EmbeddingModelHandle& model,
                                     const ElevationRaster& raster, const ScaleSpec& scale) {
    require(!coords.empty(), ErrorKind::Domain, "index needs at least one coordinate");
    const auto ds = to_image_dataset(coords, scale, raster);
    EmbeddingIndex index(model.output_dim(), scale.resolution(), model.checkpoint_hash());
    for (std::size_t i = 0; i < ds.size(); ++i) {
        index.add(ds.coords[i], model.embed_one(ds.patches[i]));
    }
    index.rejected = ds.rejected;
    return index;
}

std::vector<Neighbor> knn_search(const EmbeddingIndex& index, std::span<const double> query, std::size_t k) {
    require(query.size() == static_cast<std::size_t>(index.dim()), ErrorKind::Contract, "query dimension mismatch");
    if (k > index.size()) {
        fail(ErrorKind::Capacity, "k=" + std::to_string(k) + " exceeds index size " + std::to_string(index.size()));
    }
    std::vector<Neighbor> all(index.size());
    for (std::size_t i = 0; i < index.size(); ++i) {
        const auto v = index.vector(i);
        double sum = 0.0;
        for (std::size_t j = 0; j < v.size(); ++j) {
            const double d = v[j] - query[j];
            sum += d * d;
        }
        all[i] = {index.coord(i), std::sqrt(sum)};
    }
    const auto less = [](const Neighbor& a, const Neighbor& b) {
        if (a.distance != b.distance) {
            return a.distance < b.distance;
        }
        return lon_lat_less(a.coord, b.coord);
    };
    std::partial_sort(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(k), all.end(), less);
    all.resize(k);
    return all;
}

std::vector<Neighbor> knn_retrieve(const EmbeddingIndex& index, const EmbeddingModelHandle& model,
                                   const ElevationRaster& raster, std::span<const GeoCoordinate> queries,
                                   std::size_t k) {
    require(!index.empty(), ErrorKind::Domain, "index is empty");
    require(!queries.empty(), ErrorKind::Domain, "at least one query point is required");
    require(model.output_dim() == index.dim(), ErrorKind::Contract, "model and index dimensions differ");
    if (k > index.size()) {
        fail(ErrorKind::Capacity, "k=" + std::to_string(k) + " exceeds index size " + std::to_string(index.size()));
    }
    const auto spec = ScaleSpec::from_resolution(index.scale(), kPatchHalfExtent);
    std::vector<double> mean(static_cast<std::size_t>(index.dim()), 0.0);
    for (const auto& q : queries) {
        const auto patch = normalize_patch(extract_patch(raster, q, spec));
        const auto z = model.embed_one(patch.values);
        for (std::size_t j = 0; j < mean.size(); ++j) {
            mean[j] += z[j];
        }
    }
    for (auto& v : mean) {
        v /= static_cast<double>(queries.size());
    }
    return knn_search(index, mean, k);
}

std::string format_neighbors_csv(std::span<const Neighbor> neighbors) {
    std::string out = "lon,lat,distance\n";
    for (const auto& n : neighbors) {
        out += format_double(n.coord.lon) + "," + format_double(n.coord.lat) + "," + format_double(n.distance) + "\n";
    }
    return out;
}

// Geographic hygiene --------------------------------------------------------

std::size_t count_inside(std::span<const GeoCoordinate> coords, const AOIPolygon& train_region) {
    return static_cast<std::size_t>(std::count_if(coords.begin(), coords.end(),
                                                  [&](const GeoCoordinate& c) { return train_region.contains(c); }));
}

void require_outside(std::span<const GeoCoordinate> coords, const AOIPolygon& train_region) {
    for (const auto& c : coords) {
        require(!train_region.contains(c), ErrorKind::Contract,
                "evaluation coordinate (" + format_double(c.lon) + ", " + format_double(c.lat) +
                    ") lies inside the training polygon");
    }
}

} // namespace topoembed
