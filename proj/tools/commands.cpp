#include "cli_common.hpp"

#include "topoembed/baselines.hpp"
#include "topoembed/desk.hpp"
#include "topoembed/evaluation.hpp"
#include "topoembed/geotiff.hpp"
#include "topoembed/labels.hpp"
#include "topoembed/models.hpp"
#include "topoembed/overpass.hpp"
#include "topoembed/service.hpp"
#include "topoembed/synth.hpp"
#include "topoembed/training.hpp"
#include "topoembed/util.hpp"

#include <csignal>
#include <iostream>
#include <memory>

namespace topoembed::cli {

namespace fs = std::filesystem;

namespace {

fs::path with_suffix(const fs::path& prefix, const std::string& suffix) {
    auto p = prefix;
    p += suffix;
    return p;
}

ClassTag tag_for(const std::string& name) {
    const auto names = known_class_names();
    if (std::find(names.begin(), names.end(), name) != names.end()) {
        return known_class_tag(name);
    }
    return ClassTag{name, "landform=" + name};
}

std::vector<GeoCoordinate> load_positives(const std::string& source, const std::string& class_name,
                                          const AOIPolygon& region, const std::string& cache_dir) {
    if (source.rfind("http://", 0) == 0 || source.rfind("https://", 0) == 0) {
        OverpassOptions opts;
        opts.endpoint = source;
        opts.cache_dir = cache_dir;
        OverpassClient client(opts);
        return load_class_coords(source, tag_for(class_name), region, &client);
    }
    require(fs::exists(source), ErrorKind::Contract, "class CSV not found: " + source);
    return load_class_coords(source, tag_for(class_name), region);
}

void add_input_if_file(RunManifest& m, const std::string& path) {
    if (!path.empty() && fs::is_regular_file(path)) {
        m.add_input(path);
    }
}

void add_model_inputs(RunManifest& m, const std::string& spec) {
    if (spec != "id") {
        add_input_if_file(m, with_suffix(spec, ".json").string());
        add_input_if_file(m, with_suffix(spec, ".bin").string());
    }
}

} // namespace

void register_synth(CLI::App& app, Registry& reg) {
    struct Opts {
        std::uint64_t seed = 0;
        int side = 1025;
        double roughness = 0.5;
        double resolution = 30.0;
        double amplitude = 400.0;
        std::vector<double> center{12.5, 47.5};
        std::string scene;
        std::string out;
    };
    auto o = std::make_shared<Opts>();
    auto* cmd = reg.add(app, "synth", "Generate a fractal DTM as GeoTIFF", [o](CLI::App& sub) {
        fs::path out(o->out);
        ensure_parent(out);
        auto m = manifest_for(sub, o->seed);
        if (o->scene.empty()) {
            require(is_diamond_square_side(o->side), ErrorKind::Domain,
                    "side must be 2^m+1 with m >= 2, got " + std::to_string(o->side));
            SynthOptions so;
            so.amplitude_m = o->amplitude;
            so.center = make_coordinate(o->center.at(0), o->center.at(1));
            write_geotiff(out, synth_fractal_raster(o->seed, o->side, o->roughness, o->resolution, so));
            m.outputs.push_back(out.string());
        } else {
            SceneConfig cfg;
            if (o->scene == "peak-pit") {
                cfg = peak_pit_scene(o->seed);
            } else if (o->scene == "scale-scan") {
                cfg = scale_scan_scene(o->seed);
            } else if (o->scene == "multiscale") {
                cfg = multiscale_scene(o->seed);
            } else if (o->scene == "ridge") {
                cfg = ridge_scene(o->seed);
            } else if (o->scene == "training") {
                cfg = training_scene(o->seed);
            } else {
                fail(ErrorKind::Domain, "unknown scene '" + o->scene + "'");
            }
            const auto scene = make_scene(cfg);
            write_geotiff(out, scene.raster);
            m.outputs.push_back(out.string());
            auto stem = out;
            stem.replace_extension();
            for (const auto& [name, coords] : scene.labels) {
                const auto csv = with_suffix(stem, "." + name + ".csv");
                write_file_atomic(csv, format_coord_csv(coords));
                m.outputs.push_back(csv.string());
            }
            const auto region = with_suffix(stem, ".region.wkt");
            write_file_atomic(region, scene.region.to_wkt() + "\n");
            m.outputs.push_back(region.string());
        }
        finish(m, out);
    });
    cmd->add_option("--seed", o->seed, "Random seed")->capture_default_str();
    cmd->add_option("--side", o->side, "Grid side in pixels (2^m+1)")->capture_default_str();
    cmd->add_option("--roughness", o->roughness, "Per-octave displacement ratio")->capture_default_str();
    cmd->add_option("--resolution", o->resolution, "Meters per pixel")->capture_default_str();
    cmd->add_option("--amplitude", o->amplitude, "Coarsest displacement bound in meters")->capture_default_str();
    cmd->add_option("--center", o->center, "Raster center lon,lat")->delimiter(',')->expected(2)->capture_default_str();
    cmd->add_option("--scene", o->scene,
                    "Benchmark scene with planted landforms: peak-pit, scale-scan, multiscale, ridge, training");
    cmd->add_option("--out", o->out, "Output GeoTIFF")->required();
}

void register_train(CLI::App& app, Registry& reg) {
    struct Opts {
        std::string dtm;
        std::string train_polygon;
        std::size_t locations = 4000;
        std::vector<double> scales{10.0, 30.0, 60.0};
        int k = 4;
        bool adv = false;
        double lambda_rec = 1.0;
        double lambda_adv = 0.0;
        double p = 1.0;
        double lr_g = 2e-4;
        double lr_d = 1.6e-3;
        long long steps = 1000;
        int batch = 16;
        std::string optimizer = "adam";
        std::string target_norm = "input-frame";
        bool no_early_stop = false;
        std::uint64_t seed = 0;
        std::string out;
    };
    auto o = std::make_shared<Opts>();
    auto* cmd = reg.add(app, "train", "Self-supervised encoder training", [o](CLI::App& sub) {
        TrainConfig cfg;
        cfg.k = o->k;
        cfg.scales = o->scales;
        cfg.lambda_rec = sub.get_option("--lambda-rec")->count() ? o->lambda_rec : (o->adv ? 100.0 : 1.0);
        cfg.lambda_adv = sub.get_option("--lambda-adv")->count() ? o->lambda_adv : (o->adv ? 1.0 : 0.0);
        require(o->adv == (cfg.lambda_adv > 0.0), ErrorKind::Contract,
                "--lambda-adv must be positive exactly when --adv is given");
        cfg.p = o->p;
        cfg.lr_generator = o->lr_g;
        cfg.lr_discriminator = o->lr_d;
        cfg.max_steps = o->steps;
        cfg.batch_size = o->batch;
        if (o->optimizer == "adam") {
            cfg.optimizer = nn::OptimizerKind::Adam;
        } else if (o->optimizer == "sgd") {
            cfg.optimizer = nn::OptimizerKind::Sgd;
        } else {
            fail(ErrorKind::Domain, "optimizer must be adam or sgd");
        }
        cfg.target_normalization = parse_target_normalization(o->target_norm);
        cfg.stop_on_convergence = !o->no_early_stop;
        cfg.seed = o->seed;
        cfg.locations = {GeoCoordinate{}};
        validate(cfg);

        const auto raster = read_geotiff(o->dtm);
        const auto polygon = region_or_raster(o->train_polygon, raster, 0.0);
        cfg.locations = sample_training_locations(polygon, raster, o->locations, o->seed);

        auto [bundle, report] = train_topo2vec(cfg, raster, [](const StepRecord& r) {
            if (r.step % 100 == 0) {
                std::cerr << "step " << r.step << " scale " << r.scale << " l_p " << r.l_p << "\n";
            }
        });
        fs::path out(o->out);
        ensure_parent(out);
        report.checkpoint_hash = save_checkpoint(out, bundle);
        const auto report_path = with_suffix(out, ".report.csv");
        write_file_atomic(report_path, report.to_csv());

        auto m = manifest_for(sub, o->seed);
        m.config["lambda-rec"] = format_double(cfg.lambda_rec);
        m.config["lambda-adv"] = format_double(cfg.lambda_adv);
        m.config["stop-reason"] = report.stop_reason;
        m.config["steps-run"] = std::to_string(report.steps.size());
        m.config["rejected-locations"] = std::to_string(report.rejected_locations);
        m.add_input(o->dtm);
        m.outputs = {with_suffix(out, ".bin").string(), with_suffix(out, ".json").string(), report_path.string()};
        finish(m, out);
        std::cout << report.checkpoint_hash << "\n";
    });
    cmd->add_option("--dtm", o->dtm, "Elevation GeoTIFF")->required()->check(CLI::ExistingFile);
    cmd->add_option("--train-polygon", o->train_polygon, "WKT polygon; default is the raster extent");
    cmd->add_option("--locations", o->locations, "Number of training locations")->capture_default_str();
    cmd->add_option("--scales", o->scales, "Meters per pixel")->delimiter(',')->capture_default_str();
    cmd->add_option("--k", o->k, "Fractal factor (1, 2, 4 or 8)")->capture_default_str();
    cmd->add_flag("--adv", o->adv, "Add the adversarial loss");
    cmd->add_option("--lambda-rec", o->lambda_rec, "Reconstruction weight (100 with --adv, else 1)");
    cmd->add_option("--lambda-adv", o->lambda_adv, "Adversarial weight (1 with --adv, else 0)");
    cmd->add_option("--p", o->p, "Reconstruction norm exponent")->capture_default_str();
    cmd->add_option("--lr-g", o->lr_g, "Encoder/decoder learning rate")->capture_default_str();
    cmd->add_option("--lr-d", o->lr_d, "Discriminator learning rate")->capture_default_str();
    cmd->add_option("--steps", o->steps, "Maximum optimizer steps")->capture_default_str();
    cmd->add_option("--batch", o->batch, "Batch size")->capture_default_str();
    cmd->add_option("--optimizer", o->optimizer, "adam or sgd")->capture_default_str();
    cmd->add_option("--target-norm", o->target_norm, "input-frame or per-tile")->capture_default_str();
    cmd->add_flag("--no-early-stop", o->no_early_stop, "Run all --steps");
    cmd->add_option("--seed", o->seed, "Random seed")->capture_default_str();
    cmd->add_option("--out", o->out, "Checkpoint prefix")->required();
}

void register_scale_scan(CLI::App& app, Registry& reg) {
    struct Opts {
        std::string class_csv;
        std::string class_name = "peak";
        std::string dtm;
        std::string region;
        std::vector<double> radii;
        std::size_t n = 1000;
        int seeds = 10;
        std::uint64_t seed = 0;
        int jobs = 1;
        int epochs = 40;
        std::string cache_dir = ".overpass-cache";
        std::string out;
    };
    auto o = std::make_shared<Opts>();
    auto* cmd = reg.add(app, "scale-scan", "Find the patch radius that best separates a class", [o](CLI::App& sub) {
        require(fs::exists(o->class_csv) || o->class_csv.rfind("http", 0) == 0, ErrorKind::Contract,
                "class CSV not found: " + o->class_csv);
        const auto raster = read_geotiff(o->dtm);
        ScaleScanConfig cfg;
        cfg.radii = o->radii.empty() ? radius_ladder(raster.source_resolution(), 0, 5) : o->radii;
        const double max_radius = *std::max_element(cfg.radii.begin(), cfg.radii.end());
        const auto region = region_or_raster(o->region, raster, max_radius);
        const auto positives = load_positives(o->class_csv, o->class_name, region, o->cache_dir);
        cfg.n = o->n;
        cfg.seeds = seed_range(o->seed, o->seeds);
        cfg.jobs = o->jobs;
        cfg.cnn.epochs = o->epochs;
        const auto result = scale_scan(positives, region, raster, cfg);
        fs::path out(o->out);
        ensure_parent(out);
        write_file_atomic(out, result.to_csv());
        auto m = manifest_for(sub, o->seed);
        m.config["best-resolution"] = format_double(result.best_resolution);
        add_input_if_file(m, o->class_csv);
        m.add_input(o->dtm);
        m.outputs = {out.string()};
        finish(m, out);
        std::cout << format_double(result.best_resolution) << "\n";
    });
    cmd->add_option("--class-csv", o->class_csv, "lon,lat CSV of class members, or an Overpass URL")->required();
    cmd->add_option("--class", o->class_name, "Class name")->capture_default_str();
    cmd->add_option("--dtm", o->dtm, "Elevation GeoTIFF")->required()->check(CLI::ExistingFile);
    cmd->add_option("--region", o->region, "WKT sampling region; default is the raster extent");
    cmd->add_option("--radii", o->radii, "Patch radii in meters; default 8*s0*2^i, i=0..5")->delimiter(',');
    cmd->add_option("--n", o->n, "Balanced dataset size per seed")->capture_default_str();
    cmd->add_option("--seeds", o->seeds, "Number of seeds")->capture_default_str();
    cmd->add_option("--seed", o->seed, "First seed")->capture_default_str();
    cmd->add_option("--jobs", o->jobs, "Parallel seeds")->capture_default_str();
    cmd->add_option("--epochs", o->epochs, "Probe CNN epochs")->capture_default_str();
    cmd->add_option("--cache-dir", o->cache_dir, "Overpass response cache")->capture_default_str();
    cmd->add_option("--out", o->out, "Output CSV")->required();
}

void register_eval(CLI::App& app, Registry& reg) {
    struct Opts {
        std::string model;
        std::string class_csv;
        std::string class_name = "peak";
        std::string dtm;
        std::string region;
        std::string train_polygon;
        double scale = 30.0;
        std::size_t n_train = 1000;
        std::size_t n_test = 200;
        int seeds = 10;
        std::uint64_t seed = 0;
        double c = 1.0;
        bool shuffle_labels = false;
        int jobs = 1;
        std::string cache_dir = ".overpass-cache";
        std::string out;
    };
    auto o = std::make_shared<Opts>();
    auto* cmd = reg.add(app, "eval", "Linear-probe classification accuracy of an embedding", [o](CLI::App& sub) {
        const auto raster = read_geotiff(o->dtm);
        const auto scale = ScaleSpec::from_resolution(o->scale);
        const auto region = region_or_raster(o->region, raster, scale.radius_m());
        const auto positives = load_positives(o->class_csv, o->class_name, region, o->cache_dir);
        if (!o->train_polygon.empty()) {
            require_outside(positives, AOIPolygon::from_wkt(o->train_polygon));
        }
        const auto model = EmbeddingModelHandle::load(o->model);
        ProbeConfig cfg;
        cfg.n_train = o->n_train;
        cfg.n_test = o->n_test;
        cfg.seeds = seed_range(o->seed, o->seeds);
        cfg.svm.c = o->c;
        cfg.shuffle_labels = o->shuffle_labels;
        cfg.jobs = o->jobs;
        const auto result =
            probe_classification(model, positives, region, tag_for(o->class_name), raster, scale, cfg);
        fs::path out(o->out);
        ensure_parent(out);
        write_file_atomic(out, ProbeResult::csv_header() + result.csv_row());
        auto m = manifest_for(sub, o->seed);
        m.config["model-hash"] = model.checkpoint_hash();
        add_input_if_file(m, o->class_csv);
        add_model_inputs(m, o->model);
        m.add_input(o->dtm);
        m.outputs = {out.string()};
        finish(m, out);
        std::cout << result.markdown_row();
    });
    cmd->add_option("--model", o->model, "Checkpoint prefix or 'id'")->required();
    cmd->add_option("--class-csv", o->class_csv, "lon,lat CSV of class members, or an Overpass URL")->required();
    cmd->add_option("--class", o->class_name, "Class name")->capture_default_str();
    cmd->add_option("--dtm", o->dtm, "Elevation GeoTIFF")->required()->check(CLI::ExistingFile);
    cmd->add_option("--region", o->region, "WKT evaluation region; default is the raster extent");
    cmd->add_option("--train-polygon", o->train_polygon, "Reject class points inside this WKT polygon");
    cmd->add_option("--scale", o->scale, "Meters per pixel")->capture_default_str();
    cmd->add_option("--n-train", o->n_train, "Training set size")->capture_default_str();
    cmd->add_option("--n-test", o->n_test, "Test set size")->capture_default_str();
    cmd->add_option("--seeds", o->seeds, "Number of seeds")->capture_default_str();
    cmd->add_option("--seed", o->seed, "First seed")->capture_default_str();
    cmd->add_option("--svm-c", o->c, "SVM regularization")->capture_default_str();
    cmd->add_flag("--shuffle-labels", o->shuffle_labels, "Permute training labels (chance control)");
    cmd->add_option("--jobs", o->jobs, "Parallel seeds")->capture_default_str();
    cmd->add_option("--cache-dir", o->cache_dir, "Overpass response cache")->capture_default_str();
    cmd->add_option("--out", o->out, "Output CSV")->required();
}

void register_index(CLI::App& app, Registry& reg) {
    struct Opts {
        std::string model;
        std::string coords_csv;
        std::string dtm;
        double scale = 30.0;
        std::string out;
    };
    auto o = std::make_shared<Opts>();
    auto* cmd = reg.add(app, "index", "Embed coordinates into a nearest-neighbour index", [o](CLI::App& sub) {
        const auto raster = read_geotiff(o->dtm);
        const auto model = EmbeddingModelHandle::load(o->model);
        std::vector<GeoCoordinate> coords;
        for (const auto& e : read_coord_csv(o->coords_csv)) {
            coords.push_back(e.coord);
        }
        const auto index = build_embedding_index(coords, model, raster, ScaleSpec::from_resolution(o->scale));
        fs::path out(o->out);
        ensure_parent(out);
        index.save(out);
        auto m = manifest_for(sub, 0);
        m.config["indexed"] = std::to_string(index.size());
        m.config["rejected"] = std::to_string(index.rejected);
        m.add_input(o->coords_csv);
        m.add_input(o->dtm);
        add_model_inputs(m, o->model);
        for (const char* ext : {".f64", ".csv", ".json"}) {
            m.outputs.push_back(with_suffix(out, ext).string());
        }
        finish(m, out);
        std::cerr << "indexed " << index.size() << " points, rejected " << index.rejected << "\n";
    });
    cmd->add_option("--model", o->model, "Checkpoint prefix or 'id'")->required();
    cmd->add_option("--coords-csv", o->coords_csv, "lon,lat CSV")->required()->check(CLI::ExistingFile);
    cmd->add_option("--dtm", o->dtm, "Elevation GeoTIFF")->required()->check(CLI::ExistingFile);
    cmd->add_option("--scale", o->scale, "Meters per pixel")->capture_default_str();
    cmd->add_option("--out", o->out, "Index prefix")->required();
}

void register_retrieve(CLI::App& app, Registry& reg) {
    struct Opts {
        std::string index;
        std::string model;
        std::string dtm;
        std::string points;
        std::size_t k = 10;
        std::string out;
    };
    auto o = std::make_shared<Opts>();
    auto* cmd = reg.add(app, "retrieve", "Nearest indexed locations to the mean embedding of query points", [o](CLI::App& sub) {
        const auto index = EmbeddingIndex::load(o->index);
        require(o->k <= index.size(), ErrorKind::Contract,
                "k=" + std::to_string(o->k) + " exceeds index size " + std::to_string(index.size()));
        const auto queries = parse_points(o->points);
        require(!queries.empty(), ErrorKind::Domain, "no query points");
        std::string csv;
        if (o->k > 0) {
            const auto model = EmbeddingModelHandle::load(o->model);
            require(model.checkpoint_hash() == index.model_hash(), ErrorKind::Contract,
                    "index was built with a different model");
            const auto raster = read_geotiff(o->dtm);
            const auto hits = knn_retrieve(index, model, raster, queries, o->k);
            csv = format_neighbors_csv(hits);
        }
        std::cout << csv;
        if (!o->out.empty()) {
            fs::path out(o->out);
            ensure_parent(out);
            write_file_atomic(out, csv);
            auto m = manifest_for(sub, 0);
            for (const char* ext : {".f64", ".csv", ".json"}) {
                m.add_input(with_suffix(o->index, ext));
            }
            m.outputs = {out.string()};
            finish(m, out);
        }
    });
    cmd->add_option("--index", o->index, "Index prefix")->required();
    cmd->add_option("--model", o->model, "Checkpoint prefix or 'id'")->required();
    cmd->add_option("--dtm", o->dtm, "Elevation GeoTIFF")->required()->check(CLI::ExistingFile);
    cmd->add_option("--points", o->points, "lon,lat CSV or inline 'lon,lat;lon,lat'")->required();
    cmd->add_option("--k", o->k, "Number of neighbours")->capture_default_str();
    cmd->add_option("--out", o->out, "Also write the CSV here");
}

void register_train_probes(CLI::App& app, Registry& reg) {
    struct Opts {
        std::string model;
        std::vector<std::string> classes;
        std::string dtm;
        std::string region;
        std::vector<double> scales{30.0};
        std::size_t n = 1000;
        std::uint64_t seed = 0;
        double c = 1.0;
        std::string out;
    };
    auto o = std::make_shared<Opts>();
    auto* cmd = reg.add(app, "train-probes", "Fit per-class linear probes for grid classification", [o](CLI::App& sub) {
        const auto raster = read_geotiff(o->dtm);
        const auto model = EmbeddingModelHandle::load(o->model);
        const double max_scale = *std::max_element(o->scales.begin(), o->scales.end());
        const auto region = region_or_raster(o->region, raster, ScaleSpec::from_resolution(max_scale).radius_m());
        ProbeSet set;
        set.model_hash = model.checkpoint_hash();
        auto m = manifest_for(sub, o->seed);
        for (const auto& spec : o->classes) {
            const auto eq = spec.find('=');
            require(eq != std::string::npos, ErrorKind::Domain, "class must be name=csv: " + spec);
            const std::string name = spec.substr(0, eq);
            const std::string csv = spec.substr(eq + 1);
            const auto positives = load_positives(csv, name, region, ".overpass-cache");
            add_input_if_file(m, csv);
            for (double s : o->scales) {
                const auto dataset = build_class_dataset(positives, region, o->n,
                                                         substream_seed(o->seed, "probes/" + name), tag_for(name));
                SvmConfig svm;
                svm.c = o->c;
                svm.seed = o->seed;
                set.probes.push_back(train_probe(model, dataset, raster, ScaleSpec::from_resolution(s), svm));
            }
        }
        fs::path out(o->out);
        ensure_parent(out);
        save_probes(out, set);
        m.add_input(o->dtm);
        add_model_inputs(m, o->model);
        m.outputs = {out.string()};
        finish(m, out);
    });
    cmd->add_option("--model", o->model, "Checkpoint prefix or 'id'")->required();
    cmd->add_option("--class", o->classes, "name=path.csv, repeatable")->required();
    cmd->add_option("--dtm", o->dtm, "Elevation GeoTIFF")->required()->check(CLI::ExistingFile);
    cmd->add_option("--region", o->region, "WKT sampling region; default is the raster extent");
    cmd->add_option("--scales", o->scales, "Meters per pixel")->delimiter(',')->capture_default_str();
    cmd->add_option("--n", o->n, "Balanced training set size per probe")->capture_default_str();
    cmd->add_option("--seed", o->seed, "Random seed")->capture_default_str();
    cmd->add_option("--svm-c", o->c, "SVM regularization")->capture_default_str();
    cmd->add_option("--out", o->out, "Probe set JSON")->required();
}

void register_grid_classify(CLI::App& app, Registry& reg) {
    struct Opts {
        std::string model;
        std::string probes;
        std::string dtm;
        std::string bbox;
        std::vector<double> scales{30.0};
        double stride = 0.0;
        double threshold = 0.5;
        std::vector<std::string> classes;
        std::string out;
    };
    auto o = std::make_shared<Opts>();
    auto* cmd = reg.add(app, "grid-classify", "Multi-scale class maps over a bounding box as GeoJSON", [o](CLI::App& sub) {
        const auto raster = read_geotiff(o->dtm);
        const auto model = EmbeddingModelHandle::load(o->model);
        const auto probes = load_probes(o->probes);
        GridConfig cfg;
        cfg.scales = o->scales;
        cfg.stride_m = o->stride;
        cfg.threshold = o->threshold;
        cfg.classes = o->classes;
        const auto maps = grid_classify(AOIPolygon::from_bbox(parse_bbox(o->bbox)), model, probes, raster, cfg);
        fs::path out(o->out);
        ensure_parent(out);
        write_file_atomic(out, to_geojson(maps));
        auto m = manifest_for(sub, 0);
        m.add_input(o->dtm);
        m.add_input(o->probes);
        add_model_inputs(m, o->model);
        m.outputs = {out.string()};
        finish(m, out);
    });
    cmd->add_option("--model", o->model, "Checkpoint prefix or 'id'")->required();
    cmd->add_option("--probes", o->probes, "Probe set JSON")->required()->check(CLI::ExistingFile);
    cmd->add_option("--dtm", o->dtm, "Elevation GeoTIFF")->required()->check(CLI::ExistingFile);
    cmd->add_option("--bbox", o->bbox, "minlon,minlat,maxlon,maxlat")->required();
    cmd->add_option("--scales", o->scales, "Meters per pixel, one map layer each")->delimiter(',')->capture_default_str();
    cmd->add_option("--stride", o->stride, "Lattice spacing in meters; 0 means one patch radius")->capture_default_str();
    cmd->add_option("--threshold", o->threshold, "Probe score threshold")->capture_default_str();
    cmd->add_option("--class", o->classes, "Restrict to these classes");
    cmd->add_option("--out", o->out, "Output GeoJSON")->required();
}

namespace {
RetrievalService* g_service = nullptr;
extern "C" void stop_service(int) {
    if (g_service) {
        g_service->stop();
    }
}
} // namespace

void register_serve(CLI::App& app, Registry& reg) {
    auto cfg = std::make_shared<ServiceConfig>();
    auto paths = std::make_shared<std::array<std::string, 4>>();
    auto* cmd = reg.add(app, "serve", "HTTP embedding, retrieval and grid-classification service", [cfg, paths](CLI::App&) {
        cfg->checkpoint = (*paths)[0];
        cfg->index = (*paths)[1];
        cfg->raster = (*paths)[2];
        cfg->probes = (*paths)[3];
        RetrievalService service(*cfg);
        g_service = &service;
        std::signal(SIGINT, stop_service);
        std::signal(SIGTERM, stop_service);
        std::cerr << "listening on " << cfg->host << ":" << cfg->port << "\n";
        const bool ok = service.listen(true);
        g_service = nullptr;
        require(ok, ErrorKind::Io, "could not listen on " + cfg->host + ":" + std::to_string(cfg->port));
    });
    cmd->add_option("--checkpoint", (*paths)[0], "Checkpoint prefix or 'id'")->required();
    cmd->add_option("--index", (*paths)[1], "Index prefix")->required();
    cmd->add_option("--dtm", (*paths)[2], "Elevation GeoTIFF")->required();
    cmd->add_option("--probes", (*paths)[3], "Probe set JSON");
    cmd->add_option("--host", cfg->host, "Bind address")->capture_default_str();
    cmd->add_option("--port", cfg->port, "Port")->capture_default_str();
    cmd->add_option("--max-batch", cfg->max_batch, "Maximum query points per request")->capture_default_str();
    cmd->add_option("--cors-origin", cfg->cors_origins, "Allowed CORS origin, repeatable");
    cmd->add_option("--area-cap", cfg->area_cap_deg2, "Grid-classify area cap in square degrees")
        ->capture_default_str();
}

} // namespace topoembed::cli
