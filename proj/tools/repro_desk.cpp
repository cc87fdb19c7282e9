#include "cli_common.hpp"

#include "topoembed/desk.hpp"
#include "topoembed/evaluation.hpp"
#include "topoembed/geotiff.hpp"
#include "topoembed/labels.hpp"
#include "topoembed/models.hpp"
#include "topoembed/util.hpp"

#include <cmath>
#include <iostream>
#include <sstream>

namespace topoembed::cli {

namespace fs = std::filesystem;

namespace {

struct DeskOpts {
    std::uint64_t seed = 0;
    std::string out_dir;
    long long steps = 3000;
    int seeds = 10;
    int jobs = 1;
};

std::string verdict(bool ok) { return ok ? "PASS" : "FAIL"; }

void run_desk(const DeskOpts& o, CLI::App& sub) {
    const fs::path root(o.out_dir);
    fs::create_directories(root / "terrain");
    fs::create_directories(root / "models");
    auto manifest = manifest_for(sub, o.seed);
    const auto seeds = DeskSeeds::shifted(o.seed);
    const auto eval_seeds = seed_range(o.seed, o.seeds);
    std::ostringstream md;
    md << "# Desk-scale reproduction (seed " << o.seed << ")\n\n";
    auto write = [&](const fs::path& rel, const std::string& text) {
        write_file_atomic(root / rel, text);
        manifest.outputs.push_back((root / rel).string());
    };
    auto log = [](const std::string& line) { std::cerr << line << std::endl; };

    // synth + train
    const auto train_scene = make_scene(training_scene(seeds.training_scene));
    write_geotiff(root / "terrain/train.tif", train_scene.raster);
    std::map<int, EmbeddingModelHandle> models;
    md << "## Training\n\n| model | steps | wall clock (s) | final L_p | checkpoint |\n|---|---|---|---|---|\n";
    for (int k : {1, 4}) {
        log("training topo2vec-" + std::to_string(k));
        const auto cfg = desk_train_config(train_scene, k, false, o.steps, seeds.training);
        auto [bundle, report] = train_topo2vec(cfg, train_scene.raster);
        const std::string name = "topo2vec-" + std::to_string(k);
        report.checkpoint_hash = save_checkpoint(root / "models" / name, bundle);
        write(fs::path("models") / (name + ".report.csv"), report.to_csv());
        md << "| " << name << " | " << report.steps.size() << " | " << format_double(report.wall_clock_s) << " | "
           << format_double(report.steps.back().l_p) << " | " << report.checkpoint_hash << " |\n";
        models.emplace(k, EmbeddingModelHandle::topo2vec(std::make_shared<ModelBundle>(std::move(bundle))));
    }
    const auto& k1 = models.at(1);
    const auto& k4 = models.at(4);

    // scale-scan
    log("scale scan");
    const auto scan_scene = make_scene(scale_scan_scene(seeds.scale_scan));
    write_geotiff(root / "terrain/scale_scan.tif", scan_scene.raster);
    ScaleScanConfig scan_cfg;
    scan_cfg.radii = radius_ladder(scan_scene.raster.source_resolution(), 0, 5);
    scan_cfg.seeds = eval_seeds;
    scan_cfg.jobs = o.jobs;
    const auto scan = scale_scan(scan_scene.labels.at("peak"), scan_scene.region, scan_scene.raster, scan_cfg);
    write("scale_scan.csv", scan.to_csv());
    int near = 0;
    for (std::size_t i = 0; i < scan.seeds.size(); ++i) {
        const double b = scan.best_resolution_for_seed(i);
        near += b >= 15.0 && b <= 60.0;
    }
    md << "\n## Scale scan (planted footprint 30 m/pixel)\n\n" << scan.to_markdown() << "\nBest resolution "
       << format_double(scan.best_resolution) << "; seeds within one step of 30: " << near << "/" << scan.seeds.size()
       << " " << verdict(10 * near >= 8 * static_cast<int>(scan.seeds.size())) << "\n";

    // eval: peak vs pit
    log("peak-vs-pit probes");
    const auto pp_scene = make_scene(peak_pit_scene(seeds.peak_pit));
    write_geotiff(root / "terrain/peak_pit.tif", pp_scene.raster);
    const auto pool = peak_pit_pool(pp_scene);
    const auto scale30 = ScaleSpec::from_resolution(30.0);
    ProbeConfig probe_cfg;
    probe_cfg.seeds = eval_seeds;
    probe_cfg.jobs = o.jobs;
    std::vector<ProbeResult> pp;
    const auto id = EmbeddingModelHandle::id();
    for (const EmbeddingModelHandle* m : {&id, &k1, &k4}) {
        pp.push_back(probe_classification(*m, pool, pp_scene.raster, scale30, probe_cfg));
        pp.back().class_name = "peak-vs-pit";
    }
    auto shuffled_cfg = probe_cfg;
    shuffled_cfg.shuffle_labels = true;
    pp.push_back(probe_classification(k4, pool, pp_scene.raster, scale30, shuffled_cfg));
    pp.back().class_name = "peak-vs-pit (shuffled labels)";
    std::string csv = ProbeResult::csv_header();
    for (const auto& r : pp) {
        csv += r.csv_row();
    }
    write("peak_pit.csv", csv);
    const bool probe_ok = pp[2].mean_accuracy >= 0.85 && std::abs(pp[3].mean_accuracy - 0.5) <= 0.1;
    md << "\n## Peak vs pit, 1000/200 protocol\n\n" << probe_markdown_table(pp) << "\n" << verdict(probe_ok) << "\n";

    // eval: fractal factor
    log("multi-scale benchmark");
    const auto ms_scene = make_scene(multiscale_scene(seeds.multiscale));
    write_geotiff(root / "terrain/multiscale.tif", ms_scene.raster);
    require_outside(ms_scene.labels.at("peak"), europe_train_polygon());
    ProbeConfig ms_cfg = probe_cfg;
    ms_cfg.n_train = 400;
    ms_cfg.n_test = 100;
    const auto ms1 = multiscale_benchmark(k1, ms_scene, kBenchmarkScales, ms_cfg);
    const auto ms4 = multiscale_benchmark(k4, ms_scene, kBenchmarkScales, ms_cfg);
    std::vector<ProbeResult> ms_all;
    csv = ProbeResult::csv_header();
    int within = 0;
    int higher = 0;
    for (std::size_t i = 0; i < ms1.size(); ++i) {
        ms_all.push_back(ms1[i]);
        ms_all.push_back(ms4[i]);
        csv += ms1[i].csv_row() + ms4[i].csv_row();
        within += ms4[i].mean_accuracy >= ms1[i].mean_accuracy - ms1[i].std_accuracy;
        higher += ms4[i].mean_accuracy > ms1[i].mean_accuracy;
    }
    write("multiscale.csv", csv);
    const bool fractal_ok = within == static_cast<int>(ms1.size()) && higher >= 1;
    md << "\n## Fractal factor, 400/100 protocol\n\n" << probe_markdown_table(ms_all) << "\ntopo2vec-4 within one std of "
       << "topo2vec-1: " << within << "/" << ms1.size() << "; strictly higher: " << higher << " " << verdict(fractal_ok)
       << "\n";

    // index + retrieve
    log("ridge retrieval");
    const auto ridge = make_scene(ridge_scene(seeds.ridge));
    write_geotiff(root / "terrain/ridge.tif", ridge.raster);
    const auto rr = ridge_retrieval_oracle(k4, ridge, 30.0, seeds.ridge);
    const auto index = build_embedding_index(rr.indexed, k4, ridge.raster, scale30);
    fs::create_directories(root / "index");
    index.save(root / "index/ridge");
    const std::vector<GeoCoordinate> first{index.coord(0)};
    write("retrieval.csv", format_neighbors_csv(knn_retrieve(index, k4, ridge.raster, first, 10)));
    std::size_t self_hits = 0;
    for (std::size_t i = 0; i < index.size(); ++i) {
        const std::vector<GeoCoordinate> q{index.coord(i)};
        const auto top = knn_retrieve(index, k4, ridge.raster, q, 1).front();
        self_hits += top.coord == index.coord(i) && top.distance == 0.0;
    }
    const bool self_ok = self_hits == index.size();
    md << "\n## Ridge retrieval (topo2vec-4, 30 m/pixel)\n\nIndex size " << rr.index_size
       << "; mean precision@10 over " << rr.precision_at_10.size() << " query pairs "
       << format_double(rr.mean_precision) << "; self-retrieval at rank 1 with distance 0: "
       << self_hits << "/" << index.size() << " " << verdict(self_ok && rr.mean_precision >= 0.7) << "\n";

    manifest.config["checkpoint-k1"] = k1.checkpoint_hash();
    manifest.config["checkpoint-k4"] = k4.checkpoint_hash();
    write("report.md", md.str());
    finish(manifest, root / "report.md");
    std::cout << md.str();
}

} // namespace

void register_repro_desk(CLI::App& app, Registry& reg) {
    auto o = std::make_shared<DeskOpts>();
    auto* cmd = reg.add(app, "repro-desk", "Synthetic end-to-end reproduction: synth, train, scan, eval, retrieve",
                        [o](CLI::App& sub) { run_desk(*o, sub); });
    cmd->add_option("--seed", o->seed, "Base seed")->capture_default_str();
    cmd->add_option("--out-dir", o->out_dir, "Output directory")->required();
    cmd->add_option("--steps", o->steps, "Training steps per model")->capture_default_str();
    cmd->add_option("--seeds", o->seeds, "Evaluation seeds")->capture_default_str();
    cmd->add_option("--jobs", o->jobs, "Parallel seeds")->capture_default_str();
}

} // namespace topoembed::cli
