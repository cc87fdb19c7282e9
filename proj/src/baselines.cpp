#include "topoembed/baselines.hpp"

#include "topoembed/error.hpp"
#include "topoembed/nn/optim.hpp"
#include "topoembed/training.hpp"
#include "topoembed/util.hpp"

#include "json.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace topoembed {

namespace {

constexpr const char* kCnnArchVersion = "cnn-2conv-2fc-1";

void check_patch(std::span<const double> patch) {
    require(patch.size() == static_cast<std::size_t>(kIdEmbeddingDim), ErrorKind::Contract,
            "expected a 17x17 patch (289 values), got " + std::to_string(patch.size()));
}

nn::Tensor gather(const nn::Tensor& x, std::span<const std::size_t> rows) {
    const auto& s = x.shape();
    nn::Tensor out({static_cast<int>(rows.size()), s.c, s.h, s.w});
    const std::size_t stride = s.sample_size();
    for (std::size_t i = 0; i < rows.size(); ++i) {
        std::copy_n(x.data() + rows[i] * stride, stride, out.data() + i * stride);
    }
    return out;
}

} // namespace

std::string_view to_string(ModelKind kind) noexcept {
    switch (kind) {
    case ModelKind::Id: return "id";
    case ModelKind::Cnn: return "cnn";
    case ModelKind::Topo2vec: return "topo2vec";
    }
    return "unknown";
}

ModelKind parse_model_kind(std::string_view name) {
    if (name == "id") return ModelKind::Id;
    if (name == "cnn") return ModelKind::Cnn;
    if (name == "topo2vec") return ModelKind::Topo2vec;
    fail(ErrorKind::Domain, "unknown model kind '" + std::string(name) + "'");
}

std::vector<double> id_embed(std::span<const double> patch) {
    check_patch(patch);
    return {patch.begin(), patch.end()};
}

CnnClassifier::CnnClassifier(std::vector<std::string> names, int hidden, std::uint64_t s)
    : head_names(std::move(names)), seed(s), hidden_(hidden) {
    require(!head_names.empty(), ErrorKind::Domain, "classifier needs at least one head");
    require(hidden >= 1, ErrorKind::Domain, "hidden width must be positive");
    trunk.add<nn::Conv2d>(1, 8, 3, 1, nn::Padding::uniform(1));
    trunk.add<nn::ReLU>();
    trunk.add<nn::MaxPool2d>();
    trunk.add<nn::Conv2d>(8, 16, 3, 1, nn::Padding::uniform(1));
    trunk.add<nn::ReLU>();
    trunk.add<nn::MaxPool2d>();
    trunk.add<nn::Flatten>();
    trunk.add<nn::Linear>(16 * 4 * 4, hidden);
    trunk.add<nn::ReLU>();
    head.add<nn::Linear>(hidden, head_count());
    auto rng = make_rng(seed, "init/cnn");
    trunk.initialize(rng);
    head.initialize(rng);
}

nn::Tensor CnnClassifier::embed(const nn::Tensor& x) const { return trunk.infer(x); }

nn::Tensor CnnClassifier::logits(const nn::Tensor& x) const { return head.infer(trunk.infer(x)); }

std::vector<double> CnnClassifier::probabilities(const nn::Tensor& x, int head_index) const {
    require(head_index >= 0 && head_index < head_count(), ErrorKind::Contract, "head index out of range");
    const auto l = logits(x);
    std::vector<double> out(static_cast<std::size_t>(x.shape().n));
    for (int i = 0; i < x.shape().n; ++i) {
        out[static_cast<std::size_t>(i)] = probability_from_logit(l.at(i, head_index, 0, 0));
    }
    return out;
}

CnnFitReport fit_cnn(CnnClassifier& model, const nn::Tensor& x, std::span<const double> targets,
                     std::span<const unsigned char> mask, const CnnConfig& config) {
    const int n = x.shape().n;
    const auto heads = static_cast<std::size_t>(model.head_count());
    require(n > 0, ErrorKind::Capacity, "no training examples");
    require(targets.size() == static_cast<std::size_t>(n) * heads && mask.size() == targets.size(),
            ErrorKind::Contract, "targets/mask must be n x heads");
    require(config.epochs >= 0 && config.batch_size >= 1 && config.lr > 0.0, ErrorKind::Domain,
            "invalid CNN training config");

    auto params = model.trunk.parameters();
    auto head_params = model.head.parameters();
    params.insert(params.end(), head_params.begin(), head_params.end());
    nn::OptimizerConfig opt_cfg;
    opt_cfg.lr = config.lr;
    opt_cfg.beta1 = 0.9;
    nn::Optimizer opt(params, opt_cfg);

    CnnFitReport report;
    std::vector<std::size_t> order(static_cast<std::size_t>(n));
    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        std::iota(order.begin(), order.end(), std::size_t{0});
        auto rng = make_rng(config.seed, "cnn/shuffle", static_cast<std::uint64_t>(epoch));
        std::shuffle(order.begin(), order.end(), rng);
        double epoch_loss = 0.0;
        std::size_t terms = 0;
        for (std::size_t first = 0; first < order.size(); first += static_cast<std::size_t>(config.batch_size)) {
            const auto rows = std::span<const std::size_t>(order).subspan(
                first, std::min(order.size() - first, static_cast<std::size_t>(config.batch_size)));
            std::size_t active = 0;
            for (auto r : rows) {
                for (std::size_t h = 0; h < heads; ++h) {
                    active += mask[r * heads + h] != 0;
                }
            }
            if (active == 0) {
                continue;
            }
            opt.zero_grad();
            const auto logits = model.head.forward(model.trunk.forward(gather(x, rows), nn::Mode::Train),
                                                   nn::Mode::Train);
            nn::Tensor grad(logits.shape());
            for (std::size_t i = 0; i < rows.size(); ++i) {
                for (std::size_t h = 0; h < heads; ++h) {
                    const std::size_t t = rows[i] * heads + h;
                    if (mask[t] == 0) {
                        continue;
                    }
                    nn::Tensor one({1, 1, 1, 1}, logits.at(static_cast<int>(i), static_cast<int>(h), 0, 0));
                    nn::Tensor g;
                    epoch_loss += bce_with_logits(one, targets[t], &g);
                    ++terms;
                    grad.at(static_cast<int>(i), static_cast<int>(h), 0, 0) = g[0] / static_cast<double>(active);
                }
            }
            model.trunk.backward(model.head.backward(grad));
            opt.step();
        }
        report.epoch_loss.push_back(terms == 0 ? 0.0 : epoch_loss / static_cast<double>(terms));
        require(std::isfinite(report.epoch_loss.back()), ErrorKind::Numeric,
                "non-finite CNN loss at epoch " + std::to_string(epoch));
    }

    const auto logits = model.logits(x);
    std::size_t correct = 0;
    std::size_t total = 0;
    for (int i = 0; i < n; ++i) {
        for (std::size_t h = 0; h < heads; ++h) {
            const std::size_t t = static_cast<std::size_t>(i) * heads + h;
            if (mask[t] == 0) {
                continue;
            }
            const bool predicted = logits.at(i, static_cast<int>(h), 0, 0) > 0.0;
            correct += predicted == (targets[t] > 0.5);
            ++total;
        }
    }
    report.train_accuracy = total == 0 ? 0.0 : static_cast<double>(correct) / static_cast<double>(total);
    return report;
}

CnnFitReport fit_cnn(CnnClassifier& model, const nn::Tensor& x, std::span<const int> labels,
                     const CnnConfig& config) {
    require(model.head_count() == 1, ErrorKind::Contract, "binary fit needs a single-head classifier");
    std::vector<double> targets(labels.begin(), labels.end());
    std::vector<unsigned char> mask(labels.size(), 1);
    return fit_cnn(model, x, targets, mask, config);
}

const std::vector<std::string>& cnn_baseline_classes() {
    static const std::vector<std::string> classes = {"peak", "river", "cliff", "saddle"};
    return classes;
}

CnnClassifier train_supervised_cnn(const std::vector<LabeledCoordSet>& datasets, const ElevationRaster& raster,
                                   const ScaleSpec& scale, const CnnConfig& config, CnnFitReport* report) {
    require(!datasets.empty(), ErrorKind::Capacity, "no class datasets given");
    std::vector<std::string> names;
    std::vector<std::vector<double>> patches;
    std::vector<double> targets;
    std::vector<unsigned char> mask;
    const std::size_t heads = datasets.size();
    for (std::size_t h = 0; h < heads; ++h) {
        const auto& set = datasets[h];
        names.push_back(set.class_tag.name.empty() ? "class" + std::to_string(h) : set.class_tag.name);
        auto ds = to_image_dataset(set, scale, raster);
        const auto positives = std::count(ds.labels.begin(), ds.labels.end(), 1);
        require(positives > 0, ErrorKind::Capacity, "class '" + names.back() + "' has no usable positives");
        for (std::size_t i = 0; i < ds.size(); ++i) {
            patches.push_back(std::move(ds.patches[i]));
            for (std::size_t k = 0; k < heads; ++k) {
                targets.push_back(k == h ? ds.labels[i] : 0.0);
                mask.push_back(k == h ? 1 : 0);
            }
        }
    }
    CnnClassifier model(names, config.hidden, config.seed);
    auto fit = fit_cnn(model, patches_to_tensor(patches), targets, mask, config);
    if (report != nullptr) {
        *report = std::move(fit);
    }
    return model;
}

std::string cnn_hash(const CnnClassifier& model) {
    return hex64(fnv1a64(encode_state_blob({&model.trunk, &model.head})));
}

std::string save_cnn_checkpoint(const std::filesystem::path& prefix, const CnnClassifier& model) {
    const std::string blob = encode_state_blob({&model.trunk, &model.head});
    const std::string hash = hex64(fnv1a64(blob));
    nlohmann::json manifest = {
        {"kind", "cnn"},
        {"arch_version", kCnnArchVersion},
        {"heads", model.head_names},
        {"hidden", model.hidden_dim()},
        {"seed", model.seed},
        {"normalization", "per-patch-minmax"},
        {"blob_hash", hash},
    };
    auto bin = prefix;
    bin += ".bin";
    auto json = prefix;
    json += ".json";
    write_file_atomic(bin, blob);
    write_file_atomic(json, manifest.dump(2) + "\n");
    return hash;
}

CnnClassifier load_cnn_checkpoint(const std::filesystem::path& prefix) {
    auto json_path = prefix;
    json_path += ".json";
    auto bin_path = prefix;
    bin_path += ".bin";
    nlohmann::json manifest;
    try {
        manifest = nlohmann::json::parse(read_file(json_path));
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorKind::Io, "malformed checkpoint manifest " + json_path.string() + ": " + e.what());
    }
    require(manifest.value("kind", "") == "cnn", ErrorKind::Contract, "checkpoint is not a CNN classifier");
    require(manifest.value("arch_version", "") == kCnnArchVersion, ErrorKind::Contract,
            "CNN checkpoint arch_version mismatch");
    CnnClassifier model(manifest.at("heads").get<std::vector<std::string>>(), manifest.at("hidden").get<int>(),
                        manifest.value("seed", std::uint64_t{0}));
    const std::string blob = read_file(bin_path);
    require(hex64(fnv1a64(blob)) == manifest.value("blob_hash", ""), ErrorKind::Io,
            "checkpoint blob hash does not match manifest");
    restore_states({&model.trunk, &model.head}, decode_state_blob(blob));
    return model;
}

EmbeddingModelHandle EmbeddingModelHandle::id() { return {}; }

EmbeddingModelHandle EmbeddingModelHandle::topo2vec(std::shared_ptr<const ModelBundle> bundle) {
    require(bundle != nullptr, ErrorKind::Contract, "null model bundle");
    EmbeddingModelHandle h;
    h.kind_ = ModelKind::Topo2vec;
    h.output_dim_ = kLatentDim;
    h.hash_ = bundle_hash(*bundle);
    h.bundle_ = std::move(bundle);
    return h;
}

EmbeddingModelHandle EmbeddingModelHandle::cnn(std::shared_ptr<const CnnClassifier> model) {
    require(model != nullptr, ErrorKind::Contract, "null CNN model");
    EmbeddingModelHandle h;
    h.kind_ = ModelKind::Cnn;
    h.output_dim_ = model->hidden_dim();
    h.hash_ = cnn_hash(*model);
    h.cnn_ = std::move(model);
    return h;
}

EmbeddingModelHandle EmbeddingModelHandle::load(const std::string& spec) {
    if (spec == "id") {
        return id();
    }
    auto json_path = std::filesystem::path(spec);
    json_path += ".json";
    nlohmann::json manifest;
    try {
        manifest = nlohmann::json::parse(read_file(json_path));
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorKind::Io, "malformed checkpoint manifest " + json_path.string() + ": " + e.what());
    }
    switch (parse_model_kind(manifest.value("kind", ""))) {
    case ModelKind::Topo2vec: return topo2vec(std::make_shared<const ModelBundle>(load_checkpoint(spec)));
    case ModelKind::Cnn: return cnn(std::make_shared<const CnnClassifier>(load_cnn_checkpoint(spec)));
    case ModelKind::Id: return id();
    }
    fail(ErrorKind::Contract, "unreachable model kind");
}

std::string EmbeddingModelHandle::name() const {
    if (kind_ == ModelKind::Topo2vec) {
        return "topo2vec-" + std::to_string(bundle_->k);
    }
    return std::string(to_string(kind_));
}

std::string EmbeddingModelHandle::checkpoint_hash() const { return hash_; }

std::vector<std::vector<double>> EmbeddingModelHandle::embed(const std::vector<std::vector<double>>& patches) const {
    std::vector<std::vector<double>> out;
    out.reserve(patches.size());
    for (const auto& p : patches) {
        out.push_back(embed_one(p));
    }
    return out;
}

// One sample per pass: batched GEMM blocking could change the summation
// order, and retrieval relies on bit-identical re-embedding.
std::vector<double> EmbeddingModelHandle::embed_one(std::span<const double> patch) const {
    check_patch(patch);
    if (kind_ == ModelKind::Id) {
        return id_embed(patch);
    }
    const auto x = nn::Tensor({1, 1, kPatchSide, kPatchSide}, std::vector<double>(patch.begin(), patch.end()));
    const auto z = kind_ == ModelKind::Topo2vec ? encode_batch(bundle_->encoder, x) : cnn_->embed(x);
    return z.values();
}

} // namespace topoembed
