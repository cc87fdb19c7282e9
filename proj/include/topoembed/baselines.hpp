#pragma once

#include "topoembed/labels.hpp"
#include "topoembed/models.hpp"

#include <cstdint>
#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace topoembed {

enum class ModelKind { Id, Cnn, Topo2vec };

std::string_view to_string(ModelKind kind) noexcept;
ModelKind parse_model_kind(std::string_view name);

inline constexpr int kIdEmbeddingDim = kPatchSide * kPatchSide;  // 289

/// Row-major flatten of a 17x17 patch.
std::vector<double> id_embed(std::span<const double> patch);

struct CnnConfig {
    int hidden = 64;
    int epochs = 40;
    int batch_size = 32;
    double lr = 1e-3;
    std::uint64_t seed = 0;
};

/// conv(8,3x3)+ReLU+pool, conv(16,3x3)+ReLU+pool, FC->hidden+ReLU, then one
/// logit per head. The embedding is the hidden FC activation.
class CnnClassifier {
public:
    CnnClassifier(std::vector<std::string> head_names, int hidden, std::uint64_t seed);

    nn::Sequential trunk;
    nn::Sequential head;
    std::vector<std::string> head_names;
    std::uint64_t seed = 0;

    int hidden_dim() const noexcept { return hidden_; }
    int head_count() const noexcept { return static_cast<int>(head_names.size()); }

    /// (n,1,17,17) -> (n,hidden,1,1), inference mode.
    nn::Tensor embed(const nn::Tensor& x) const;
    /// (n,1,17,17) -> (n,heads,1,1) logits.
    nn::Tensor logits(const nn::Tensor& x) const;
    /// Sigmoid probabilities of one head.
    std::vector<double> probabilities(const nn::Tensor& x, int head_index = 0) const;

private:
    int hidden_;
};

struct CnnFitReport {
    std::vector<double> epoch_loss;
    double train_accuracy = 0.0;
};

/// Masked multi-label BCE training: sample i contributes to head h only when
/// mask[i*heads+h] is set. targets/mask are (n x heads) row-major.
CnnFitReport fit_cnn(CnnClassifier& model, const nn::Tensor& x, std::span<const double> targets,
                     std::span<const unsigned char> mask, const CnnConfig& config);

/// Single-head convenience for binary labels.
CnnFitReport fit_cnn(CnnClassifier& model, const nn::Tensor& x, std::span<const int> labels, const CnnConfig& config);

/// Heads of the supervised baseline, in order.
const std::vector<std::string>& cnn_baseline_classes();

/// Trains one shared trunk with a binary head per dataset. Each sample only
/// supervises the head of the dataset it came from. Throws Capacity when a
/// class has no usable positives.
CnnClassifier train_supervised_cnn(const std::vector<LabeledCoordSet>& datasets, const ElevationRaster& raster,
                                   const ScaleSpec& scale, const CnnConfig& config, CnnFitReport* report = nullptr);

std::string save_cnn_checkpoint(const std::filesystem::path& prefix, const CnnClassifier& model);
CnnClassifier load_cnn_checkpoint(const std::filesystem::path& prefix);
std::string cnn_hash(const CnnClassifier& model);

/// Uniform embedding interface over the three model kinds.
class EmbeddingModelHandle {
public:
    static EmbeddingModelHandle id();
    static EmbeddingModelHandle topo2vec(std::shared_ptr<const ModelBundle> bundle);
    static EmbeddingModelHandle cnn(std::shared_ptr<const CnnClassifier> model);
    /// Dispatches on the manifest kind of `<prefix>.json`; "id" needs no files.
    static EmbeddingModelHandle load(const std::string& spec);

    ModelKind kind() const noexcept { return kind_; }
    int output_dim() const noexcept { return output_dim_; }
    std::string name() const;
    std::string checkpoint_hash() const;
    const ModelBundle* bundle() const noexcept { return bundle_.get(); }

    /// One vector per normalized 17x17 patch; pure and batch-independent.
    std::vector<std::vector<double>> embed(const std::vector<std::vector<double>>& patches) const;
    std::vector<double> embed_one(std::span<const double> patch) const;

private:
    ModelKind kind_ = ModelKind::Id;
    int output_dim_ = kIdEmbeddingDim;
    std::shared_ptr<const ModelBundle> bundle_;
    std::shared_ptr<const CnnClassifier> cnn_;
    std::string hash_ = "id";
};

} // namespace topoembed
