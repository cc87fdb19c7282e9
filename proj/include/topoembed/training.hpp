#pragma once

#include "topoembed/geo.hpp"
#include "topoembed/models.hpp"
#include "topoembed/nn/optim.hpp"
#include "topoembed/raster.hpp"

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace topoembed {

/// How reconstruction targets are scaled. InputFrame applies the input
/// patch's min-max map to the target; PerTile min-maxes the target itself.
enum class TargetNormalization { InputFrame, PerTile };

std::string_view to_string(TargetNormalization n) noexcept;
TargetNormalization parse_target_normalization(std::string_view name);

struct TrainConfig {
    std::vector<GeoCoordinate> locations;
    std::vector<double> scales{10.0, 30.0, 60.0};  // meters/pixel
    int k = 4;
    double lr_generator = 2e-4;
    double lr_discriminator = 1.6e-3;
    double lambda_rec = 1.0;
    double lambda_adv = 0.0;
    double p = 1.0;
    int batch_size = 16;
    long long max_steps = 1000;
    std::uint64_t seed = 0;
    nn::OptimizerKind optimizer = nn::OptimizerKind::Adam;
    double beta1 = 0.5;
    double beta2 = 0.999;
    /// Stop when the 100-step moving average of the generator loss improves
    /// by less than 1e-4 (relative) over 3 consecutive windows.
    bool stop_on_convergence = true;
    TargetNormalization target_normalization = TargetNormalization::InputFrame;

    bool adversarial() const noexcept { return lambda_adv > 0.0; }
};

/// Throws Domain (bad values) or Contract (k=1 with adversarial loss).
void validate(const TrainConfig& config);

struct StepRecord {
    long long step = 0;
    double scale = 0.0;
    double l_p = 0.0;
    std::optional<double> l_g_adv;
    std::optional<double> l_d_adv;
};

struct TrainReport {
    std::vector<StepRecord> steps;
    double wall_clock_s = 0.0;
    std::size_t rejected_locations = 0;
    std::string stop_reason;
    std::string checkpoint_hash;

    /// Columns step,scale,l_p,l_g_adv,l_d_adv; absent losses are empty.
    std::string to_csv() const;
};

/// Mean over all elements of |pred - target|^p. `grad`, when given,
/// receives d(loss)/d(pred).
double lp_loss(const nn::Tensor& pred, const nn::Tensor& target, double p, nn::Tensor* grad = nullptr);

/// Mean binary cross-entropy of sigmoid(logits) against a constant label,
/// computed from logits for stability. `grad` receives d(loss)/d(logits).
double bce_with_logits(const nn::Tensor& logits, double label, nn::Tensor* grad = nullptr);

/// The (n,1,17,17) input resized to the discriminator's 64x64 grid.
nn::Tensor condition_for_discriminator(const nn::Tensor& x);

/// BCE(d([X, Y_hat]), 1). With `grad_y_hat`, back-propagates through d
/// (Train mode) and returns d(loss)/d(Y_hat); d's parameter gradients are
/// zeroed afterwards.
double generator_adv_loss(nn::Sequential& discriminator, const nn::Tensor& x_resized, const nn::Tensor& y_hat,
                          nn::Tensor* grad_y_hat = nullptr);

/// BCE(d([X, Y]), 1) + BCE(d([X, Y_hat]), 0). With accumulate_grads, adds
/// the parameter gradients to d.
double discriminator_adv_loss(nn::Sequential& discriminator, const nn::Tensor& x_resized, const nn::Tensor& y_real,
                              const nn::Tensor& y_hat, bool accumulate_grads = false);

/// Paired input/target tensors for one location batch at one scale. Only
/// locations where both the 17x17 input and the 16k x 16k target over the
/// same footprint are available survive.
struct PairedBatch {
    nn::Tensor x;
    nn::Tensor y;
    std::vector<GeoCoordinate> coords;
    std::vector<std::size_t> source_index;
    std::size_t rejected = 0;

    int size() const noexcept { return x.shape().n; }
};

PairedBatch make_paired_batch(const ElevationRaster& raster, std::span<const GeoCoordinate> coords, double scale,
                              int k, TargetNormalization normalization = TargetNormalization::InputFrame);

struct GeneratorLosses {
    double l_p = 0.0;
    std::optional<double> l_g_adv;
};

/// Alternating encoder/decoder and discriminator updates over a ModelBundle.
class Trainer {
public:
    Trainer(ModelBundle& bundle, const TrainConfig& config);

    /// Forward, loss and gradient of lambda_rec*L_p + lambda_adv*L_G into
    /// the encoder/decoder gradients (zeroed first). No parameter update.
    /// `y_hat` receives the generator output.
    GeneratorLosses generator_gradients(const nn::Tensor& x, const nn::Tensor& y, nn::Tensor* y_hat = nullptr);

    /// Update of f, g then d on a paired batch.
    StepRecord step(const nn::Tensor& x, const nn::Tensor& y, double scale);

    ModelBundle& bundle() noexcept { return bundle_; }

private:
    ModelBundle& bundle_;
    TrainConfig config_;
    std::vector<nn::Parameter*> gen_params_;
    nn::Optimizer gen_opt_;
    std::optional<nn::Optimizer> disc_opt_;
};

/// Stops when the moving average stalls; see TrainConfig::stop_on_convergence.
class ConvergenceMonitor {
public:
    explicit ConvergenceMonitor(int window = 100, double tolerance = 1e-4, int patience = 3);

    /// Returns true once converged.
    bool add(double loss);

private:
    int window_;
    double tolerance_;
    int patience_;
    double sum_ = 0.0;
    int count_ = 0;
    std::optional<double> previous_;
    int stalled_ = 0;
};

using ProgressFn = std::function<void(const StepRecord&)>;

/// Trains from freshly initialized parameters.
std::pair<ModelBundle, TrainReport> train_topo2vec(const TrainConfig& config, const ElevationRaster& raster,
                                                   const ProgressFn& progress = {});

/// Continues training an existing bundle (its k must match the config).
TrainReport train_topo2vec(ModelBundle& bundle, const TrainConfig& config, const ElevationRaster& raster,
                           const ProgressFn& progress = {});

} // namespace topoembed
