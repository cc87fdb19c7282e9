#include "topoembed/training.hpp"

#include "topoembed/error.hpp"
#include "topoembed/patch.hpp"
#include "topoembed/util.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>

namespace topoembed {

namespace {

bool is_power_of_two(int k) { return k > 0 && (k & (k - 1)) == 0; }

void require_same_shape(const nn::Tensor& a, const nn::Tensor& b, const char* what) {
    require(a.shape() == b.shape(), ErrorKind::Contract,
            std::string(what) + ": shape mismatch " + a.shape().str() + " vs " + b.shape().str());
}

void require_pair_inputs(const nn::Tensor& x_resized, const nn::Tensor& y) {
    const nn::Shape want{x_resized.shape().n, 1, kDiscriminatorSide, kDiscriminatorSide};
    require(x_resized.shape() == want && y.shape() == want, ErrorKind::Contract,
            "discriminator pair needs two (n,1,64,64) halves, got " + x_resized.shape().str() + " and " +
                y.shape().str());
}

nn::OptimizerConfig optimizer_config(const TrainConfig& c, double lr) {
    nn::OptimizerConfig o;
    o.kind = c.optimizer;
    o.lr = lr;
    o.beta1 = c.beta1;
    o.beta2 = c.beta2;
    return o;
}

std::string optional_field(const std::optional<double>& v) { return v ? format_double(*v) : std::string(); }

} // namespace

void validate(const TrainConfig& c) {
    require(!c.locations.empty(), ErrorKind::Domain, "training needs at least one location");
    require(!c.scales.empty(), ErrorKind::Domain, "training needs at least one scale");
    for (double s : c.scales) {
        require(std::isfinite(s) && s > 0.0, ErrorKind::Domain, "scales must be positive");
    }
    require(is_power_of_two(c.k) && is_valid_fractal_factor(c.k), ErrorKind::Domain,
            "k must be a supported power of two, got " + std::to_string(c.k));
    require(c.lambda_rec >= 0.0 && c.lambda_adv >= 0.0, ErrorKind::Domain, "loss weights must be non-negative");
    require(c.lambda_rec > 0.0 || c.lambda_adv > 0.0, ErrorKind::Domain, "loss weights must not both be zero");
    require(c.p >= 1.0, ErrorKind::Domain, "p must be at least 1");
    require(c.lr_generator > 0.0 && c.lr_discriminator > 0.0, ErrorKind::Domain, "learning rates must be positive");
    require(c.batch_size >= 1, ErrorKind::Domain, "batch_size must be at least 1");
    require(c.max_steps >= 0, ErrorKind::Domain, "max_steps must be non-negative");
    require(!(c.adversarial() && kDecoderBaseSide * c.k != kDiscriminatorSide), ErrorKind::Contract,
            "adversarial training needs k=4 (decoder output must be 64x64), got k=" + std::to_string(c.k));
}

std::string TrainReport::to_csv() const {
    std::string out = "step,scale,l_p,l_g_adv,l_d_adv\n";
    for (const auto& r : steps) {
        out += std::to_string(r.step) + "," + format_double(r.scale) + "," + format_double(r.l_p) + "," +
               optional_field(r.l_g_adv) + "," + optional_field(r.l_d_adv) + "\n";
    }
    return out;
}

double lp_loss(const nn::Tensor& pred, const nn::Tensor& target, double p, nn::Tensor* grad) {
    require_same_shape(pred, target, "lp_loss");
    require(p >= 1.0, ErrorKind::Domain, "p must be at least 1");
    require(pred.size() > 0, ErrorKind::Contract, "lp_loss on empty tensors");
    const double inv_n = 1.0 / static_cast<double>(pred.size());
    if (grad != nullptr) {
        *grad = nn::Tensor(pred.shape());
    }
    double sum = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const double d = pred[i] - target[i];
        const double a = std::abs(d);
        if (p == 1.0) {
            sum += a;
        } else {
            sum += std::pow(a, p);
        }
        if (grad != nullptr && d != 0.0) {
            const double mag = p == 1.0 ? 1.0 : p * std::pow(a, p - 1.0);
            (*grad)[i] = (d > 0.0 ? mag : -mag) * inv_n;
        }
    }
    return sum * inv_n;
}

double bce_with_logits(const nn::Tensor& logits, double label, nn::Tensor* grad) {
    require(logits.size() > 0, ErrorKind::Contract, "BCE on empty logits");
    const double inv_n = 1.0 / static_cast<double>(logits.size());
    if (grad != nullptr) {
        *grad = nn::Tensor(logits.shape());
    }
    double sum = 0.0;
    for (std::size_t i = 0; i < logits.size(); ++i) {
        const double l = logits[i];
        sum += std::max(l, 0.0) - l * label + std::log1p(std::exp(-std::abs(l)));
        if (grad != nullptr) {
            const double sig = l >= 0.0 ? 1.0 / (1.0 + std::exp(-l)) : std::exp(l) / (1.0 + std::exp(l));
            (*grad)[i] = (sig - label) * inv_n;
        }
    }
    return sum * inv_n;
}

nn::Tensor condition_for_discriminator(const nn::Tensor& x) {
    require(x.shape().c == 1 && x.shape().h == kPatchSide && x.shape().w == kPatchSide, ErrorKind::Contract,
            "expected (n,1,17,17) input, got " + x.shape().str());
    return nn::resize_bilinear(x, kDiscriminatorSide, kDiscriminatorSide);
}

double generator_adv_loss(nn::Sequential& discriminator, const nn::Tensor& x_resized, const nn::Tensor& y_hat,
                          nn::Tensor* grad_y_hat) {
    require_pair_inputs(x_resized, y_hat);
    const auto logits = discriminator.forward(nn::concat_channels(x_resized, y_hat), nn::Mode::Train);
    if (grad_y_hat == nullptr) {
        return bce_with_logits(logits, 1.0);
    }
    nn::Tensor g;
    const double loss = bce_with_logits(logits, 1.0, &g);
    *grad_y_hat = nn::channel(discriminator.backward(g), 1);
    discriminator.zero_grad();
    return loss;
}

double discriminator_adv_loss(nn::Sequential& discriminator, const nn::Tensor& x_resized, const nn::Tensor& y_real,
                              const nn::Tensor& y_hat, bool accumulate_grads) {
    require_pair_inputs(x_resized, y_real);
    require_pair_inputs(x_resized, y_hat);
    double total = 0.0;
    for (const auto& [y, label] : {std::pair{&y_real, 1.0}, std::pair{&y_hat, 0.0}}) {
        const auto logits = discriminator.forward(nn::concat_channels(x_resized, *y), nn::Mode::Train);
        nn::Tensor g;
        total += bce_with_logits(logits, label, accumulate_grads ? &g : nullptr);
        if (accumulate_grads) {
            discriminator.backward(g);
        }
    }
    return total;
}

std::string_view to_string(TargetNormalization n) noexcept {
    return n == TargetNormalization::InputFrame ? "input-frame" : "per-tile";
}

TargetNormalization parse_target_normalization(std::string_view name) {
    if (name == "input-frame") return TargetNormalization::InputFrame;
    if (name == "per-tile") return TargetNormalization::PerTile;
    fail(ErrorKind::Domain, "unknown target normalization '" + std::string(name) + "'");
}

PairedBatch make_paired_batch(const ElevationRaster& raster, std::span<const GeoCoordinate> coords, double scale,
                              int k, TargetNormalization normalization) {
    require(is_valid_fractal_factor(k), ErrorKind::Domain, "unsupported k=" + std::to_string(k));
    const auto spec = ScaleSpec::from_resolution(scale, kPatchHalfExtent);
    const int target_side = kDecoderBaseSide * k;
    std::vector<std::vector<double>> xs;
    std::vector<std::vector<double>> ys;
    PairedBatch batch;
    for (std::size_t i = 0; i < coords.size(); ++i) {
        auto patch = try_extract_patch(raster, coords[i], spec);
        auto target = patch ? try_sample_footprint(raster, coords[i], spec.radius_m(), target_side) : std::nullopt;
        if (!patch || !target) {
            ++batch.rejected;
            continue;
        }
        if (normalization == TargetNormalization::PerTile) {
            normalize_in_place(*target);
        } else {
            const auto [lo, hi] = std::minmax_element(patch->values.begin(), patch->values.end());
            const double low = *lo;
            const double range = *hi - *lo;
            for (auto& v : *target) {
                v = range > 0.0 ? (v - low) / range : 0.0;
            }
        }
        normalize_in_place(patch->values);
        xs.push_back(std::move(patch->values));
        ys.push_back(std::move(*target));
        batch.coords.push_back(coords[i]);
        batch.source_index.push_back(i);
    }
    const int n = static_cast<int>(xs.size());
    batch.x = nn::Tensor({n, 1, kPatchSide, kPatchSide});
    batch.y = nn::Tensor({n, 1, target_side, target_side});
    for (int b = 0; b < n; ++b) {
        std::copy(xs[b].begin(), xs[b].end(), batch.x.data() + batch.x.index(b, 0, 0, 0));
        std::copy(ys[b].begin(), ys[b].end(), batch.y.data() + batch.y.index(b, 0, 0, 0));
    }
    return batch;
}

Trainer::Trainer(ModelBundle& bundle, const TrainConfig& config)
    : bundle_(bundle),
      config_(config),
      gen_params_([&] {
          validate(config);
          require(bundle.k == config.k, ErrorKind::Contract,
                  "bundle k=" + std::to_string(bundle.k) + " does not match config k=" + std::to_string(config.k));
          auto params = bundle.encoder.parameters();
          auto dec = bundle.decoder.parameters();
          params.insert(params.end(), dec.begin(), dec.end());
          return params;
      }()),
      gen_opt_(gen_params_, optimizer_config(config, config.lr_generator)) {
    if (config_.adversarial()) {
        disc_opt_.emplace(bundle_.discriminator.parameters(), optimizer_config(config_, config_.lr_discriminator));
    }
}

GeneratorLosses Trainer::generator_gradients(const nn::Tensor& x, const nn::Tensor& y, nn::Tensor* y_hat) {
    gen_opt_.zero_grad();
    const auto z = bundle_.encoder.forward(x, nn::Mode::Train);
    auto pred = bundle_.decoder.forward(z, nn::Mode::Train);
    require_same_shape(pred, y, "generator target");

    GeneratorLosses losses;
    nn::Tensor grad;
    losses.l_p = lp_loss(pred, y, config_.p, &grad);
    for (auto& g : grad.values()) {
        g *= config_.lambda_rec;
    }
    if (config_.adversarial()) {
        nn::Tensor g_adv;
        losses.l_g_adv = generator_adv_loss(bundle_.discriminator, condition_for_discriminator(x), pred, &g_adv);
        for (std::size_t i = 0; i < grad.size(); ++i) {
            grad[i] += config_.lambda_adv * g_adv[i];
        }
    }
    bundle_.encoder.backward(bundle_.decoder.backward(grad));
    if (y_hat != nullptr) {
        *y_hat = std::move(pred);
    }
    return losses;
}

StepRecord Trainer::step(const nn::Tensor& x, const nn::Tensor& y, double scale) {
    StepRecord rec;
    rec.step = bundle_.training_step;
    rec.scale = scale;
    nn::Tensor y_hat;
    const auto losses = generator_gradients(x, y, &y_hat);
    rec.l_p = losses.l_p;
    rec.l_g_adv = losses.l_g_adv;
    const auto bad = [](double v) { return !std::isfinite(v); };
    if (bad(rec.l_p) || (rec.l_g_adv && bad(*rec.l_g_adv))) {
        fail(ErrorKind::Numeric, "non-finite generator loss at step " + std::to_string(rec.step) + ", scale " +
                                     format_double(scale) + " (l_p=" + format_double(rec.l_p) + ")");
    }
    gen_opt_.step();
    if (disc_opt_) {
        disc_opt_->zero_grad();
        rec.l_d_adv =
            discriminator_adv_loss(bundle_.discriminator, condition_for_discriminator(x), y, y_hat, true);
        if (bad(*rec.l_d_adv)) {
            fail(ErrorKind::Numeric, "non-finite discriminator loss at step " + std::to_string(rec.step) +
                                         ", scale " + format_double(scale));
        }
        disc_opt_->step();
    }
    ++bundle_.training_step;
    return rec;
}

ConvergenceMonitor::ConvergenceMonitor(int window, double tolerance, int patience)
    : window_(window), tolerance_(tolerance), patience_(patience) {
    require(window >= 1 && patience >= 1, ErrorKind::Domain, "invalid convergence settings");
}

bool ConvergenceMonitor::add(double loss) {
    sum_ += loss;
    if (++count_ < window_) {
        return false;
    }
    const double mean = sum_ / count_;
    sum_ = 0.0;
    count_ = 0;
    if (previous_) {
        const double rel = (*previous_ - mean) / std::max(std::abs(*previous_), 1e-12);
        stalled_ = rel < tolerance_ ? stalled_ + 1 : 0;
    }
    previous_ = mean;
    return stalled_ >= patience_;
}

TrainReport train_topo2vec(ModelBundle& bundle, const TrainConfig& config, const ElevationRaster& raster,
                           const ProgressFn& progress) {
    const auto start = std::chrono::steady_clock::now();
    Trainer trainer(bundle, config);
    bundle.scales = config.scales;
    bundle.normalization = "per-patch-minmax/target-" + std::string(to_string(config.target_normalization));
    TrainReport report;
    ConvergenceMonitor monitor;
    std::vector<bool> rejected(config.locations.size(), false);
    std::vector<std::size_t> order(config.locations.size());
    long long done = 0;
    report.stop_reason = "max_steps";
    for (std::uint64_t epoch = 0; done < config.max_steps; ++epoch) {
        std::iota(order.begin(), order.end(), std::size_t{0});
        auto rng = make_rng(config.seed, "train/shuffle", epoch);
        std::shuffle(order.begin(), order.end(), rng);
        long long epoch_steps = 0;
        bool stop = false;
        for (std::size_t first = 0; first < order.size() && !stop; first += config.batch_size) {
            const std::size_t last = std::min(order.size(), first + static_cast<std::size_t>(config.batch_size));
            std::vector<GeoCoordinate> coords;
            for (std::size_t i = first; i < last; ++i) {
                coords.push_back(config.locations[order[i]]);
            }
            for (double s : config.scales) {
                auto batch = make_paired_batch(raster, coords, s, config.k, config.target_normalization);
                if (batch.rejected > 0) {
                    std::vector<bool> kept(coords.size(), false);
                    for (auto i : batch.source_index) {
                        kept[i] = true;
                    }
                    for (std::size_t i = 0; i < coords.size(); ++i) {
                        if (!kept[i]) {
                            rejected[order[first + i]] = true;
                        }
                    }
                }
                if (batch.size() == 0) {
                    continue;
                }
                StepRecord rec;
                try {
                    rec = trainer.step(batch.x, batch.y, s);
                } catch (const Error& e) {
                    if (e.kind() != ErrorKind::Numeric) {
                        throw;
                    }
                    fail(ErrorKind::Numeric, std::string(e.what()) + "; batch starts at (" +
                                                 format_double(batch.coords.front().lon) + ", " +
                                                 format_double(batch.coords.front().lat) + "), " +
                                                 std::to_string(batch.size()) + " locations");
                }
                report.steps.push_back(rec);
                if (progress) {
                    progress(rec);
                }
                ++done;
                ++epoch_steps;
                const double total =
                    config.lambda_rec * rec.l_p + config.lambda_adv * rec.l_g_adv.value_or(0.0);
                if (config.stop_on_convergence && monitor.add(total)) {
                    report.stop_reason = "converged";
                    stop = true;
                    break;
                }
                if (done >= config.max_steps) {
                    stop = true;
                    break;
                }
            }
        }
        if (stop) {
            break;
        }
        require(epoch_steps > 0, ErrorKind::DataQuality,
                "no training location yields a complete input/target pair at any scale");
    }
    report.rejected_locations = static_cast<std::size_t>(std::count(rejected.begin(), rejected.end(), true));
    report.checkpoint_hash = bundle_hash(bundle);
    report.wall_clock_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return report;
}

std::pair<ModelBundle, TrainReport> train_topo2vec(const TrainConfig& config, const ElevationRaster& raster,
                                                   const ProgressFn& progress) {
    validate(config);
    auto bundle = init_params(config.seed, config.k);
    auto report = train_topo2vec(bundle, config, raster, progress);
    return {std::move(bundle), std::move(report)};
}

} // namespace topoembed
