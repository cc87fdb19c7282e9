#pragma once

#include "topoembed/nn/layers.hpp"
#include "topoembed/nn/tensor.hpp"

#include <array>
#include <cstdint>
#include <filesystem>
#include <initializer_list>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace topoembed {

inline constexpr int kPatchHalfExtent = 8;
inline constexpr int kPatchSide = 2 * kPatchHalfExtent + 1;  // 17
inline constexpr int kLatentDim = 128;
inline constexpr int kDecoderBaseSide = 16;
inline constexpr int kDiscriminatorSide = 64;

/// Bumped whenever layer layout changes. "halving" records that the extra
/// super-resolution stages go 8 -> 4 -> 2 filters.
inline constexpr const char* kArchVersion = "fractal-ae-1/decoder-halving";

class LatentVector {
public:
    LatentVector() { values_.fill(0.0); }
    explicit LatentVector(std::span<const double> values);

    std::span<const double> values() const noexcept { return values_; }
    double operator[](std::size_t i) const noexcept { return values_[i]; }
    static constexpr std::size_t size() noexcept { return kLatentDim; }

    friend bool operator==(const LatentVector&, const LatentVector&) = default;

private:
    std::array<double, kLatentDim> values_;
};

/// 1x17x17 -> 8x16x16 -> 16x8x8 -> 32x4x4 -> 64x2x2 -> 128x1x1 -> flatten.
/// Top-level children are those six stages.
nn::Sequential build_encoder();

/// 128x1x1 -> four bilinear upsample stages to 8x16x16, log2(k) further
/// stages halving filters, then a final 3x3 conv to one channel (16k x 16k).
nn::Sequential build_decoder(int k);

/// 2x64x64 -> five conv blocks to 128x1x1 -> FC 128-64-32-1. Emits a logit;
/// discriminate() applies the sigmoid.
nn::Sequential build_discriminator();

bool is_valid_fractal_factor(int k) noexcept;

struct ModelBundle {
    nn::Sequential encoder;
    nn::Sequential decoder;
    nn::Sequential discriminator;
    int k = 1;
    std::vector<double> scales;
    std::uint64_t seed = 0;
    std::string arch_version = kArchVersion;
    std::string normalization = "per-patch-minmax";
    long long training_step = 0;

    int output_side() const noexcept { return kDecoderBaseSide * k; }
};

/// Deterministic fan-in uniform weights, zero biases, identity BatchNorm.
ModelBundle init_params(std::uint64_t seed, int k);

/// Stacks normalized 17x17 patches into an (n,1,17,17) tensor.
nn::Tensor patches_to_tensor(const std::vector<std::vector<double>>& patches);

/// Inference-mode encoding of a single 17x17 patch (row-major values).
LatentVector encode(const nn::Sequential& encoder, std::span<const double> patch);

/// Batched inference encoding; input (n,1,17,17), output (n,128,1,1).
nn::Tensor encode_batch(const nn::Sequential& encoder, const nn::Tensor& patches);

/// Inference-mode decode of one latent into a (1,1,16k,16k) image.
nn::Tensor decode(const nn::Sequential& decoder, const LatentVector& z, int k);

/// Probability in the open interval (0,1) for a (1,2,64,64) pair.
double discriminate(const nn::Sequential& discriminator, const nn::Tensor& pair);

/// Maps logits to probabilities clamped strictly inside (0,1).
double probability_from_logit(double logit) noexcept;

/// Writes `<prefix>.bin` and `<prefix>.json`. Returns the blob hash.
std::string save_checkpoint(const std::filesystem::path& prefix, const ModelBundle& bundle);

/// Throws Contract when the manifest's arch_version or sizes disagree.
ModelBundle load_checkpoint(const std::filesystem::path& prefix);

/// Hash of the serialized parameter blob.
std::string bundle_hash(const ModelBundle& bundle);

/// Serialized parameters and buffers of one network, in layer order.
std::vector<double> flatten_state(const nn::Sequential& net);
void restore_state(nn::Sequential& net, std::span<const double> state);

inline constexpr std::string_view kBlobMagic = "TEMBCKP1";

/// Magic followed by the little-endian float64 state of each network.
std::string encode_state_blob(std::initializer_list<const nn::Sequential*> nets);
std::vector<double> decode_state_blob(std::string_view blob);
/// Splits `values` over the networks in order; sizes must match exactly.
void restore_states(std::initializer_list<nn::Sequential*> nets, std::span<const double> values);

} // namespace topoembed
