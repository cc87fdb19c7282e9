#include "topoembed/models.hpp"

#include "topoembed/error.hpp"
#include "topoembed/util.hpp"

#include "json.hpp"

#include <bit>
#include <cmath>
#include <limits>

namespace topoembed {

using nn::Padding;

LatentVector::LatentVector(std::span<const double> values) {
    require(values.size() == kLatentDim, ErrorKind::Contract,
            "latent vector must have 128 entries, got " + std::to_string(values.size()));
    for (std::size_t i = 0; i < kLatentDim; ++i) {
        require(std::isfinite(values[i]), ErrorKind::Numeric, "latent vector has a non-finite entry");
        values_[i] = values[i];
    }
}

namespace {

void conv_block(nn::Sequential& seq, int in, int out, Padding pad = Padding::uniform(1)) {
    seq.add<nn::Conv2d>(in, out, 3, 1, pad);
    seq.add<nn::BatchNorm2d>(out);
    seq.add<nn::ReLU>();
}

} // namespace

bool is_valid_fractal_factor(int k) noexcept {
    return k >= 1 && k <= 8 && (k & (k - 1)) == 0;
}

nn::Sequential build_encoder() {
    nn::Sequential enc;
    {
        // The first conv pads only the top/left edge so 17 -> 16.
        auto stage = std::make_unique<nn::Sequential>();
        conv_block(*stage, 1, 8, Padding{1, 1, 0, 0});
        conv_block(*stage, 8, 8);
        enc.append(std::move(stage));
    }
    for (int c = 8; c < kLatentDim; c *= 2) {
        auto stage = std::make_unique<nn::Sequential>();
        stage->add<nn::MaxPool2d>();
        conv_block(*stage, c, 2 * c);
        conv_block(*stage, 2 * c, 2 * c);
        enc.append(std::move(stage));
    }
    enc.add<nn::Flatten>();
    return enc;
}

nn::Sequential build_decoder(int k) {
    require(is_valid_fractal_factor(k), ErrorKind::Contract,
            "fractal factor must be a power of two in [1, 8], got " + std::to_string(k));
    nn::Sequential dec;
    int c = kLatentDim;
    auto up_stage = [&](int in, int out) {
        auto stage = std::make_unique<nn::Sequential>();
        stage->add<nn::Upsample2x>();
        conv_block(*stage, in, out);
        conv_block(*stage, out, out);
        dec.append(std::move(stage));
    };
    for (; c > 8; c /= 2) {
        up_stage(c, c / 2);
    }
    for (int factor = 1; factor < k; factor *= 2) {
        const int next = std::max(1, c / 2);
        up_stage(c, next);
        c = next;
    }
    auto head = std::make_unique<nn::Sequential>();
    head->add<nn::Conv2d>(c, 1, 3, 1, Padding::uniform(1));
    dec.append(std::move(head));
    return dec;
}

nn::Sequential build_discriminator() {
    nn::Sequential disc;
    int in = 2;
    for (int out = 8; out <= 64; out *= 2) {
        disc.add<nn::Conv2d>(in, out, 4, 2, Padding::uniform(1));
        disc.add<nn::BatchNorm2d>(out);
        disc.add<nn::ReLU>();
        in = out;
    }
    disc.add<nn::Conv2d>(64, 128, 4, 1, Padding{});
    disc.add<nn::BatchNorm2d>(128);
    disc.add<nn::ReLU>();
    disc.add<nn::Flatten>();
    disc.add<nn::Linear>(128, 64);
    disc.add<nn::ReLU>();
    disc.add<nn::Linear>(64, 32);
    disc.add<nn::ReLU>();
    disc.add<nn::Linear>(32, 1);
    return disc;
}

ModelBundle init_params(std::uint64_t seed, int k) {
    ModelBundle b;
    b.k = k;
    b.seed = seed;
    b.encoder = build_encoder();
    b.decoder = build_decoder(k);
    b.discriminator = build_discriminator();
    auto rf = make_rng(seed, "init/encoder");
    auto rg = make_rng(seed, "init/decoder");
    auto rd = make_rng(seed, "init/discriminator");
    b.encoder.initialize(rf);
    b.decoder.initialize(rg);
    b.discriminator.initialize(rd);
    return b;
}

nn::Tensor patches_to_tensor(const std::vector<std::vector<double>>& patches) {
    const int n = static_cast<int>(patches.size());
    nn::Tensor t({n, 1, kPatchSide, kPatchSide});
    const std::size_t per = kPatchSide * kPatchSide;
    for (int i = 0; i < n; ++i) {
        require(patches[static_cast<std::size_t>(i)].size() == per, ErrorKind::Contract,
                "encoder input must be 1x17x17");
        std::copy(patches[static_cast<std::size_t>(i)].begin(), patches[static_cast<std::size_t>(i)].end(),
                  t.data() + i * per);
    }
    return t;
}

nn::Tensor encode_batch(const nn::Sequential& encoder, const nn::Tensor& patches) {
    const auto& s = patches.shape();
    require(s.c == 1 && s.h == kPatchSide && s.w == kPatchSide, ErrorKind::Contract,
            "encoder input must be (n,1,17,17), got " + s.str());
    require(patches.all_finite(), ErrorKind::Contract, "encoder input has non-finite values");
    return encoder.infer(patches);
}

LatentVector encode(const nn::Sequential& encoder, std::span<const double> patch) {
    require(patch.size() == kPatchSide * kPatchSide, ErrorKind::Contract,
            "encoder input must be 1x17x17, got " + std::to_string(patch.size()) + " values");
    nn::Tensor x({1, 1, kPatchSide, kPatchSide}, std::vector<double>(patch.begin(), patch.end()));
    auto z = encode_batch(encoder, x);
    return LatentVector(z.values());
}

nn::Tensor decode(const nn::Sequential& decoder, const LatentVector& z, int k) {
    const auto out = decoder.output_shape({1, kLatentDim, 1, 1});
    require(out.h == kDecoderBaseSide * k && out.w == kDecoderBaseSide * k, ErrorKind::Contract,
            "decoder was built for a different fractal factor than k=" + std::to_string(k));
    nn::Tensor x({1, kLatentDim, 1, 1}, std::vector<double>(z.values().begin(), z.values().end()));
    return decoder.infer(x);
}

double probability_from_logit(double logit) noexcept {
    double p = logit >= 0.0 ? 1.0 / (1.0 + std::exp(-logit)) : std::exp(logit) / (1.0 + std::exp(logit));
    constexpr double lo = std::numeric_limits<double>::min();
    const double hi = std::nextafter(1.0, 0.0);
    if (!(p > lo)) {
        p = lo;
    }
    if (p > hi) {
        p = hi;
    }
    return p;
}

double discriminate(const nn::Sequential& discriminator, const nn::Tensor& pair) {
    const auto& s = pair.shape();
    require(s.n == 1 && s.c == 2 && s.h == kDiscriminatorSide && s.w == kDiscriminatorSide, ErrorKind::Contract,
            "discriminator input must be 2x64x64, got " + s.str());
    return probability_from_logit(discriminator.infer(pair)[0]);
}

std::vector<double> flatten_state(const nn::Sequential& net) {
    std::vector<double> out;
    for (const auto* p : net.parameters()) {
        out.insert(out.end(), p->value.begin(), p->value.end());
    }
    for (const auto* b : net.buffers()) {
        out.insert(out.end(), b->begin(), b->end());
    }
    return out;
}

void restore_state(nn::Sequential& net, std::span<const double> state) {
    std::size_t offset = 0;
    auto take = [&](std::vector<double>& dst) {
        require(offset + dst.size() <= state.size(), ErrorKind::Contract, "checkpoint blob too short");
        std::copy_n(state.begin() + static_cast<std::ptrdiff_t>(offset), dst.size(), dst.begin());
        offset += dst.size();
    };
    for (auto* p : net.parameters()) {
        take(p->value);
    }
    for (auto* b : net.buffers()) {
        take(*b);
    }
    require(offset == state.size(), ErrorKind::Contract, "checkpoint blob size mismatch");
}

std::string encode_state_blob(std::initializer_list<const nn::Sequential*> nets) {
    std::string blob(kBlobMagic);
    for (const auto* net : nets) {
        for (double v : flatten_state(*net)) {
            auto bits = std::bit_cast<std::uint64_t>(v);
            for (int i = 0; i < 8; ++i) {
                blob.push_back(static_cast<char>((bits >> (8 * i)) & 0xFF));
            }
        }
    }
    return blob;
}

std::vector<double> decode_state_blob(std::string_view blob) {
    require(blob.size() >= 8 && blob.substr(0, 8) == kBlobMagic && (blob.size() - 8) % 8 == 0, ErrorKind::Io,
            "bad checkpoint blob header");
    std::vector<double> values((blob.size() - 8) / 8);
    for (std::size_t i = 0; i < values.size(); ++i) {
        std::uint64_t bits = 0;
        for (int k = 7; k >= 0; --k) {
            bits = bits << 8 | static_cast<unsigned char>(blob[8 + i * 8 + static_cast<std::size_t>(k)]);
        }
        values[i] = std::bit_cast<double>(bits);
    }
    return values;
}

void restore_states(std::initializer_list<nn::Sequential*> nets, std::span<const double> values) {
    std::size_t offset = 0;
    for (auto* net : nets) {
        const std::size_t n = flatten_state(*net).size();
        require(offset + n <= values.size(), ErrorKind::Contract, "checkpoint blob too short for architecture");
        restore_state(*net, values.subspan(offset, n));
        offset += n;
    }
    require(offset == values.size(), ErrorKind::Contract, "checkpoint blob longer than architecture");
}

namespace {

std::string encode_blob(const ModelBundle& b) {
    return encode_state_blob({&b.encoder, &b.decoder, &b.discriminator});
}

} // namespace

std::string bundle_hash(const ModelBundle& bundle) {
    return hex64(fnv1a64(encode_blob(bundle)));
}

std::string save_checkpoint(const std::filesystem::path& prefix, const ModelBundle& bundle) {
    const std::string blob = encode_blob(bundle);
    const std::string hash = hex64(fnv1a64(blob));
    nlohmann::json manifest = {
        {"kind", "topo2vec"},
        {"arch_version", bundle.arch_version},
        {"k", bundle.k},
        {"scales", bundle.scales},
        {"seed", bundle.seed},
        {"normalization", bundle.normalization},
        {"training_step", bundle.training_step},
        {"blob_hash", hash},
        {"state_sizes",
         {flatten_state(bundle.encoder).size(), flatten_state(bundle.decoder).size(),
          flatten_state(bundle.discriminator).size()}},
    };
    auto bin = prefix;
    bin += ".bin";
    auto json = prefix;
    json += ".json";
    write_file_atomic(bin, blob);
    write_file_atomic(json, manifest.dump(2) + "\n");
    return hash;
}

ModelBundle load_checkpoint(const std::filesystem::path& prefix) {
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
    const std::string arch = manifest.value("arch_version", "");
    require(arch == kArchVersion, ErrorKind::Contract,
            "checkpoint arch_version '" + arch + "' does not match '" + kArchVersion + "'");
    require(manifest.value("kind", "") == "topo2vec", ErrorKind::Contract, "checkpoint is not an encoder bundle");

    ModelBundle b = init_params(0, manifest.at("k").get<int>());
    b.scales = manifest.value("scales", std::vector<double>{});
    b.seed = manifest.value("seed", std::uint64_t{0});
    b.normalization = manifest.value("normalization", std::string("per-patch-minmax"));
    b.training_step = manifest.value("training_step", 0LL);

    const std::string blob = read_file(bin_path);
    require(hex64(fnv1a64(blob)) == manifest.value("blob_hash", ""), ErrorKind::Io,
            "checkpoint blob hash does not match manifest");
    restore_states({&b.encoder, &b.decoder, &b.discriminator}, decode_state_blob(blob));
    return b;
}

} // namespace topoembed
