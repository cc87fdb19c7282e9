#include "support.hpp"

#include "topoembed/models.hpp"
#include "topoembed/util.hpp"

#include "json.hpp"

#include <random>

using namespace topoembed;

namespace {

std::vector<double> random_patch(std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<double> p(289);
    for (auto& v : p) {
        v = u(rng);
    }
    return p;
}

} // namespace

TEST_SUITE("models") {

TEST_CASE("encoder stage shapes") {
    const auto enc = build_encoder();
    const auto shapes = enc.trace_shapes(nn::Tensor({2, 1, 17, 17}, 0.5));
    REQUIRE(shapes.size() == 6);
    CHECK(shapes[0] == nn::Shape{2, 8, 16, 16});
    CHECK(shapes[1] == nn::Shape{2, 16, 8, 8});
    CHECK(shapes[2] == nn::Shape{2, 32, 4, 4});
    CHECK(shapes[3] == nn::Shape{2, 64, 2, 2});
    CHECK(shapes[4] == nn::Shape{2, 128, 1, 1});
    CHECK(shapes[5] == nn::Shape{2, 128, 1, 1});
}

TEST_CASE("decoder output is 16k x 16k with halving filters") {
    for (int k : {1, 2, 4, 8}) {
        CAPTURE(k);
        const auto dec = build_decoder(k);
        CHECK(dec.output_shape({1, 128, 1, 1}) == nn::Shape{1, 1, 16 * k, 16 * k});
    }
    const auto shapes = build_decoder(4).trace_shapes(nn::Tensor({1, 128, 1, 1}, 0.1));
    REQUIRE(shapes.size() == 7);
    CHECK(shapes[3] == nn::Shape{1, 8, 16, 16});
    CHECK(shapes[4] == nn::Shape{1, 4, 32, 32});
    CHECK(shapes[5] == nn::Shape{1, 2, 64, 64});
    CHECK(shapes[6] == nn::Shape{1, 1, 64, 64});
    for (int k : {0, 3, 16}) {
        CHECK(testing::error_kind_of([k] { build_decoder(k); }) == ErrorKind::Contract);
    }
}

TEST_CASE("discriminator maps a 2x64x64 pair to one probability") {
    const auto b = init_params(1, 4);
    CHECK(b.discriminator.output_shape({3, 2, 64, 64}) == nn::Shape{3, 1, 1, 1});
    const double p = discriminate(b.discriminator, nn::Tensor({1, 2, 64, 64}, 0.3));
    CHECK(p > 0.0);
    CHECK(p < 1.0);
    CHECK(testing::error_kind_of([&] { discriminate(b.discriminator, nn::Tensor({1, 1, 64, 64})); }) ==
          ErrorKind::Contract);
    CHECK(probability_from_logit(800.0) < 1.0);
    CHECK(probability_from_logit(-800.0) > 0.0);
    CHECK(probability_from_logit(0.0) == 0.5);
}

TEST_CASE("encode and decode contracts") {
    const auto b = init_params(2, 2);
    const auto z = encode(b.encoder, random_patch(1));
    CHECK(z.values().size() == 128);
    const auto y = decode(b.decoder, z, 2);
    CHECK(y.shape() == nn::Shape{1, 1, 32, 32});
    CHECK(testing::error_kind_of([&] { decode(b.decoder, z, 4); }) == ErrorKind::Contract);
    CHECK(testing::error_kind_of([&] { encode(b.encoder, std::vector<double>(288, 0.0)); }) == ErrorKind::Contract);
    auto bad = random_patch(2);
    bad[5] = std::nan("");
    CHECK(testing::error_kind_of([&] { encode(b.encoder, bad); }) == ErrorKind::Contract);

    // batched inference agrees with single-patch encoding
    const auto batch = encode_batch(b.encoder, patches_to_tensor({random_patch(1), random_patch(3)}));
    for (int i = 0; i < 128; ++i) {
        CHECK(batch.at(0, i, 0, 0) == doctest::Approx(z[i]).epsilon(1e-12));
    }
}

TEST_CASE("initialization is deterministic per seed") {
    CHECK(bundle_hash(init_params(5, 4)) == bundle_hash(init_params(5, 4)));
    CHECK(bundle_hash(init_params(5, 4)) != bundle_hash(init_params(6, 4)));
    const auto b = init_params(5, 1);
    CHECK(b.encoder.parameter_count() > 0);
    CHECK(b.output_side() == 16);
}

TEST_CASE("checkpoint round trip is bit exact") {
    auto b = init_params(9, 4);
    b.scales = {10.0, 30.0};
    b.training_step = 42;
    const auto dir = testing::temp_dir("ckpt");
    const auto hash = save_checkpoint(dir / "m", b);
    const auto back = load_checkpoint(dir / "m");
    CHECK(bundle_hash(back) == hash);
    CHECK(back.k == 4);
    CHECK(back.training_step == 42);
    CHECK(back.scales == b.scales);
    const auto p = random_patch(4);
    CHECK(encode(back.encoder, p) == encode(b.encoder, p));

    auto manifest = nlohmann::json::parse(read_file(dir / "m.json"));
    manifest["arch_version"] = "something-else";
    write_file_atomic(dir / "m.json", manifest.dump());
    CHECK(testing::error_kind_of([&] { load_checkpoint(dir / "m"); }) == ErrorKind::Contract);

    save_checkpoint(dir / "n", b);
    auto blob = read_file(dir / "n.bin");
    blob[100] ^= 1;
    write_file_atomic(dir / "n.bin", blob);
    CHECK(testing::error_kind_of([&] { load_checkpoint(dir / "n"); }) == ErrorKind::Io);
}

TEST_CASE("state blobs") {
    const auto a = init_params(1, 1);
    auto b = init_params(2, 1);
    const auto blob = encode_state_blob({&a.encoder});
    CHECK(blob.substr(0, 8) == kBlobMagic);
    restore_states({&b.encoder}, decode_state_blob(blob));
    CHECK(flatten_state(b.encoder) == flatten_state(a.encoder));
    CHECK(testing::error_kind_of([&] { restore_states({&b.encoder, &b.decoder}, decode_state_blob(blob)); }) ==
          ErrorKind::Contract);
}

} // TEST_SUITE
