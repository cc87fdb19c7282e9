#include "support.hpp"

#include "topoembed/baselines.hpp"
#include "topoembed/svm.hpp"

#include <random>

using namespace topoembed;

namespace {

/// Bumps (label 1) and bowls (label 0) with random offsets and noise.
nn::Tensor bump_patches(int n, std::vector<int>& labels, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> noise(-0.1, 0.1);
    nn::Tensor x({n, 1, 17, 17});
    labels.assign(n, 0);
    for (int i = 0; i < n; ++i) {
        labels[i] = i % 2;
        const double sign = labels[i] ? 1.0 : -1.0;
        for (int r = 0; r < 17; ++r) {
            for (int c = 0; c < 17; ++c) {
                const double d2 = (r - 8) * (r - 8) + (c - 8) * (c - 8);
                x.at(i, 0, r, c) = 0.5 + 0.4 * sign * std::exp(-d2 / 18.0) + noise(rng);
            }
        }
    }
    return x;
}

} // namespace

TEST_SUITE("baselines") {

TEST_CASE("identity embedding is the row-major patch") {
    std::vector<double> p(289);
    for (int i = 0; i < 289; ++i) {
        p[i] = i * 0.5;
    }
    CHECK(id_embed(p) == p);
    CHECK(testing::error_kind_of([] { id_embed(std::vector<double>(17, 0.0)); }) == ErrorKind::Contract);
    const auto h = EmbeddingModelHandle::id();
    CHECK(h.output_dim() == 289);
    CHECK(h.name() == "id");
    CHECK(h.embed_one(p) == p);
    CHECK(parse_model_kind("topo2vec") == ModelKind::Topo2vec);
    CHECK(testing::error_kind_of([] { parse_model_kind("resnet"); }) == ErrorKind::Domain);
}

TEST_CASE("linear svm separates separable data") {
    std::mt19937_64 rng(3);
    std::normal_distribution<double> g(0.0, 0.3);
    std::vector<std::vector<double>> x;
    std::vector<int> y;
    for (int i = 0; i < 200; ++i) {
        const int label = i % 2;
        // second feature is pure noise, third constant
        x.push_back({(label ? 2.0 : -2.0) + g(rng), g(rng), 7.0});
        y.push_back(label);
    }
    const auto svm = LinearSvm::fit(x, y);
    CHECK(svm.accuracy(x, y) == 1.0);
    CHECK(std::abs(svm.weights()[0]) > 5.0 * std::abs(svm.weights()[1]));
    CHECK(svm.weights()[2] == 0.0);
    CHECK(svm.predict(std::vector<double>{3.0, 0.0, 7.0}) == 1);
    CHECK(svm.predict(std::vector<double>{-3.0, 0.0, 7.0}) == 0);

    const auto copy = LinearSvm::from_parts(svm.mean(), svm.inv_std(), svm.weights(), svm.bias());
    CHECK(copy.decision(x[5]) == svm.decision(x[5]));
    CHECK(LinearSvm::fit(x, y).decision(x[9]) == svm.decision(x[9]));
}

TEST_CASE("svm rejects degenerate training data") {
    const std::vector<std::vector<double>> x{{1.0, 2.0}, {1.0, 2.0}, {1.0, 2.0}};
    const std::vector<int> mixed{0, 1, 0};
    const std::vector<int> single{1, 1, 1};
    CHECK(testing::error_kind_of([&] { LinearSvm::fit(x, mixed); }) == ErrorKind::DataQuality);
    const std::vector<std::vector<double>> varied{{1.0}, {2.0}, {3.0}};
    CHECK(testing::error_kind_of([&] { LinearSvm::fit(varied, single); }) == ErrorKind::DataQuality);
}

TEST_CASE("supervised cnn learns bumps versus bowls") {
    std::vector<int> labels;
    const auto x = bump_patches(64, labels, 1);
    CnnClassifier cnn({"bump"}, 16, 2);
    CnnConfig cfg;
    cfg.epochs = 30;
    cfg.batch_size = 16;
    cfg.seed = 2;
    const auto report = fit_cnn(cnn, x, labels, cfg);
    REQUIRE(report.epoch_loss.size() == 30);
    CHECK(report.epoch_loss.back() < report.epoch_loss.front());
    CHECK(report.train_accuracy >= 0.95);

    std::vector<int> held_labels;
    const auto held = bump_patches(40, held_labels, 9);
    const auto prob = cnn.probabilities(held);
    int correct = 0;
    for (int i = 0; i < 40; ++i) {
        correct += (prob[i] > 0.5) == (held_labels[i] == 1);
    }
    CHECK(correct >= 38);
    CHECK(cnn.embed(held).shape() == nn::Shape{40, 16, 1, 1});
}

TEST_CASE("masked heads ignore unsupervised samples") {
    std::vector<int> labels;
    const auto x = bump_patches(16, labels, 4);
    CnnClassifier cnn({"a", "b"}, 8, 1);
    const auto bias_before = cnn.head.parameters().back()->value;
    std::vector<double> targets(32, 0.0);
    std::vector<unsigned char> mask(32, 0);
    for (int i = 0; i < 16; ++i) {
        targets[2 * i] = labels[i];
        mask[2 * i] = 1;  // only head "a"
    }
    CnnConfig cfg;
    cfg.epochs = 2;
    fit_cnn(cnn, x, targets, mask, cfg);
    const auto& bias = cnn.head.parameters().back()->value;
    REQUIRE(bias.size() == 2);
    CHECK(bias[0] != bias_before[0]);
    CHECK(bias[1] == bias_before[1]);
    CHECK(testing::error_kind_of([&] { fit_cnn(cnn, x, std::vector<double>(31, 0.0), mask, cfg); }) ==
          ErrorKind::Contract);
}

TEST_CASE("cnn checkpoints round trip") {
    CnnClassifier cnn(cnn_baseline_classes(), 32, 7);
    const auto dir = testing::temp_dir("cnn");
    const auto hash = save_cnn_checkpoint(dir / "cnn", cnn);
    const auto back = load_cnn_checkpoint(dir / "cnn");
    CHECK(cnn_hash(back) == hash);
    CHECK(back.head_names == cnn.head_names);
    std::vector<int> labels;
    const auto x = bump_patches(3, labels, 5);
    CHECK(back.logits(x).values() == cnn.logits(x).values());

    const auto handle = EmbeddingModelHandle::load((dir / "cnn").string());
    CHECK(handle.kind() == ModelKind::Cnn);
    CHECK(handle.output_dim() == 32);
    CHECK(handle.checkpoint_hash() == hash);
    CHECK(testing::error_kind_of([&] { EmbeddingModelHandle::load((dir / "missing").string()); }) ==
          ErrorKind::Io);
}

TEST_CASE("supervised training needs class data") {
    const auto r = testing::make_raster(64, 64, [](int c, int row) { return c + row; });
    CHECK(testing::error_kind_of([&] {
              train_supervised_cnn({}, r, ScaleSpec::from_resolution(10.0), {});
          }) == ErrorKind::Capacity);
}

} // TEST_SUITE
