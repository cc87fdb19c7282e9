#include "topoembed/svm.hpp"

#include "topoembed/error.hpp"
#include "topoembed/util.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace topoembed {

LinearSvm LinearSvm::fit(const std::vector<std::vector<double>>& x, std::span<const int> labels,
                         const SvmConfig& config) {
    require(!x.empty() && x.size() == labels.size(), ErrorKind::Contract, "SVM needs one label per example");
    require(config.c > 0.0 && config.max_passes >= 1, ErrorKind::Domain, "invalid SVM config");
    const std::size_t n = x.size();
    const std::size_t d = x.front().size();
    for (const auto& row : x) {
        require(row.size() == d, ErrorKind::Contract, "ragged feature matrix");
    }
    const auto positives = std::count(labels.begin(), labels.end(), 1);
    require(positives > 0 && static_cast<std::size_t>(positives) < n, ErrorKind::DataQuality,
            "SVM training set contains a single class");

    LinearSvm m;
    m.mean_.assign(d, 0.0);
    m.inv_std_.assign(d, 0.0);
    for (const auto& row : x) {
        for (std::size_t j = 0; j < d; ++j) {
            m.mean_[j] += row[j];
        }
    }
    for (auto& v : m.mean_) {
        v /= static_cast<double>(n);
    }
    std::size_t informative = 0;
    for (std::size_t j = 0; j < d; ++j) {
        double var = 0.0;
        for (const auto& row : x) {
            const double c = row[j] - m.mean_[j];
            var += c * c;
        }
        var /= static_cast<double>(n);
        if (var > 1e-24) {
            m.inv_std_[j] = 1.0 / std::sqrt(var);
            ++informative;
        }
    }
    require(informative > 0, ErrorKind::DataQuality,
            "degenerate embeddings: all " + std::to_string(d) + " features have zero variance");

    // Standardized rows with a trailing bias column.
    std::vector<double> z(n * (d + 1));
    std::vector<double> qii(n);
    std::vector<double> y(n);
    for (std::size_t i = 0; i < n; ++i) {
        double* zi = &z[i * (d + 1)];
        double q = 1.0;
        for (std::size_t j = 0; j < d; ++j) {
            zi[j] = (x[i][j] - m.mean_[j]) * m.inv_std_[j];
            q += zi[j] * zi[j];
        }
        zi[d] = 1.0;
        qii[i] = q;
        y[i] = labels[i] == 1 ? 1.0 : -1.0;
    }

    std::vector<double> w(d + 1, 0.0);
    std::vector<double> alpha(n, 0.0);
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    auto rng = make_rng(config.seed, "svm/order");
    for (m.passes_ = 1; m.passes_ <= config.max_passes; ++m.passes_) {
        std::shuffle(order.begin(), order.end(), rng);
        double pg_max = -std::numeric_limits<double>::infinity();
        double pg_min = std::numeric_limits<double>::infinity();
        for (auto i : order) {
            const double* zi = &z[i * (d + 1)];
            double wz = 0.0;
            for (std::size_t j = 0; j <= d; ++j) {
                wz += w[j] * zi[j];
            }
            const double g = y[i] * wz - 1.0;
            double pg = g;
            if (alpha[i] == 0.0) {
                pg = std::min(g, 0.0);
            } else if (alpha[i] == config.c) {
                pg = std::max(g, 0.0);
            }
            pg_max = std::max(pg_max, pg);
            pg_min = std::min(pg_min, pg);
            if (std::abs(pg) > 1e-12) {
                const double old = alpha[i];
                alpha[i] = std::clamp(old - g / qii[i], 0.0, config.c);
                const double step = (alpha[i] - old) * y[i];
                for (std::size_t j = 0; j <= d; ++j) {
                    w[j] += step * zi[j];
                }
            }
        }
        if (pg_max - pg_min < config.tolerance) {
            break;
        }
    }
    m.passes_ = std::min(m.passes_, config.max_passes);
    m.b_ = w[d];
    w.pop_back();
    m.w_ = std::move(w);
    return m;
}

LinearSvm LinearSvm::from_parts(std::vector<double> mean, std::vector<double> inv_std, std::vector<double> weights,
                                double bias) {
    require(mean.size() == weights.size() && inv_std.size() == weights.size(), ErrorKind::Contract,
            "SVM parts have inconsistent dimensions");
    LinearSvm m;
    m.mean_ = std::move(mean);
    m.inv_std_ = std::move(inv_std);
    m.w_ = std::move(weights);
    m.b_ = bias;
    return m;
}

double LinearSvm::decision(std::span<const double> x) const {
    require(x.size() == w_.size(), ErrorKind::Contract, "feature dimension mismatch");
    double s = b_;
    for (std::size_t j = 0; j < x.size(); ++j) {
        s += w_[j] * (x[j] - mean_[j]) * inv_std_[j];
    }
    return s;
}

double LinearSvm::accuracy(const std::vector<std::vector<double>>& x, std::span<const int> labels) const {
    require(x.size() == labels.size() && !x.empty(), ErrorKind::Contract, "one label per example required");
    std::size_t correct = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        correct += predict(x[i]) == labels[i];
    }
    return static_cast<double>(correct) / static_cast<double>(x.size());
}

} // namespace topoembed
