#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace topoembed {

struct SvmConfig {
    double c = 1.0;
    int max_passes = 1000;
    double tolerance = 1e-3;  // projected-gradient spread
    std::uint64_t seed = 0;
};

/// Linear soft-margin SVM (hinge loss) on standardized features, solved in
/// the dual by coordinate descent. The bias is an extra constant feature.
class LinearSvm {
public:
    /// Labels are 0/1. Throws DataQuality when every feature is constant or
    /// only one class is present.
    static LinearSvm fit(const std::vector<std::vector<double>>& x, std::span<const int> labels,
                         const SvmConfig& config = {});

    double decision(std::span<const double> x) const;
    int predict(std::span<const double> x) const { return decision(x) > 0.0 ? 1 : 0; }
    double accuracy(const std::vector<std::vector<double>>& x, std::span<const int> labels) const;

    /// Rebuilds a fitted model from its persisted parts.
    static LinearSvm from_parts(std::vector<double> mean, std::vector<double> inv_std, std::vector<double> weights,
                                double bias);

    const std::vector<double>& mean() const noexcept { return mean_; }
    const std::vector<double>& inv_std() const noexcept { return inv_std_; }
    const std::vector<double>& weights() const noexcept { return w_; }
    double bias() const noexcept { return b_; }
    int passes() const noexcept { return passes_; }

private:
    std::vector<double> mean_;
    std::vector<double> inv_std_;
    std::vector<double> w_;
    double b_ = 0.0;
    int passes_ = 0;
};

} // namespace topoembed
