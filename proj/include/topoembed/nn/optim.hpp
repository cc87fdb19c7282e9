#pragma once

#include "topoembed/nn/layers.hpp"

#include <vector>

namespace topoembed::nn {

enum class OptimizerKind { Sgd, Adam };

struct OptimizerConfig {
    OptimizerKind kind = OptimizerKind::Adam;
    double lr = 2e-4;
    double beta1 = 0.5;
    double beta2 = 0.999;
    double eps = 1e-8;
    double momentum = 0.0;  // SGD only
};

/// Updates a fixed, ordered parameter list. The list must not change between steps.
class Optimizer {
public:
    Optimizer(std::vector<Parameter*> params, OptimizerConfig config);

    void step();
    void zero_grad();
    const OptimizerConfig& config() const noexcept { return config_; }

private:
    std::vector<Parameter*> params_;
    OptimizerConfig config_;
    std::vector<std::vector<double>> m_;
    std::vector<std::vector<double>> v_;
    long long t_ = 0;
};

} // namespace topoembed::nn
