#include "topoembed/nn/optim.hpp"

#include <algorithm>
#include <cmath>

namespace topoembed::nn {

Optimizer::Optimizer(std::vector<Parameter*> params, OptimizerConfig config)
    : params_(std::move(params)), config_(config) {
    for (const auto* p : params_) {
        m_.emplace_back(p->value.size(), 0.0);
        v_.emplace_back(p->value.size(), 0.0);
    }
}

void Optimizer::zero_grad() {
    for (auto* p : params_) {
        std::fill(p->grad.begin(), p->grad.end(), 0.0);
    }
}

void Optimizer::step() {
    ++t_;
    const double lr = config_.lr;
    if (config_.kind == OptimizerKind::Sgd) {
        for (std::size_t i = 0; i < params_.size(); ++i) {
            auto& p = *params_[i];
            auto& buf = m_[i];
            for (std::size_t k = 0; k < p.value.size(); ++k) {
                buf[k] = config_.momentum * buf[k] + p.grad[k];
                p.value[k] -= lr * buf[k];
            }
        }
        return;
    }
    const double b1 = config_.beta1;
    const double b2 = config_.beta2;
    const double c1 = 1.0 - std::pow(b1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(b2, static_cast<double>(t_));
    for (std::size_t i = 0; i < params_.size(); ++i) {
        auto& p = *params_[i];
        auto& m = m_[i];
        auto& v = v_[i];
        for (std::size_t k = 0; k < p.value.size(); ++k) {
            const double g = p.grad[k];
            m[k] = b1 * m[k] + (1.0 - b1) * g;
            v[k] = b2 * v[k] + (1.0 - b2) * g * g;
            p.value[k] -= lr * (m[k] / c1) / (std::sqrt(v[k] / c2) + config_.eps);
        }
    }
}

} // namespace topoembed::nn
