#include "wavreg/optim.hpp"

#include "wavreg/errors.hpp"

namespace wavreg {

void sgd_momentum_step(std::span<Tensor> params, std::vector<std::vector<float>>& velocity, float lr,
                       float momentum, float weight_decay) {
    if (!(lr > 0.0f)) throw ConfigError("sgd: learning rate must be positive");
    if (momentum < 0.0f || momentum >= 1.0f) throw ConfigError("sgd: momentum must lie in [0,1)");
    if (weight_decay < 0.0f) throw ConfigError("sgd: weight decay must be non-negative");
    if (velocity.empty())
        for (const auto& p : params) velocity.emplace_back(p.size(), 0.0f);
    if (velocity.size() != params.size())
        throw DimensionError("sgd: " + std::to_string(velocity.size()) + " velocity buffers for " +
                             std::to_string(params.size()) + " parameters");
    for (std::size_t k = 0; k < params.size(); ++k) {
        Tensor& p = params[k];
        auto& v = velocity[k];
        const auto g = p.grad();
        if (v.size() != p.size() || (!g.empty() && g.size() != p.size()))
            throw DimensionError("sgd: parameter " + std::to_string(k) + " of shape " + shape_string(p.shape()) +
                                 " does not match its gradient/velocity");
        auto w = p.data();
        for (std::size_t i = 0; i < w.size(); ++i) {
            const double grad = g.empty() ? 0.0 : g[i];
            const double vel = static_cast<double>(momentum) * v[i] + grad + static_cast<double>(weight_decay) * w[i];
            v[i] = static_cast<float>(vel);
            w[i] = static_cast<float>(w[i] - static_cast<double>(lr) * vel);
        }
    }
}

}  // namespace wavreg
