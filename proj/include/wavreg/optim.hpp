#pragma once

#include <span>
#include <vector>

#include "wavreg/tensor.hpp"

namespace wavreg {

// v <- momentum * v + grad + weight_decay * param;  param <- param - lr * v.
// A parameter without a gradient buffer is stepped with a zero gradient.
// `velocity` is resized on first use.
void sgd_momentum_step(std::span<Tensor> params, std::vector<std::vector<float>>& velocity, float lr,
                       float momentum, float weight_decay);

class SgdMomentum {
public:
    SgdMomentum(float momentum, float weight_decay) : momentum_(momentum), weight_decay_(weight_decay) {}

    void step(std::span<Tensor> params, float lr) {
        sgd_momentum_step(params, velocity_, lr, momentum_, weight_decay_);
    }
    const std::vector<std::vector<float>>& velocity() const { return velocity_; }

private:
    float momentum_;
    float weight_decay_;
    std::vector<std::vector<float>> velocity_;
};

}  // namespace wavreg
