#pragma once

#include <cmath>
#include <cstring>
#include <functional>
#include <random>
#include <vector>

#include "wavreg/model.hpp"
#include "wavreg/ops.hpp"
#include "wavreg/tensor.hpp"

namespace testutil {

using wavreg::Shape;
using wavreg::Tensor;

inline Tensor random_tensor(Shape shape, std::uint64_t seed, float lo = -1.0f, float hi = 1.0f,
                            bool requires_grad = false) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<float> u(lo, hi);
    std::vector<float> v(wavreg::shape_size(shape));
    for (auto& x : v) x = u(rng);
    return Tensor::from(std::move(shape), std::move(v), requires_grad);
}

// Largest relative error between the analytic gradient of `f` at `x` and
// central differences computed in double around the float values.
inline double gradient_error(const std::function<Tensor(const Tensor&)>& f, const Tensor& x0, double h = 1e-2) {
    Tensor x = x0.detach();
    x.set_requires_grad(true);
    wavreg::backward(f(x));
    std::vector<float> analytic(x.grad().begin(), x.grad().end());
    double worst = 0.0, scale = 1e-3;
    for (float g : analytic) scale = std::max(scale, static_cast<double>(std::abs(g)));
    for (std::size_t i = 0; i < x.size(); ++i) {
        Tensor plus = x0.detach(), minus = x0.detach();
        plus.data()[i] += static_cast<float>(h);
        minus.data()[i] -= static_cast<float>(h);
        const double fd = (static_cast<double>(f(plus).item()) - f(minus).item()) /
                          (static_cast<double>(plus[i]) - minus[i]);
        worst = std::max(worst, std::abs(fd - analytic[i]) / scale);
    }
    return worst;
}

// Multinomial logistic model on flattened input; gradients are closed form.
class LinearClassifier : public wavreg::Classifier {
public:
    LinearClassifier(std::size_t dim, std::size_t classes, std::uint64_t seed)
        : w_(random_tensor({dim, classes}, seed)), b_(Tensor::zeros({classes})), dim_(dim), classes_(classes) {}
    LinearClassifier(Tensor w, Tensor b) : w_(std::move(w)), b_(std::move(b)), dim_(w_.dim(0)), classes_(w_.dim(1)) {}

    Tensor logits(const Tensor& x) override {
        return wavreg::linear(wavreg::reshape(x, {x.dim(0), dim_}), w_, b_);
    }
    std::size_t num_classes() const override { return classes_; }
    const Tensor& weight() const { return w_; }

private:
    Tensor w_, b_;
    std::size_t dim_, classes_;
};

inline float max_abs_diff(const Tensor& a, const Tensor& b) {
    float m = 0.0f;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}

inline bool bitwise_equal(const Tensor& a, const Tensor& b) {
    if (a.shape() != b.shape()) return false;
    for (std::size_t i = 0; i < a.size(); ++i)
        if (std::memcmp(&a.data()[i], &b.data()[i], sizeof(float)) != 0) return false;
    return true;
}

inline wavreg::ModelConfig tiny_model(int classes = 2) {
    wavreg::ModelConfig cfg;
    cfg.depth = 1;
    cfg.width = 1;
    cfg.num_classes = classes;
    return cfg;
}

}  // namespace testutil
