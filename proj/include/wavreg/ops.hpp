#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "wavreg/tensor.hpp"

namespace wavreg {

// Elementwise and reduction primitives. All are differentiable.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& x, float factor);
Tensor sum(const Tensor& x);
Tensor mean(const Tensor& x);
// Sum of x * weights, with constant weights. Handy for turning any tensor into
// a scalar probe loss.
Tensor weighted_sum(const Tensor& x, std::span<const float> weights);
Tensor reshape(const Tensor& x, Shape shape);
Tensor relu(const Tensor& x);

// x: [N,C,H,W], weight: [K,C,kh,kw] -> [N,K,H',W'], no bias.
Tensor conv2d(const Tensor& x, const Tensor& weight, std::size_t stride, std::size_t padding);

// x: [N,D], w: [D,M], b: [M] -> [N,M].
Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b);

struct BatchNormState {
    Tensor running_mean;  // [C]
    Tensor running_var;   // [C]
    float momentum = 0.1f;
    float epsilon = 1e-5f;
};

// Per-channel normalization of [N,C,H,W] (or [N,C]). Training mode normalizes
// with batch statistics and updates the running stats; eval mode uses the
// running stats only.
Tensor batch_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, BatchNormState& state, bool training);

// Non-overlapping average pooling; kernel must divide H and W.
Tensor avg_pool2d(const Tensor& x, std::size_t kernel);

// Keeps x[..., 2i, 2j].
Tensor subsample2d(const Tensor& x);

// Mean over the batch of -log softmax(logits)[label].
Tensor softmax_cross_entropy(const Tensor& logits, std::span<const int> labels);

// Per-sample max(z_y - max_{c != y} z_c, -kappa), shape [N].
Tensor cw_margin(const Tensor& logits, std::span<const int> labels, float kappa);

// Non-differentiable helpers over raw logits.
std::vector<float> per_sample_cross_entropy(const Tensor& logits, std::span<const int> labels);
std::vector<int> argmax_rows(const Tensor& logits);

}  // namespace wavreg
