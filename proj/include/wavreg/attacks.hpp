#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <string_view>
#include <vector>

#include "wavreg/model.hpp"
#include "wavreg/tensor.hpp"

namespace wavreg {

enum class LossKind { cross_entropy, cw_margin };

// Budgets are on the [0,1] pixel scale.
struct AttackConfig {
    float epsilon = 0.031f;
    float step_size = 2.0f / 255.0f;
    int steps = 20;
    bool random_init = true;
    int restarts = 1;
    float decay = 1.0f;  // MIM momentum decay
    LossKind loss_kind = LossKind::cross_entropy;
    float kappa = 0.0f;  // margin confidence for cw_margin
    std::uint64_t seed = 0;

    void validate() const;
};

struct AttackResult {
    Tensor adversarial;
    std::vector<bool> success;          // prediction differs from the true label
    std::vector<std::size_t> queries;   // NES only
    std::size_t gradient_calls = 0;     // white-box only
    double success_rate() const;
};

enum class AttackKind { none, fgsm, pgd, mim, cw };
std::string_view to_string(AttackKind kind);
AttackKind parse_attack_kind(std::string_view text);

// x_adv = clamp(x + eps * sign(grad_x CE), 0, 1).
AttackResult fgsm(Classifier& model, const Tensor& x, std::span<const int> labels, const AttackConfig& cfg);

// Sign-gradient ascent projected onto the eps-ball and [0,1]; with restarts the
// per-sample maximum-loss candidate is kept.
AttackResult pgd(Classifier& model, const Tensor& x, std::span<const int> labels, const AttackConfig& cfg);

// Momentum iterative method: g <- decay * g + grad / ||grad||_1, step by sign(g).
AttackResult mim(Classifier& model, const Tensor& x, std::span<const int> labels, const AttackConfig& cfg);

// PGD on the margin loss max(z_y - max_{c != y} z_c, -kappa), driven downwards.
AttackResult cw_pgd(Classifier& model, const Tensor& x, std::span<const int> labels, const AttackConfig& cfg);

// Dispatch; `none` returns x unchanged with success = misclassified.
AttackResult run_attack(AttackKind kind, Classifier& model, const Tensor& x, std::span<const int> labels,
                        const AttackConfig& cfg);

// Per-sample attack objective (CE, or the negated margin) at x.
std::vector<float> attack_loss(Classifier& model, const Tensor& x, std::span<const int> labels, LossKind kind,
                               float kappa);

// ---------------------------------------------------------------------------
// Black-box NES attack.

struct NesConfig {
    float epsilon = 0.05f;
    float fd_eta = 0.01f;  // sampling radius sigma
    float lr = 0.01f;      // signed step size
    std::size_t max_queries = 10000;
    std::size_t samples_per_step = 50;  // antithetic pairs per estimate
    std::uint64_t seed = 0;

    void validate() const;
};

// Logit access only; no gradients flow through it.
using LogitOracle = std::function<Tensor(const Tensor&)>;

// Maps a batch of points [B, ...] to one loss per row.
using BatchLoss = std::function<std::vector<float>(const Tensor&)>;

// g = 1/(2 sigma k) sum_i [L(x + sigma u_i) - L(x - sigma u_i)] u_i with
// u_i ~ N(0, I). Issues one batch of 2k points.
std::vector<float> nes_gradient_estimate(const BatchLoss& loss, std::span<const float> x, const Shape& sample_shape,
                                         float sigma, std::size_t pairs, std::mt19937_64& rng);

// Queries are counted as 2 * samples_per_step per estimation step.
AttackResult nes_attack(const LogitOracle& oracle, const Tensor& x, std::span<const int> labels, const NesConfig& cfg);

// Adapts a classifier to the oracle interface (gradient recording off).
LogitOracle as_oracle(Classifier& model);

}  // namespace wavreg
