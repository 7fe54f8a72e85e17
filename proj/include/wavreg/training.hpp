#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <vector>

#include "wavreg/attacks.hpp"
#include "wavreg/data.hpp"
#include "wavreg/model.hpp"

namespace wavreg {

struct TrainConfig {
    int epochs = 10;
    std::size_t batch_size = 128;
    float lr_initial = 0.1f;
    std::vector<int> lr_milestones;  // epochs at which lr is multiplied by lr_decay
    float lr_decay = 0.1f;
    float momentum = 0.9f;
    float weight_decay = 5e-4f;
    bool adversarial = true;
    AttackConfig train_attack{0.031f, 2.0f / 255.0f, 10, true, 1, 1.0f, LossKind::cross_entropy, 0.0f, 0};
    // Stop after this many epochs without a robust-accuracy improvement; 0 disables.
    int early_stop_patience = 0;
    // Validation samples used for the per-epoch robust accuracy; 0 = all.
    std::size_t robust_val_samples = 0;
    bool augment_flip = false;
    bool augment_crop = false;
    std::uint64_t seed = 0;

    void validate() const;
};

struct EpochRecord {
    int epoch = 0;
    double lr = 0.0;
    double train_loss = 0.0;
    double clean_val_accuracy = 0.0;
    double robust_val_accuracy = 0.0;
    double mean_gradient_norm = 0.0;
};

struct TrainHistory {
    std::vector<EpochRecord> epochs;
    int best_epoch = -1;
    bool operator==(const TrainHistory& other) const;
};

struct TrainOutcome {
    Model best;
    TrainHistory history;
};

// lr_initial * lr_decay^(number of milestones <= epoch).
float lr_at(int epoch, const TrainConfig& cfg);

// L2 norm over all parameter gradients. Throws UsageError when no parameter
// holds a gradient.
double gradient_norm(const Model& model);

using EpochCallback = std::function<void(const EpochRecord&)>;

// Min-max training: each step replaces the batch by PGD adversaries against the
// current model, then takes one SGD-momentum step on their cross-entropy.
// Returns the epoch with the highest robust validation accuracy.
TrainOutcome adversarial_train(Model& model, const Dataset& train, const Dataset& val, const TrainConfig& cfg,
                               const EpochCallback& on_epoch = {});

}  // namespace wavreg
