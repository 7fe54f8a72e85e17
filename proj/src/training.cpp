#include "wavreg/training.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "wavreg/errors.hpp"
#include "wavreg/ops.hpp"
#include "wavreg/optim.hpp"

namespace wavreg {

void TrainConfig::validate() const {
    if (epochs < 1) throw ConfigError("train.epochs must be >= 1");
    if (batch_size < 2) throw ConfigError("train.batch_size must be >= 2");
    if (!(lr_initial > 0.0f)) throw ConfigError("train.lr must be > 0");
    for (std::size_t i = 0; i < lr_milestones.size(); ++i) {
        if (lr_milestones[i] < 0 || lr_milestones[i] >= epochs)
            throw ConfigError("train.lr_milestones must lie in [0, epochs)");
        if (i > 0 && lr_milestones[i] <= lr_milestones[i - 1])
            throw ConfigError("train.lr_milestones must be strictly increasing");
    }
    if (momentum < 0.0f || momentum >= 1.0f) throw ConfigError("train.momentum must lie in [0,1)");
    if (weight_decay < 0.0f) throw ConfigError("train.weight_decay must be >= 0");
    if (early_stop_patience < 0) throw ConfigError("train.early_stop_patience must be >= 0");
    if (adversarial) train_attack.validate();
}

bool TrainHistory::operator==(const TrainHistory& other) const {
    if (best_epoch != other.best_epoch || epochs.size() != other.epochs.size()) return false;
    for (std::size_t i = 0; i < epochs.size(); ++i) {
        const auto& a = epochs[i];
        const auto& b = other.epochs[i];
        if (a.epoch != b.epoch || a.lr != b.lr || a.train_loss != b.train_loss ||
            a.clean_val_accuracy != b.clean_val_accuracy || a.robust_val_accuracy != b.robust_val_accuracy ||
            a.mean_gradient_norm != b.mean_gradient_norm)
            return false;
    }
    return true;
}

float lr_at(int epoch, const TrainConfig& cfg) {
    float lr = cfg.lr_initial;
    for (int m : cfg.lr_milestones)
        if (m <= epoch) lr *= cfg.lr_decay;
    return lr;
}

double gradient_norm(const Model& model) {
    double sq = 0.0;
    bool any = false;
    for (const auto& p : model.parameters()) {
        if (!p.value.has_grad()) continue;
        any = true;
        for (float g : p.value.grad()) sq += static_cast<double>(g) * g;
    }
    if (!any) throw UsageError("gradient_norm: no parameter holds a gradient; run backward first");
    return std::sqrt(sq);
}

namespace {

void augment(Tensor& batch, bool flip, bool crop, std::mt19937_64& rng) {
    const std::size_t n = batch.dim(0), c = batch.dim(1), h = batch.dim(2), w = batch.dim(3);
    std::uniform_int_distribution<int> coin(0, 1), shift(-4, 4);
    auto data = batch.data();
    std::vector<float> plane(h * w);
    for (std::size_t i = 0; i < n; ++i) {
        const bool do_flip = flip && coin(rng) == 1;
        const int dy = crop ? shift(rng) : 0, dx = crop ? shift(rng) : 0;
        for (std::size_t ch = 0; ch < c; ++ch) {
            float* p = data.data() + (i * c + ch) * h * w;
            for (std::size_t y = 0; y < h; ++y)
                for (std::size_t x = 0; x < w; ++x) {
                    // Zero-padded translation, then optional mirror.
                    const auto sy = static_cast<std::ptrdiff_t>(y) + dy;
                    const auto sx0 = static_cast<std::ptrdiff_t>(do_flip ? w - 1 - x : x) + dx;
                    const bool inside = sy >= 0 && sx0 >= 0 && sy < static_cast<std::ptrdiff_t>(h) &&
                                        sx0 < static_cast<std::ptrdiff_t>(w);
                    plane[y * w + x] = inside ? p[static_cast<std::size_t>(sy) * w + static_cast<std::size_t>(sx0)] : 0.0f;
                }
            std::copy(plane.begin(), plane.end(), p);
        }
    }
}

double accuracy_on(Model& model, const Dataset& data, std::size_t limit, const AttackConfig* attack,
                   std::size_t batch_size) {
    const std::size_t n = limit == 0 ? data.size() : std::min(limit, data.size());
    std::size_t correct = 0;
    for (std::size_t begin = 0; begin < n; begin += batch_size) {
        const std::size_t count = std::min(batch_size, n - begin);
        std::vector<std::size_t> idx(count);
        std::iota(idx.begin(), idx.end(), begin);
        Tensor x = data.batch(idx);
        const auto y = data.batch_labels(idx);
        if (attack) x = pgd(model, x, y, *attack).adversarial;
        NoGradGuard no_grad;
        const auto pred = argmax_rows(model.forward(x, false));
        for (std::size_t i = 0; i < count; ++i) correct += pred[i] == y[i];
    }
    return static_cast<double>(correct) / static_cast<double>(n);
}

}  // namespace

TrainOutcome adversarial_train(Model& model, const Dataset& train, const Dataset& val, const TrainConfig& cfg,
                               const EpochCallback& on_epoch) {
    cfg.validate();
    train.validate(static_cast<int>(model.num_classes()));
    val.validate(static_cast<int>(model.num_classes()));

    std::mt19937_64 rng(cfg.seed);
    SgdMomentum optimizer(cfg.momentum, cfg.weight_decay);
    model.set_requires_grad(true);

    TrainOutcome outcome{model.clone(), {}};
    double best_robust = -1.0;
    int since_best = 0;
    std::uint64_t step_counter = 0;

    std::vector<std::size_t> order(train.size());
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        const float lr = lr_at(epoch, cfg);
        std::iota(order.begin(), order.end(), 0);
        std::shuffle(order.begin(), order.end(), rng);

        double loss_sum = 0.0, norm_sum = 0.0;
        std::size_t batches = 0, seen = 0;
        for (std::size_t begin = 0; begin < order.size(); begin += cfg.batch_size) {
            const std::size_t count = std::min(cfg.batch_size, order.size() - begin);
            if (count < 2) break;  // batch norm needs two samples
            const std::span<const std::size_t> idx(order.data() + begin, count);
            Tensor x = train.batch(idx);
            const auto y = train.batch_labels(idx);
            if (cfg.augment_flip || cfg.augment_crop) augment(x, cfg.augment_flip, cfg.augment_crop, rng);

            if (cfg.adversarial) {
                AttackConfig attack = cfg.train_attack;
                attack.seed = cfg.train_attack.seed + cfg.seed * 1000003ULL + step_counter;
                x = pgd(model, x, y, attack).adversarial;
            }

            model.zero_grad();
            Tensor loss;
            try {
                loss = softmax_cross_entropy(model.forward(x, true), y);
                backward(loss);
            } catch (const NumericError& e) {
                throw NumericError("training diverged at epoch " + std::to_string(epoch) + ", step " +
                                   std::to_string(batches) + ": " + e.what());
            }
            const double gnorm = gradient_norm(model);
            if (!std::isfinite(gnorm))
                throw NumericError("training diverged at epoch " + std::to_string(epoch) + ", step " +
                                   std::to_string(batches) + ": non-finite gradient");
            auto params = model.parameter_tensors();
            optimizer.step(params, lr);

            loss_sum += static_cast<double>(loss.item()) * static_cast<double>(count);
            norm_sum += gnorm;
            seen += count;
            ++batches;
            ++step_counter;
        }

        EpochRecord record;
        record.epoch = epoch;
        record.lr = lr;
        record.train_loss = seen ? loss_sum / static_cast<double>(seen) : 0.0;
        record.mean_gradient_norm = batches ? norm_sum / static_cast<double>(batches) : 0.0;
        record.clean_val_accuracy = accuracy_on(model, val, 0, nullptr, cfg.batch_size);
        if (cfg.adversarial) {
            AttackConfig attack = cfg.train_attack;
            attack.seed = cfg.train_attack.seed + 7919;
            record.robust_val_accuracy = accuracy_on(model, val, cfg.robust_val_samples, &attack, cfg.batch_size);
        } else {
            record.robust_val_accuracy = accuracy_on(model, val, cfg.robust_val_samples, nullptr, cfg.batch_size);
        }
        outcome.history.epochs.push_back(record);
        if (on_epoch) on_epoch(record);

        if (record.robust_val_accuracy > best_robust) {
            best_robust = record.robust_val_accuracy;
            outcome.best = model.clone();
            outcome.history.best_epoch = epoch;
            since_best = 0;
        } else if (cfg.early_stop_patience > 0 && ++since_best >= cfg.early_stop_patience) {
            break;
        }
    }
    return outcome;
}

}  // namespace wavreg
