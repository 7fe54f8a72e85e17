#include "wavreg/attacks.hpp"

#include <algorithm>
#include <cmath>

#include "wavreg/errors.hpp"
#include "wavreg/ops.hpp"

namespace wavreg {

void AttackConfig::validate() const {
    if (!(epsilon >= 0.0f)) throw ConfigError("attack.epsilon must be >= 0");
    if (steps < 1) throw ConfigError("attack.steps must be >= 1");
    if (!(step_size > 0.0f)) throw ConfigError("attack.step_size must be > 0");
    if (restarts < 1) throw ConfigError("attack.restarts must be >= 1");
    if (!(decay >= 0.0f)) throw ConfigError("attack.decay must be >= 0");
}

void NesConfig::validate() const {
    if (!(epsilon >= 0.0f)) throw ConfigError("nes.epsilon must be >= 0");
    if (!(fd_eta > 0.0f)) throw ConfigError("nes.fd_eta must be > 0");
    if (!(lr > 0.0f)) throw ConfigError("nes.lr must be > 0");
    if (samples_per_step == 0) throw ConfigError("nes.samples_per_step must be >= 1");
    if (max_queries < 2 * samples_per_step)
        throw ConfigError("nes.max_queries (" + std::to_string(max_queries) + ") is below one estimation step (" +
                          std::to_string(2 * samples_per_step) + " queries)");
}

double AttackResult::success_rate() const {
    if (success.empty()) return 0.0;
    return static_cast<double>(std::count(success.begin(), success.end(), true)) / static_cast<double>(success.size());
}

std::string_view to_string(AttackKind kind) {
    switch (kind) {
        case AttackKind::none: return "none";
        case AttackKind::fgsm: return "fgsm";
        case AttackKind::pgd: return "pgd";
        case AttackKind::mim: return "mim";
        case AttackKind::cw: return "cw";
    }
    return "none";
}

AttackKind parse_attack_kind(std::string_view text) {
    for (auto k : {AttackKind::none, AttackKind::fgsm, AttackKind::pgd, AttackKind::mim, AttackKind::cw})
        if (text == to_string(k)) return k;
    throw ConfigError("unknown attack '" + std::string(text) + "'");
}

namespace {

// Turns off parameter gradients for the duration of an attack.
class FrozenParameters {
public:
    explicit FrozenParameters(Classifier& model) : tensors_(model.trainable_tensors()) {
        for (auto& t : tensors_) {
            saved_.push_back(t.requires_grad());
            t.set_requires_grad(false);
        }
    }
    ~FrozenParameters() {
        for (std::size_t i = 0; i < tensors_.size(); ++i) tensors_[i].set_requires_grad(saved_[i]);
    }
    FrozenParameters(const FrozenParameters&) = delete;
    FrozenParameters& operator=(const FrozenParameters&) = delete;

private:
    std::vector<Tensor> tensors_;
    std::vector<bool> saved_;
};

float sign(float v) { return v > 0.0f ? 1.0f : (v < 0.0f ? -1.0f : 0.0f); }

void check_batch(const Tensor& x, std::span<const int> labels) {
    if (x.rank() < 2) throw DimensionError("attack: expected a batch, got " + shape_string(x.shape()));
    if (labels.size() != x.dim(0))
        throw DimensionError("attack: " + std::to_string(labels.size()) + " labels for batch of " +
                             std::to_string(x.dim(0)));
}

std::vector<float> objective_from_logits(const Tensor& logits, std::span<const int> labels, LossKind kind,
                                         float kappa) {
    if (kind == LossKind::cross_entropy) return per_sample_cross_entropy(logits, labels);
    NoGradGuard no_grad;
    const Tensor margin = cw_margin(logits, labels, kappa);
    std::vector<float> out(margin.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = -margin[i];
    return out;
}

// Gradient of the (summed) attack objective with respect to the input.
std::vector<float> input_gradient(Classifier& model, std::span<const float> point, const Shape& shape,
                                  std::span<const int> labels, LossKind kind, float kappa) {
    Tensor x = Tensor::from(shape, std::vector<float>(point.begin(), point.end()), true);
    const Tensor logits = model.logits(x);
    Tensor loss;
    if (kind == LossKind::cross_entropy)
        loss = scale(softmax_cross_entropy(logits, labels), static_cast<float>(labels.size()));
    else
        loss = scale(sum(cw_margin(logits, labels, kappa)), -1.0f);
    backward(loss);
    if (!x.has_grad()) return std::vector<float>(x.size(), 0.0f);
    std::vector<float> g(x.grad().begin(), x.grad().end());
    if (!all_finite(g)) throw NumericError("attack: non-finite input gradient");
    return g;
}

// clamp01 first, then onto [x - eps, x + eps].
void project(std::span<float> adv, std::span<const float> x, float eps) {
    for (std::size_t i = 0; i < adv.size(); ++i) {
        const float v = std::clamp(adv[i], 0.0f, 1.0f);
        adv[i] = std::clamp(v, x[i] - eps, x[i] + eps);
    }
}

std::vector<bool> misclassified(Classifier& model, const Tensor& x, std::span<const int> labels) {
    NoGradGuard no_grad;
    const auto pred = argmax_rows(model.logits(x));
    std::vector<bool> out(pred.size());
    for (std::size_t i = 0; i < pred.size(); ++i) out[i] = pred[i] != labels[i];
    return out;
}

enum class Update { sign, momentum };

AttackResult iterate(Classifier& model, const Tensor& x, std::span<const int> labels, const AttackConfig& cfg,
                     Update update) {
    cfg.validate();
    check_batch(x, labels);
    FrozenParameters frozen(model);
    const std::size_t n = x.dim(0);
    const std::size_t per = x.size() / n;
    const auto clean = x.data();

    std::vector<float> best(clean.begin(), clean.end());
    std::vector<float> best_loss(n, -std::numeric_limits<float>::infinity());
    std::size_t calls = 0;

    for (int restart = 0; restart < cfg.restarts; ++restart) {
        std::vector<float> adv(clean.begin(), clean.end());
        if (cfg.random_init) {
            std::mt19937_64 rng(cfg.seed + static_cast<std::uint64_t>(restart));
            std::uniform_real_distribution<float> uniform(-cfg.epsilon, cfg.epsilon);
            for (auto& v : adv) v += uniform(rng);
            project(adv, clean, cfg.epsilon);
        }
        std::vector<float> momentum(adv.size(), 0.0f);
        for (int step = 0; step < cfg.steps; ++step) {
            const auto g = input_gradient(model, adv, x.shape(), labels, cfg.loss_kind, cfg.kappa);
            ++calls;
            if (update == Update::momentum) {
                for (std::size_t i = 0; i < n; ++i) {
                    double l1 = 0.0;
                    for (std::size_t j = 0; j < per; ++j) l1 += std::abs(g[i * per + j]);
                    const float inv = l1 > 0.0 ? static_cast<float>(1.0 / l1) : 0.0f;
                    for (std::size_t j = 0; j < per; ++j) {
                        auto& m = momentum[i * per + j];
                        m = cfg.decay * m + g[i * per + j] * inv;
                    }
                }
                for (std::size_t i = 0; i < adv.size(); ++i) adv[i] = adv[i] + cfg.step_size * sign(momentum[i]);
            } else {
                for (std::size_t i = 0; i < adv.size(); ++i) adv[i] = adv[i] + cfg.step_size * sign(g[i]);
            }
            project(adv, clean, cfg.epsilon);
        }
        if (cfg.restarts == 1) {
            best = std::move(adv);
            break;
        }
        NoGradGuard no_grad;
        const Tensor candidate = Tensor::from(x.shape(), adv);
        const auto loss = objective_from_logits(model.logits(candidate), labels, cfg.loss_kind, cfg.kappa);
        for (std::size_t i = 0; i < n; ++i)
            if (loss[i] > best_loss[i]) {
                best_loss[i] = loss[i];
                std::copy_n(adv.begin() + static_cast<std::ptrdiff_t>(i * per), per,
                            best.begin() + static_cast<std::ptrdiff_t>(i * per));
            }
    }

    AttackResult result;
    result.adversarial = Tensor::from(x.shape(), std::move(best));
    result.success = misclassified(model, result.adversarial, labels);
    result.gradient_calls = calls;
    return result;
}

}  // namespace

std::vector<float> attack_loss(Classifier& model, const Tensor& x, std::span<const int> labels, LossKind kind,
                               float kappa) {
    NoGradGuard no_grad;
    return objective_from_logits(model.logits(x), labels, kind, kappa);
}

AttackResult fgsm(Classifier& model, const Tensor& x, std::span<const int> labels, const AttackConfig& cfg) {
    if (!(cfg.epsilon >= 0.0f)) throw ConfigError("attack.epsilon must be >= 0");
    check_batch(x, labels);
    FrozenParameters frozen(model);
    const auto g = input_gradient(model, x.data(), x.shape(), labels, LossKind::cross_entropy, 0.0f);
    std::vector<float> adv(x.size());
    for (std::size_t i = 0; i < adv.size(); ++i) adv[i] = std::clamp(x[i] + cfg.epsilon * sign(g[i]), 0.0f, 1.0f);
    AttackResult result;
    result.adversarial = Tensor::from(x.shape(), std::move(adv));
    result.success = misclassified(model, result.adversarial, labels);
    result.gradient_calls = 1;
    return result;
}

AttackResult pgd(Classifier& model, const Tensor& x, std::span<const int> labels, const AttackConfig& cfg) {
    return iterate(model, x, labels, cfg, Update::sign);
}

AttackResult mim(Classifier& model, const Tensor& x, std::span<const int> labels, const AttackConfig& cfg) {
    return iterate(model, x, labels, cfg, Update::momentum);
}

AttackResult cw_pgd(Classifier& model, const Tensor& x, std::span<const int> labels, const AttackConfig& cfg) {
    if (cfg.loss_kind != LossKind::cw_margin) throw ConfigError("cw_pgd requires attack.loss_kind = cw_margin");
    return iterate(model, x, labels, cfg, Update::sign);
}

AttackResult run_attack(AttackKind kind, Classifier& model, const Tensor& x, std::span<const int> labels,
                        const AttackConfig& cfg) {
    switch (kind) {
        case AttackKind::fgsm: return fgsm(model, x, labels, cfg);
        case AttackKind::pgd: {
            AttackConfig c = cfg;
            c.loss_kind = LossKind::cross_entropy;
            return pgd(model, x, labels, c);
        }
        case AttackKind::mim: {
            AttackConfig c = cfg;
            c.loss_kind = LossKind::cross_entropy;
            return mim(model, x, labels, c);
        }
        case AttackKind::cw: {
            AttackConfig c = cfg;
            c.loss_kind = LossKind::cw_margin;
            return cw_pgd(model, x, labels, c);
        }
        case AttackKind::none: break;
    }
    check_batch(x, labels);
    AttackResult result;
    result.adversarial = x.detach();
    result.success = misclassified(model, x, labels);
    return result;
}

// ---------------------------------------------------------------------------

std::vector<float> nes_gradient_estimate(const BatchLoss& loss, std::span<const float> x, const Shape& sample_shape,
                                         float sigma, std::size_t pairs, std::mt19937_64& rng) {
    const std::size_t dim = x.size();
    if (shape_size(sample_shape) != dim)
        throw DimensionError("nes: sample shape " + shape_string(sample_shape) + " does not hold " +
                             std::to_string(dim) + " values");
    std::normal_distribution<float> normal;
    std::vector<float> noise(pairs * dim);
    for (auto& v : noise) v = normal(rng);
    std::vector<float> points(2 * pairs * dim);
    for (std::size_t i = 0; i < pairs; ++i)
        for (std::size_t j = 0; j < dim; ++j) {
            points[(2 * i) * dim + j] = x[j] + sigma * noise[i * dim + j];
            points[(2 * i + 1) * dim + j] = x[j] - sigma * noise[i * dim + j];
        }
    Shape batch_shape{2 * pairs};
    batch_shape.insert(batch_shape.end(), sample_shape.begin(), sample_shape.end());
    const auto values = loss(Tensor::from(batch_shape, std::move(points)));
    if (values.size() != 2 * pairs) throw DimensionError("nes: loss returned the wrong number of values");
    std::vector<double> g(dim, 0.0);
    for (std::size_t i = 0; i < pairs; ++i) {
        const double diff = static_cast<double>(values[2 * i]) - values[2 * i + 1];
        for (std::size_t j = 0; j < dim; ++j) g[j] += diff * noise[i * dim + j];
    }
    std::vector<float> out(dim);
    const double norm = 1.0 / (2.0 * sigma * static_cast<double>(pairs));
    for (std::size_t j = 0; j < dim; ++j) out[j] = static_cast<float>(g[j] * norm);
    return out;
}

AttackResult nes_attack(const LogitOracle& oracle, const Tensor& x, std::span<const int> labels, const NesConfig& cfg) {
    cfg.validate();
    check_batch(x, labels);
    const std::size_t n = x.dim(0);
    const std::size_t per = x.size() / n;
    const Shape sample_shape(x.shape().begin() + 1, x.shape().end());
    Shape single{1};
    single.insert(single.end(), sample_shape.begin(), sample_shape.end());

    AttackResult result;
    result.success.assign(n, false);
    result.queries.assign(n, 0);
    std::vector<float> adv(x.data().begin(), x.data().end());
    const std::size_t step_cost = 2 * cfg.samples_per_step;

    for (std::size_t i = 0; i < n; ++i) {
        std::mt19937_64 rng(cfg.seed + i);
        const std::span<const float> clean = x.data().subspan(i * per, per);
        std::span<float> point(adv.data() + i * per, per);
        const int label = labels[i];
        auto predicted = [&](std::span<const float> p) {
            return argmax_rows(oracle(Tensor::from(single, std::vector<float>(p.begin(), p.end()))))[0];
        };
        if (predicted(point) != label) {
            result.success[i] = true;
            continue;
        }
        if (cfg.epsilon == 0.0f) continue;
        const BatchLoss loss = [&](const Tensor& batch) {
            const std::vector<int> ys(batch.dim(0), label);
            return per_sample_cross_entropy(oracle(batch), ys);
        };
        while (result.queries[i] + step_cost <= cfg.max_queries) {
            const auto g = nes_gradient_estimate(loss, point, sample_shape, cfg.fd_eta, cfg.samples_per_step, rng);
            result.queries[i] += step_cost;
            for (std::size_t j = 0; j < per; ++j) point[j] += cfg.lr * sign(g[j]);
            project(point, clean, cfg.epsilon);
            if (predicted(point) != label) {
                result.success[i] = true;
                break;
            }
        }
    }
    result.adversarial = Tensor::from(x.shape(), std::move(adv));
    return result;
}

LogitOracle as_oracle(Classifier& model) {
    return [&model](const Tensor& batch) {
        NoGradGuard no_grad;
        return model.logits(batch).detach();
    };
}

}  // namespace wavreg
