#include <cmath>
#include <numeric>

#include "doctest.h"
#include "helpers.hpp"
#include "wavreg/data.hpp"
#include "wavreg/errors.hpp"
#include "wavreg/evaluation.hpp"
#include "wavreg/training.hpp"

using namespace wavreg;

namespace {

TrainConfig quick(int epochs) {
    TrainConfig cfg;
    cfg.epochs = epochs;
    cfg.batch_size = 16;
    cfg.lr_initial = 0.05f;
    cfg.train_attack.steps = 2;
    cfg.seed = 3;
    return cfg;
}

double dataset_loss(Model& m, const Dataset& d) {
    std::vector<std::size_t> idx(d.size());
    std::iota(idx.begin(), idx.end(), 0);
    NoGradGuard guard;
    return softmax_cross_entropy(m.forward(d.batch(idx), false), d.batch_labels(idx)).item();
}

}  // namespace

TEST_CASE("learning-rate schedule") {
    TrainConfig cfg;
    cfg.epochs = 6;
    CHECK(lr_at(0, cfg) == doctest::Approx(0.1));
    cfg.lr_milestones = {2, 4};
    CHECK(lr_at(1, cfg) == doctest::Approx(0.1));
    CHECK(lr_at(2, cfg) == doctest::Approx(0.01));
    CHECK(lr_at(3, cfg) == doctest::Approx(0.01));
    CHECK(lr_at(5, cfg) == doctest::Approx(0.001));
    cfg.lr_milestones = {4, 2};
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg.lr_milestones = {6};
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg.lr_milestones = {};
    cfg.epochs = 0;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
}

TEST_CASE("gradient norm") {
    Model m(testutil::tiny_model(), 1);
    CHECK_THROWS_AS(gradient_norm(m), UsageError);
    for (auto& p : m.parameters()) p.value.grad_buffer();
    CHECK(gradient_norm(m) == 0.0);
    m.parameters()[0].value.grad_buffer()[0] = 3.0f;
    m.parameters()[0].value.grad_buffer()[1] = 4.0f;
    CHECK(gradient_norm(m) == doctest::Approx(5.0));

    Model r(testutil::tiny_model(), 2);
    r.set_requires_grad(true);
    auto x = testutil::random_tensor({2, 3, 32, 32}, 3, 0.0f, 1.0f);
    const std::vector<int> y = {0, 1};
    backward(softmax_cross_entropy(r.forward(x, true), y));
    std::vector<double> flat;
    for (const auto& p : r.parameters())
        for (float g : p.value.grad()) flat.push_back(g);
    double sq = 0.0;
    for (double g : flat) sq += g * g;
    CHECK(gradient_norm(r) == doctest::Approx(std::sqrt(sq)).epsilon(1e-6));
}

TEST_CASE("natural training reduces the loss on a separable toy set") {
    const auto data = synthetic_dataset(2, 96, 4);
    auto [train, val] = split_validation(data, 0.25);
    Model m(testutil::tiny_model(), 5);
    auto cfg = quick(1);
    cfg.train_attack.epsilon = 0.0f;
    const double before = dataset_loss(m, train);
    auto out = adversarial_train(m, train, val, cfg);
    CHECK(out.history.epochs.size() == 1);
    CHECK(dataset_loss(m, train) < before);
}

TEST_CASE("zero-budget adversarial training is natural training bitwise") {
    const auto data = synthetic_dataset(2, 64, 6);
    auto [train, val] = split_validation(data, 0.25);
    auto cfg = quick(2);
    cfg.train_attack.epsilon = 0.0f;
    Model a(testutil::tiny_model(), 7), b(testutil::tiny_model(), 7);
    const auto ha = adversarial_train(a, train, val, cfg).history;
    cfg.adversarial = false;
    const auto hb = adversarial_train(b, train, val, cfg).history;
    CHECK(ha == hb);
    for (std::size_t i = 0; i < a.parameters().size(); ++i)
        CHECK(testutil::bitwise_equal(a.parameters()[i].value, b.parameters()[i].value));
}

TEST_CASE("fixed seed reproduces the history and the best checkpoint is the argmax") {
    const auto data = synthetic_dataset(2, 64, 8);
    auto [train, val] = split_validation(data, 0.25);
    auto cfg = quick(3);
    cfg.lr_milestones = {2};
    Model a(testutil::tiny_model(), 9), b(testutil::tiny_model(), 9);
    auto oa = adversarial_train(a, train, val, cfg);
    auto ob = adversarial_train(b, train, val, cfg);
    CHECK(oa.history == ob.history);
    REQUIRE(oa.history.epochs.size() == 3);
    int argmax = 0;
    for (const auto& r : oa.history.epochs) {
        CHECK(std::isfinite(r.train_loss));
        CHECK(std::isfinite(r.mean_gradient_norm));
        CHECK(r.mean_gradient_norm > 0.0);
        if (r.robust_val_accuracy > oa.history.epochs[argmax].robust_val_accuracy) argmax = r.epoch;
    }
    CHECK(oa.history.best_epoch == argmax);
    CHECK(oa.history.epochs[2].lr == doctest::Approx(0.005));
    // the returned model reproduces the recorded robust accuracy of its epoch
    AttackConfig attack = cfg.train_attack;
    attack.seed = cfg.train_attack.seed + 7919;
    CHECK(accuracy(oa.best, val, AttackKind::pgd, attack) ==
          doctest::Approx(oa.history.epochs[argmax].robust_val_accuracy));
}

TEST_CASE("early stopping halts after the patience window") {
    const auto data = synthetic_dataset(2, 48, 10);
    auto [train, val] = split_validation(data, 0.25);
    auto cfg = quick(6);
    cfg.train_attack.steps = 1;
    Model full_model(testutil::tiny_model(), 11), stopped_model(testutil::tiny_model(), 11);
    const auto full = adversarial_train(full_model, train, val, cfg).history;
    // expected stop: first epoch after the best that brings no improvement
    std::size_t expect = full.epochs.size();
    double best = -1.0;
    for (std::size_t e = 0; e < full.epochs.size(); ++e) {
        if (full.epochs[e].robust_val_accuracy > best) {
            best = full.epochs[e].robust_val_accuracy;
        } else {
            expect = e + 1;
            break;
        }
    }
    cfg.early_stop_patience = 1;
    const auto stopped = adversarial_train(stopped_model, train, val, cfg).history;
    REQUIRE(stopped.epochs.size() == expect);
    for (std::size_t e = 0; e < expect; ++e)
        CHECK(stopped.epochs[e].robust_val_accuracy == full.epochs[e].robust_val_accuracy);
}

TEST_CASE("divergence is reported with its epoch and step") {
    const auto data = synthetic_dataset(2, 48, 12);
    auto [train, val] = split_validation(data, 0.25);
    auto cfg = quick(2);
    cfg.adversarial = false;
    cfg.lr_initial = 1e30f;
    Model m(testutil::tiny_model(), 13);
    try {
        adversarial_train(m, train, val, cfg);
        FAIL("expected divergence");
    } catch (const NumericError& e) {
        CHECK(std::string(e.what()).find("epoch 0") != std::string::npos);
        CHECK(std::string(e.what()).find("step") != std::string::npos);
    }
}
