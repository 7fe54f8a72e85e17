#include "wavreg/experiments.hpp"

#include <cmath>
#include <cstdlib>
#include <numeric>
#include <ostream>
#include <random>

#include "wavreg/checkpoint.hpp"
#include "wavreg/errors.hpp"
#include "wavreg/evaluation.hpp"
#include "wavreg/io.hpp"
#include "wavreg/ops.hpp"
#include "wavreg/wavelet.hpp"

namespace wavreg {

namespace fs = std::filesystem;

int exit_code(ErrorCategory category) {
    switch (category) {
        case ErrorCategory::config: return 2;
        case ErrorCategory::format: return 3;
        case ErrorCategory::numeric: return 4;
        case ErrorCategory::input: return 5;
        case ErrorCategory::dimension: return 6;
        case ErrorCategory::usage: return 7;
        case ErrorCategory::unsupported_base: return 8;
        case ErrorCategory::resolution: return 9;
    }
    return 1;
}

namespace {

fs::path prepare_output(const RunConfig& cfg) {
    const fs::path dir = cfg.get("out.dir");
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw InputError("cannot create output directory '" + dir.string() + "': " + ec.message());
    write_text(dir / "config.txt", cfg.serialize());
    return dir;
}

Dataset first_samples(const Dataset& d, std::size_t limit) {
    return limit == 0 || limit >= d.size() ? d : d.slice(0, limit);
}

Model model_from_checkpoint(const RunConfig& cfg) {
    const auto& path = cfg.get("checkpoint");
    if (path.empty()) throw ConfigError("'checkpoint' must name a model file for this command");
    return load_checkpoint(path);
}

fs::path cifar_root() {
    const char* root = std::getenv(kDataRootVariable);
    if (!root || !*root)
        throw ConfigError(std::string("data.source=cifar10 needs the ") + kDataRootVariable + " environment variable");
    fs::path dir = root;
    if (!fs::exists(dir / "test_batch.bin") && fs::exists(dir / "cifar-10-batches-bin" / "test_batch.bin"))
        dir /= "cifar-10-batches-bin";
    return dir;
}

}  // namespace

DataBundle load_data(const RunConfig& cfg) {
    const auto& source = cfg.get("data.source");
    const auto seed = static_cast<std::uint64_t>(cfg.get_size("seed"));
    const int classes = cfg.get_int("model.num_classes");
    Dataset train, test;
    if (source == "synthetic") {
        const int k = cfg.get_int("data.synthetic_classes");
        if (k != classes)
            throw ConfigError("data.synthetic_classes (" + std::to_string(k) + ") must equal model.num_classes (" +
                              std::to_string(classes) + ")");
        const std::size_t n_train = cfg.get_size("data.train_samples");
        const std::size_t n_test = cfg.get_size("data.test_samples");
        if (n_train == 0 || n_test == 0) throw ConfigError("synthetic data needs data.train_samples and data.test_samples > 0");
        train = synthetic_dataset(k, n_train, 2 * seed + 1);
        test = synthetic_dataset(k, n_test, 2 * seed + 2);
    } else if (source == "cifar10") {
        if (classes != 10) throw ConfigError("CIFAR-10 needs model.num_classes=10");
        const fs::path dir = cifar_root();
        std::vector<fs::path> batches;
        for (int i = 1; i <= 5; ++i) batches.push_back(dir / ("data_batch_" + std::to_string(i) + ".bin"));
        train = first_samples(load_cifar10(batches), cfg.get_size("data.train_samples"));
        test = first_samples(load_cifar10(dir / "test_batch.bin"), cfg.get_size("data.test_samples"));
    } else {
        throw ConfigError("data.source must be 'synthetic' or 'cifar10', got '" + source + "'");
    }
    auto [tr, val] = split_validation(train, cfg.get_double("data.val_fraction"));
    return {std::move(tr), std::move(val), std::move(test)};
}

RobustnessRow evaluate_robustness(Model& model, const Dataset& data, const AttackConfig& attack) {
    RobustnessRow row;
    row.clean = accuracy(model, data);
    row.fgsm = accuracy(model, data, AttackKind::fgsm, attack);
    row.pgd = accuracy(model, data, AttackKind::pgd, attack);
    row.mim = accuracy(model, data, AttackKind::mim, attack);
    row.cw = accuracy(model, data, AttackKind::cw, attack);
    return row;
}

namespace {

const std::vector<std::string> kRobustnessColumns = {"clean", "fgsm", "pgd", "mim", "cw"};

std::vector<CsvWriter::Cell> cells(const RobustnessRow& r) { return {r.clean, r.fgsm, r.pgd, r.mim, r.cw}; }

TrainOutcome train_model(const ModelConfig& mc, const TrainConfig& tc, const DataBundle& data, std::uint64_t seed,
                         std::ostream& log, const std::string& tag) {
    Model model(mc, seed);
    log << tag << "parameters=" << model.parameter_count() << '\n';
    return adversarial_train(model, data.train, data.val, tc, [&](const EpochRecord& r) {
        log << tag << "epoch " << r.epoch << " lr=" << r.lr << " loss=" << r.train_loss
            << " clean_val=" << r.clean_val_accuracy << " robust_val=" << r.robust_val_accuracy
            << " grad_norm=" << r.mean_gradient_norm << '\n';
    });
}

}  // namespace

int command_train(const RunConfig& cfg, std::ostream& log) {
    const auto mc = model_config(cfg);
    const auto tc = train_config(cfg);
    const auto dir = prepare_output(cfg);
    const auto data = load_data(cfg);
    auto outcome = train_model(mc, tc, data, cfg.get_size("seed"), log, "");

    CsvWriter csv(dir / "history.csv", "train-history",
                  {"epoch", "lr", "train_loss", "clean_val_accuracy", "robust_val_accuracy", "mean_gradient_norm"});
    for (const auto& r : outcome.history.epochs)
        csv.row({static_cast<long long>(r.epoch), r.lr, r.train_loss, r.clean_val_accuracy, r.robust_val_accuracy,
                 r.mean_gradient_norm});
    const fs::path ckpt = cfg.get("checkpoint").empty() ? dir / "model.wwrn" : fs::path(cfg.get("checkpoint"));
    save_checkpoint(outcome.best, ckpt);
    log << "best epoch " << outcome.history.best_epoch << ", checkpoint " << ckpt.string() << '\n';
    return 0;
}

int command_eval(const RunConfig& cfg, std::ostream& log) {
    auto model = model_from_checkpoint(cfg);
    const auto attack = attack_config(cfg);
    const auto dir = prepare_output(cfg);
    const auto data = load_data(cfg);
    const auto row = evaluate_robustness(model, data.test, attack);
    CsvWriter csv(dir / "metrics.csv", "robustness", kRobustnessColumns);
    csv.row(cells(row));
    log << "clean=" << row.clean << " fgsm=" << row.fgsm << " pgd=" << row.pgd << " mim=" << row.mim
        << " cw=" << row.cw << '\n';
    return 0;
}

int command_attack(const RunConfig& cfg, std::ostream& log) {
    auto model = model_from_checkpoint(cfg);
    const auto dir = prepare_output(cfg);
    const auto data = load_data(cfg);
    const auto& kind = cfg.get("attack.kind");
    CsvWriter csv(dir / "attack.csv", "attack",
                  {"attack", "epsilon", "samples", "clean_accuracy", "robust_accuracy", "success_rate", "mean_queries"});
    const double clean = accuracy(model, data.test);

    if (kind == "nes") {
        const auto nes = nes_config(cfg);
        const Dataset subset = first_samples(data.test, cfg.get_size("nes.samples"));
        std::vector<std::size_t> idx(subset.size());
        std::iota(idx.begin(), idx.end(), 0);
        const auto result = nes_attack(as_oracle(model), subset.batch(idx), subset.batch_labels(idx), nes);
        const double queries = std::accumulate(result.queries.begin(), result.queries.end(), 0.0) /
                               static_cast<double>(result.queries.size());
        const double subset_clean = accuracy(model, subset);
        csv.row({std::string("nes"), static_cast<double>(nes.epsilon), static_cast<long long>(subset.size()),
                 subset_clean, 1.0 - result.success_rate(), result.success_rate(), queries});
        log << "nes success=" << result.success_rate() << " mean_queries=" << queries << '\n';
        return 0;
    }

    const auto attack = attack_config(cfg);
    std::vector<AttackKind> kinds;
    if (kind == "all")
        kinds = {AttackKind::fgsm, AttackKind::pgd, AttackKind::mim, AttackKind::cw};
    else
        kinds = {attack_kind(cfg)};
    for (auto k : kinds) {
        const double robust = accuracy(model, data.test, k, attack);
        csv.row({std::string(to_string(k)), static_cast<double>(attack.epsilon),
                 static_cast<long long>(data.test.size()), clean, robust, 1.0 - robust, 0.0});
        log << to_string(k) << " eps=" << attack.epsilon << " clean=" << clean << " robust=" << robust << '\n';
    }
    return 0;
}

int command_heatmap(const RunConfig& cfg, std::ostream& log) {
    auto model = model_from_checkpoint(cfg);
    const auto options = heatmap_options(cfg);
    const auto dir = prepare_output(cfg);
    const auto data = load_data(cfg);
    const auto grid = fourier_heat_map(model, data.test, options);
    CsvWriter csv(dir / "heatmap.csv", "fourier-heatmap", {"i", "j", "freq_y", "freq_x", "error_rate"});
    for (std::size_t i = 0; i < grid.rows; ++i)
        for (std::size_t j = 0; j < grid.cols; ++j)
            csv.row({static_cast<long long>(i), static_cast<long long>(j),
                     static_cast<long long>(centered_frequency(i, grid.image_height)),
                     static_cast<long long>(centered_frequency(j, grid.image_width)), grid.at(i, j)});
    write_pgm(dir / "heatmap.pgm", grid.image_width, grid.image_height, grid.centered());
    const double mean = std::accumulate(grid.error.begin(), grid.error.end(), 0.0) / static_cast<double>(grid.error.size());
    log << "heat map " << grid.rows << "x" << grid.cols << " mean error " << mean << '\n';
    return 0;
}

int command_gradcam(const RunConfig& cfg, std::ostream& log) {
    auto model = model_from_checkpoint(cfg);
    const auto dir = prepare_output(cfg);
    const auto data = load_data(cfg);
    const std::size_t index = cfg.get_size("gradcam.index");
    if (index >= data.test.size())
        throw ConfigError("gradcam.index " + std::to_string(index) + " exceeds the test set of " +
                          std::to_string(data.test.size()));
    const std::size_t idx[] = {index};
    int cls = cfg.get_int("gradcam.class");
    if (cls < 0) cls = data.test.labels[index];
    const auto cam = gradcam(model, data.test.batch(idx), cls);
    CsvWriter csv(dir / "gradcam.csv", "gradcam", {"y", "x", "value"});
    std::vector<double> values(cam.map.begin(), cam.map.end());
    for (std::size_t y = 0; y < cam.height; ++y)
        for (std::size_t x = 0; x < cam.width; ++x)
            csv.row({static_cast<long long>(y), static_cast<long long>(x), values[y * cam.width + x]});
    write_pgm(dir / "gradcam.pgm", cam.width, cam.height, values);
    log << "grad-cam " << cam.height << "x" << cam.width << " for class " << cls << '\n';
    return 0;
}

int command_check_wavelet(const RunConfig& cfg, std::ostream& log) {
    const auto dir = prepare_output(cfg);
    std::mt19937_64 rng(cfg.get_size("seed"));
    std::uniform_real_distribution<float> unit(0.0f, 1.0f);
    constexpr int kInputs = 50;
    constexpr double kTolerance = 1e-4;
    CsvWriter csv(dir / "wavelet_check.csv", "wavelet-check",
                  {"base", "orthogonal", "reconstruction_error", "parseval_error", "wap_lipschitz", "pass"});
    bool all = true;
    for (auto name : supported_bases()) {
        const auto fb = filter_bank(name);
        double pr = 0.0, parseval = 0.0;
        for (int t = 0; t < kInputs; ++t) {
            std::vector<float> v(3 * 32 * 32);
            for (auto& x : v) x = unit(rng);
            const Tensor x = Tensor::from({1, 3, 32, 32}, v);
            const auto s = dwt2d(x, fb);
            const Tensor back = idwt2d(s, fb);
            double energy = 0.0, sub = 0.0;
            for (std::size_t i = 0; i < x.size(); ++i) {
                pr = std::max(pr, static_cast<double>(std::abs(back[i] - x[i])));
                energy += static_cast<double>(x[i]) * x[i];
            }
            for (const Tensor* b : {&s.ll, &s.lh, &s.hl, &s.hh})
                for (float c : b->data()) sub += static_cast<double>(c) * c;
            if (fb.orthogonal) parseval = std::max(parseval, std::abs(sub - energy) / energy);
        }
        const double lip = wap_lipschitz_constant(fb);
        const bool pass = pr < kTolerance && parseval < kTolerance;
        all = all && pass;
        csv.row({std::string(name), std::string(fb.orthogonal ? "true" : "false"), pr,
                 fb.orthogonal ? parseval : std::nan(""), lip, std::string(pass ? "true" : "false")});
        log << name << ": reconstruction " << pr << ", parseval " << (fb.orthogonal ? parseval : 0.0)
            << ", WAP Lipschitz " << lip << '\n';
    }
    return all ? 0 : exit_code(ErrorCategory::numeric);
}

int command_check_theorems(const RunConfig& cfg, std::ostream& log) {
    const auto dir = prepare_output(cfg);
    CsvWriter csv(dir / "theorems.csv", "theorem-check", {"check", "base", "alpha", "measured", "expected", "pass"});
    std::vector<double> scales;
    for (int j = 3; j <= 10; ++j) scales.push_back(std::ldexp(1.0, -j));
    bool all = true;
    for (double alpha : {0.5, 1.0}) {
        const auto fit = theorem_decay_check("haar", {ProbeKind::holder, alpha, 0.5}, scales, 0.5);
        const bool pass = std::abs(fit.fitted_slope - fit.theoretical_slope) <= 0.1;
        all = all && pass;
        csv.row({std::string("decay_slope"), fit.base, alpha, fit.fitted_slope, fit.theoretical_slope,
                 std::string(pass ? "true" : "false")});
        log << "decay alpha=" << alpha << " slope " << fit.fitted_slope << " (theory " << fit.theoretical_slope << ")\n";
    }
    {
        const auto fit = theorem_decay_check("haar", {ProbeKind::sine, 1.0, 0.5}, scales, 0.3);
        const bool pass = fit.fitted_slope >= 1.5;
        all = all && pass;
        csv.row({std::string("decay_slope_sine"), fit.base, 1.0, fit.fitted_slope, 1.5,
                 std::string(pass ? "true" : "false")});
        log << "decay sine slope " << fit.fitted_slope << '\n';
    }
    const std::vector<double> offsets = {-0.1, -0.05, -0.02, -0.01, 0.0, 0.01, 0.02, 0.05, 0.1};
    for (double alpha : {0.5, 1.0}) {
        const auto r = theorem_local_regularity_check("haar", alpha, 0.5, offsets, scales);
        all = all && r.holds();
        csv.row({std::string("local_ratio_max"), std::string("haar"), alpha, r.max_ratio.back(),
                 10.0 * r.median_ratio.back(), std::string(r.ratio_bounded ? "true" : "false")});
        csv.row({std::string("local_log_ratio_max"), std::string("haar"), alpha, r.max_log_ratio.back(), std::nan(""),
                 std::string("reported")});
        double worst = 0.0;
        for (double h : r.halving_ratios) worst = std::max(worst, std::abs(h / std::pow(2.0, -alpha) - 1.0));
        csv.row({std::string("dyadic_halving_deviation"), std::string("haar"), alpha, worst, 0.2,
                 std::string(r.dyadic_bound_holds ? "true" : "false")});
        log << "local regularity alpha=" << alpha << " max ratio " << r.max_ratio.back() << ", dyadic deviation "
            << worst << '\n';
    }
    return all ? 0 : exit_code(ErrorCategory::numeric);
}

int command_sweep_bases(const RunConfig& cfg, std::ostream& log) {
    auto mc = model_config(cfg);
    const auto tc = train_config(cfg);
    const auto attack = attack_config(cfg);
    const auto dir = prepare_output(cfg);
    const auto data = load_data(cfg);
    if (mc.wap_position == WapPosition::disabled) mc.wap_position = WapPosition::after_final_relu;
    std::vector<std::string> columns = {"base"};
    columns.insert(columns.end(), kRobustnessColumns.begin(), kRobustnessColumns.end());
    CsvWriter csv(dir / "bases.csv", "base-sweep", columns);
    for (const auto& base : cfg.get_list("sweep.bases")) {
        mc.wavelet_base = base;
        mc.validate();
        auto outcome = train_model(mc, tc, data, cfg.get_size("seed"), log, "[" + base + "] ");
        const auto row = evaluate_robustness(outcome.best, data.test, attack);
        auto r = cells(row);
        r.insert(r.begin(), base);
        csv.row(r);
        log << "[" << base << "] clean=" << row.clean << " pgd=" << row.pgd << '\n';
    }
    return 0;
}

int command_sweep_ablation(const RunConfig& cfg, std::ostream& log) {
    auto with = model_config(cfg);
    const auto tc = train_config(cfg);
    const auto attack = attack_config(cfg);
    const auto dir = prepare_output(cfg);
    const auto data = load_data(cfg);
    if (with.wap_position == WapPosition::disabled) with.wap_position = WapPosition::after_final_relu;
    ModelConfig without = with;
    without.wap_position = WapPosition::disabled;

    std::vector<std::string> columns = {"variant", "wap_position", "parameters"};
    columns.insert(columns.end(), kRobustnessColumns.begin(), kRobustnessColumns.end());
    CsvWriter csv(dir / "ablation.csv", "wap-ablation", columns);
    RobustnessRow rows[2];
    const ModelConfig* cfgs[2] = {&with, &without};
    const char* names[2] = {"wap", "no_wap"};
    std::size_t params = 0;
    for (int v = 0; v < 2; ++v) {
        auto outcome = train_model(*cfgs[v], tc, data, cfg.get_size("seed"), log, std::string("[") + names[v] + "] ");
        rows[v] = evaluate_robustness(outcome.best, data.test, attack);
        params = outcome.best.parameter_count();
        auto r = cells(rows[v]);
        r.insert(r.begin(), {std::string(names[v]), std::string(to_string(cfgs[v]->wap_position)),
                             static_cast<long long>(params)});
        csv.row(r);
    }
    const RobustnessRow delta{rows[0].clean - rows[1].clean, rows[0].fgsm - rows[1].fgsm, rows[0].pgd - rows[1].pgd,
                              rows[0].mim - rows[1].mim, rows[0].cw - rows[1].cw};
    auto r = cells(delta);
    r.insert(r.begin(), {std::string("delta"), std::string("-"), 0LL});
    csv.row(r);
    log << "WAP minus no-WAP: clean " << delta.clean << ", pgd " << delta.pgd << '\n';
    return 0;
}

}  // namespace wavreg
