// Acceptance harness: one PASS/FAIL line per criterion.

#include <chrono>
#include <cmath>
#include <complex>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <unistd.h>

#include <Eigen/Dense>

#include "wavreg/attacks.hpp"
#include "wavreg/checkpoint.hpp"
#include "wavreg/config.hpp"
#include "wavreg/data.hpp"
#include "wavreg/errors.hpp"
#include "wavreg/evaluation.hpp"
#include "wavreg/experiments.hpp"
#include "wavreg/io.hpp"
#include "wavreg/training.hpp"
#include "wavreg/wavelet.hpp"

using namespace wavreg;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool pass = true;
    std::ostringstream detail;
    void require(bool ok, const std::string& what) {
        if (!ok) {
            pass = false;
            detail << " [failed: " << what << "]";
        }
    }
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

Tensor uniform_tensor(Shape shape, std::mt19937_64& rng, float lo = 0.0f, float hi = 1.0f) {
    std::uniform_real_distribution<float> u(lo, hi);
    std::vector<float> v(shape_size(shape));
    for (auto& x : v) x = u(rng);
    return Tensor::from(std::move(shape), std::move(v));
}

double energy(const Tensor& t) {
    double e = 0.0;
    for (float v : t.data()) e += static_cast<double>(v) * v;
    return e;
}

fs::path scratch(const std::string& name) {
    const auto dir = fs::temp_directory_path() / ("wavreg_acceptance_" + std::to_string(::getpid())) / name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

// ---------------------------------------------------------------------------

Outcome wavelet_suite() {
    Outcome out;
    const auto t0 = std::chrono::steady_clock::now();
    std::mt19937_64 rng(1);
    double worst_pr = 0.0, worst_parseval = 0.0;
    for (auto name : supported_bases()) {
        const auto fb = filter_bank(name);
        for (int t = 0; t < 50; ++t) {
            const Tensor x = uniform_tensor({1, 3, 32, 32}, rng);
            const auto s = dwt2d(x, fb);
            const Tensor back = idwt2d(s, fb);
            for (std::size_t i = 0; i < x.size(); ++i)
                worst_pr = std::max(worst_pr, static_cast<double>(std::abs(back[i] - x[i])));
            if (fb.orthogonal)
                worst_parseval = std::max(
                    worst_parseval,
                    std::abs(energy(s.ll) + energy(s.lh) + energy(s.hl) + energy(s.hh) - energy(x)) / energy(x));
        }
    }
    const double elapsed = seconds_since(t0);
    out.detail << "max PR error " << worst_pr << ", max Parseval error " << worst_parseval << ", " << elapsed << " s";
    out.require(worst_pr < 1e-5, "PR < 1e-5");
    out.require(worst_parseval < 1e-4, "Parseval < 1e-4");
    out.require(elapsed < 10.0, "runtime < 10 s");
    return out;
}

Outcome wap_contract() {
    Outcome out;
    const auto haar = filter_bank("haar");
    const Tensor c = wavelet_average_pool(Tensor::full({1, 3, 16, 16}, 0.6f), haar);
    double dev = 0.0;
    for (float v : c.data()) dev = std::max(dev, std::abs(static_cast<double>(v) - 0.3));
    out.require(dev < 1e-6, "constant c -> c/2");

    const double lip_haar = wap_lipschitz_constant(haar);
    out.detail << "constant deviation " << dev << ", Haar L=" << lip_haar << ";";
    out.require(std::abs(lip_haar - 0.5) <= 1e-3, "Haar L = 0.5 +- 1e-3");

    double worst_grad = 0.0;
    std::mt19937_64 rng(2);
    for (auto name : supported_bases()) {
        const auto fb = filter_bank(name);
        const double lip = wap_lipschitz_constant(fb);
        out.detail << ' ' << name << " L=" << lip;
        out.require(lip <= 1.0 + 1e-3, std::string(name) + " L <= 1.001");

        // gradient of a random probe against central differences
        const Tensor probe = uniform_tensor({1, 2, 4, 4}, rng, -1.0f, 1.0f);
        const std::vector<float> w(probe.data().begin(), probe.data().end());
        Tensor x = uniform_tensor({1, 2, 8, 8}, rng);
        x.set_requires_grad(true);
        backward(weighted_sum(wavelet_average_pool(x, fb), w));
        const std::vector<float> g(x.grad().begin(), x.grad().end());
        double scale = 0.0;
        for (float v : g) scale = std::max(scale, static_cast<double>(std::abs(v)));
        for (std::size_t i = 0; i < x.size(); ++i) {
            Tensor plus = x.detach(), minus = x.detach();
            plus.data()[i] += 0.01f;
            minus.data()[i] -= 0.01f;
            const double fd = (static_cast<double>(weighted_sum(wavelet_average_pool(plus, fb), w).item()) -
                               weighted_sum(wavelet_average_pool(minus, fb), w).item()) /
                              (static_cast<double>(plus[i]) - minus[i]);
            worst_grad = std::max(worst_grad, std::abs(fd - g[i]) / scale);
        }
    }
    out.detail << "; gradient rel. error " << worst_grad;
    out.require(worst_grad < 1e-3, "gradient rel. error < 1e-3");
    return out;
}

Outcome theorem_harness() {
    Outcome out;
    const auto t0 = std::chrono::steady_clock::now();
    std::vector<double> scales;
    for (int j = 3; j <= 10; ++j) scales.push_back(std::ldexp(1.0, -j));
    const auto half = theorem_decay_check("haar", {ProbeKind::holder, 0.5, 0.5}, scales, 0.5);
    const auto one = theorem_decay_check("haar", {ProbeKind::holder, 1.0, 0.5}, scales, 0.5);
    out.detail << "slopes " << half.fitted_slope << " (alpha 0.5), " << one.fitted_slope << " (alpha 1)";
    out.require(std::abs(half.fitted_slope - 1.0) <= 0.1, "alpha 0.5 slope 1.0 +- 0.1");
    out.require(std::abs(one.fitted_slope - 1.5) <= 0.1, "alpha 1 slope 1.5 +- 0.1");

    const std::vector<double> offsets = {-0.1, -0.05, -0.02, -0.01, 0.0, 0.01, 0.02, 0.05, 0.1};
    for (double alpha : {0.5, 1.0}) {
        const auto r = theorem_local_regularity_check("haar", alpha, 0.5, offsets, scales);
        double worst_halving = 0.0;
        for (double h : r.halving_ratios) worst_halving = std::max(worst_halving, std::abs(h / std::pow(2.0, -alpha) - 1));
        out.detail << "; alpha " << alpha << ": max ratio " << r.max_ratio[0] << "/" << r.max_ratio[1] << "/"
                   << r.max_ratio[2] << ", halving deviation " << worst_halving;
        out.require(r.ratio_bounded, "local ratio bounded");
        out.require(r.dyadic_bound_holds, "dyadic halving within 20%");
    }
    const double elapsed = seconds_since(t0);
    out.detail << "; " << elapsed << " s";
    out.require(elapsed < 60.0, "runtime < 60 s");
    return out;
}

// Small linear classifier for the randomized invariant cases.
class LinearProbe : public Classifier {
public:
    LinearProbe(std::size_t dim, std::size_t classes, std::mt19937_64& rng)
        : w_(uniform_tensor({dim, classes}, rng, -1.0f, 1.0f)), b_(Tensor::zeros({classes})), dim_(dim),
          classes_(classes) {}
    Tensor logits(const Tensor& x) override { return linear(reshape(x, {x.dim(0), dim_}), w_, b_); }
    std::size_t num_classes() const override { return classes_; }

private:
    Tensor w_, b_;
    std::size_t dim_, classes_;
};

bool bitwise(const Tensor& a, const Tensor& b) {
    return a.shape() == b.shape() && std::memcmp(a.data().data(), b.data().data(), a.size() * sizeof(float)) == 0;
}

Outcome attack_suite() {
    Outcome out;
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<float> u(0.0f, 1.0f);
    int violations = 0, cases = 0;
    const AttackKind kinds[] = {AttackKind::fgsm, AttackKind::pgd, AttackKind::mim, AttackKind::cw};
    for (int t = 0; t < 1000; ++t) {
        LinearProbe model(12, 3, rng);
        const Tensor x = uniform_tensor({2, 3, 2, 2}, rng);
        const std::vector<int> labels = {static_cast<int>(rng() % 3), static_cast<int>(rng() % 3)};
        const float eps = 0.1f * u(rng);
        Tensor adv;
        if (t % 5 == 4) {
            NesConfig nes;
            nes.epsilon = eps;
            nes.samples_per_step = 5;
            nes.max_queries = 40;
            nes.seed = rng();
            adv = nes_attack(as_oracle(model), x, labels, nes).adversarial;
        } else {
            AttackConfig cfg;
            cfg.epsilon = eps;
            cfg.step_size = 0.001f + 0.05f * u(rng);
            cfg.steps = 1 + static_cast<int>(rng() % 5);
            cfg.random_init = rng() % 2;
            cfg.restarts = 1 + static_cast<int>(rng() % 2);
            cfg.seed = rng();
            adv = run_attack(kinds[t % 4], model, x, labels, cfg).adversarial;
        }
        ++cases;
        for (std::size_t i = 0; i < x.size(); ++i)
            if (adv[i] < 0.0f || adv[i] > 1.0f || std::abs(adv[i] - x[i]) > eps + 1e-6f) {
                ++violations;
                break;
            }
    }
    out.detail << violations << "/" << cases << " invariant violations";
    out.require(violations == 0, "ball and box on every case");

    ModelConfig mc;
    mc.depth = 1;
    mc.width = 1;
    mc.num_classes = 2;
    Model model(mc, 4);
    const auto data = synthetic_dataset(2, 64, 5);
    std::vector<std::size_t> idx(data.size());
    std::iota(idx.begin(), idx.end(), 0);
    const Tensor x = data.batch(idx);
    const auto y = data.batch_labels(idx);
    AttackConfig one;
    one.epsilon = 0.031f;
    one.step_size = 0.031f;
    one.steps = 1;
    one.random_init = false;
    const Tensor f = fgsm(model, x, y, one).adversarial;
    const bool fgsm_pgd = bitwise(f, pgd(model, x, y, one).adversarial);
    const bool fgsm_mim = bitwise(f, mim(model, x, y, one).adversarial);
    out.detail << "; FGSM==PGD(1) " << (fgsm_pgd ? "yes" : "no") << ", MIM(1)==FGSM " << (fgsm_mim ? "yes" : "no");
    out.require(fgsm_pgd, "FGSM == 1-step PGD bitwise");
    out.require(fgsm_mim, "MIM(steps=1) == FGSM bitwise");

    out.detail << "; PGD success over eps grid:";
    double previous = -1.0;
    for (float eps : {0.0f, 0.0155f, 0.031f, 0.0465f}) {
        AttackConfig cfg;
        cfg.epsilon = eps;
        cfg.step_size = 2.0f / 255.0f;
        cfg.steps = 20;
        cfg.random_init = false;
        const double rate = pgd(model, x, y, cfg).success_rate();
        out.detail << ' ' << rate;
        out.require(rate >= previous, "success non-decreasing in eps");
        previous = rate;
    }
    return out;
}

Outcome training_direction() {
    Outcome out;
    const auto t0 = std::chrono::steady_clock::now();
    const auto train = synthetic_dataset(2, 2000, 1);
    const auto val = synthetic_dataset(2, 500, 2);
    ModelConfig mc;
    mc.depth = 1;
    mc.width = 1;
    mc.num_classes = 2;
    TrainConfig tc;
    tc.epochs = 4;
    tc.batch_size = 32;
    tc.lr_initial = 0.05f;
    tc.robust_val_samples = 100;
    tc.seed = 5;
    AttackConfig eval;
    eval.epsilon = 0.031f;
    eval.step_size = 2.0f / 255.0f;
    eval.steps = 20;
    eval.seed = 99;

    double robust[2] = {0.0, 0.0}, clean[2] = {0.0, 0.0};
    for (int adversarial = 0; adversarial < 2; ++adversarial) {
        tc.adversarial = adversarial == 1;
        Model model(mc, 3);
        auto result = adversarial_train(model, train, val, tc);
        clean[adversarial] = accuracy(result.best, val);
        robust[adversarial] = accuracy(result.best, val, AttackKind::pgd, eval);
    }
    const double elapsed = seconds_since(t0);
    out.detail << "natural clean " << clean[0] << " PGD-20 " << robust[0] << "; adversarial clean " << clean[1]
               << " PGD-20 " << robust[1] << "; " << tc.epochs << " epochs each, " << elapsed << " s";
    out.require(robust[0] < 0.2, "natural PGD-20 accuracy < 20%");
    out.require(robust[1] - robust[0] >= 0.2, "adversarial gap >= 20 points");
    out.require(elapsed < 15 * 60, "runtime < 15 min");
    return out;
}

Outcome ablation_hook() {
    Outcome out;
    RunConfig cfg;
    apply_overrides(cfg, {"data.synthetic_classes=2", "model.num_classes=2", "data.train_samples=120",
                          "data.test_samples=40", "model.depth=1", "model.width=1", "train.epochs=1",
                          "train.batch_size=32", "train.attack.steps=2", "attack.steps=3"});
    std::string text[2];
    for (int run = 0; run < 2; ++run) {
        const auto dir = scratch("ablation" + std::to_string(run));
        cfg.set("out.dir", dir.string());
        std::ostringstream log;
        out.require(command_sweep_ablation(cfg, log) == 0, "sweep exit status 0");
        text[run] = read_text(dir / "ablation.csv");
    }
    const auto table = read_csv(fs::path(cfg.get("out.dir")) / "ablation.csv");
    const bool rows = table.rows.size() == 3 && table.rows[0][0] == "wap" && table.rows[1][0] == "no_wap" &&
                      table.rows[2][0] == "delta";
    out.require(rows, "paired rows wap/no_wap/delta");
    out.require(text[0] == text[1], "identical CSV across reruns");
    if (rows) {
        out.detail << "paired rows emitted, reruns identical: " << (text[0] == text[1] ? "yes" : "no")
                   << "; delta clean " << table.rows[2][3] << ", PGD " << table.rows[2][5] << " (reported only)";
    }
    return out;
}

// Predicts class 1 when the image carries energy outside the central
// |fy|, |fx| <= 7 band of the spectrum, in any channel.
class HighFrequencyDetector : public Classifier {
public:
    static constexpr int kBand = 7;

    HighFrequencyDetector() : basis_(2 * kBand + 1, 32) {
        for (int p = -kBand; p <= kBand; ++p)
            for (int n = 0; n < 32; ++n) basis_(p + kBand, n) = std::polar(1.0, -2.0 * M_PI * p * n / 32.0);
    }
    Tensor logits(const Tensor& x) override {
        const std::size_t n = x.dim(0), c = x.dim(1);
        std::vector<float> z(n * 2, 0.0f);
        for (std::size_t s = 0; s < n; ++s) {
            double high = 0.0;
            for (std::size_t ch = 0; ch < c; ++ch) {
                Eigen::MatrixXcd plane(32, 32);
                double total = 0.0;
                for (int i = 0; i < 32; ++i)
                    for (int j = 0; j < 32; ++j) {
                        const double v = x[((s * c + ch) * 32 + i) * 32 + j];
                        plane(i, j) = v;
                        total += v * v;
                    }
                const Eigen::MatrixXcd f = basis_ * plane * basis_.transpose();
                high = std::max(high, total - f.squaredNorm() / 1024.0);
            }
            z[s * 2 + (high > 1.0 ? 1 : 0)] = 1.0f;
        }
        return Tensor::from({n, 2}, z);
    }
    std::size_t num_classes() const override { return 2; }

private:
    Eigen::MatrixXcd basis_;
};

Outcome fourier_heat_map_check() {
    Outcome out;
    // smooth low-frequency images of class 0
    Dataset data;
    data.provenance = "synthetic";
    std::mt19937_64 rng(6);
    std::uniform_real_distribution<double> u(-0.05, 0.05);
    const std::size_t n = 40;
    for (std::size_t s = 0; s < n; ++s) {
        const double ay = u(rng), ax = u(rng);
        for (std::size_t ch = 0; ch < 3; ++ch)
            for (int y = 0; y < 32; ++y)
                for (int x = 0; x < 32; ++x)
                    data.images.push_back(static_cast<float>(0.5 + ay * std::cos(2 * M_PI * y / 32.0) +
                                                             ax * std::sin(2 * M_PI * 2 * x / 32.0)));
        data.labels.push_back(0);
    }
    HighFrequencyDetector detector;
    HeatMapOptions opt;
    opt.samples_per_cell = 20;
    opt.seed = 7;
    const auto grid = fourier_heat_map(detector, data, opt);
    opt.samples_per_cell = 40;
    const auto doubled = fourier_heat_map(detector, data, opt);

    std::size_t high_cells = 0, high_errors = 0, low_errors = 0;
    double change = 0.0;
    for (std::size_t i = 0; i < grid.rows; ++i)
        for (std::size_t j = 0; j < grid.cols; ++j) {
            const bool high = std::abs(centered_frequency(i, 32)) > HighFrequencyDetector::kBand ||
                              std::abs(centered_frequency(j, 32)) > HighFrequencyDetector::kBand;
            const double e = grid.at(i, j);
            if (high) {
                ++high_cells;
                high_errors += e > 0.0;
            } else {
                low_errors += e > 0.0;
            }
            change += std::abs(e - doubled.at(i, j));
        }
    change /= static_cast<double>(grid.error.size());

    const auto dir = scratch("heatmap");
    {
        CsvWriter csv(dir / "heatmap.csv", "fourier-heatmap", {"i", "j", "error_rate"});
        for (std::size_t i = 0; i < grid.rows; ++i)
            for (std::size_t j = 0; j < grid.cols; ++j)
                csv.row({static_cast<long long>(i), static_cast<long long>(j), grid.at(i, j)});
    }
    write_pgm(dir / "heatmap.pgm", grid.image_width, grid.image_height, grid.centered());
    const bool emitted = read_csv(dir / "heatmap.csv").rows.size() == grid.error.size() &&
                         fs::file_size(dir / "heatmap.pgm") == std::string("P5\n32 32\n255\n").size() + 1024;

    out.detail << grid.rows << "x" << grid.cols << " cells; erring low-frequency cells " << low_errors
               << ", erring high-frequency cells " << high_errors << "/" << high_cells
               << "; mean change on doubling samples " << change << "; PGM+CSV " << (emitted ? "written" : "missing");
    out.require(low_errors == 0, "errors only in high-frequency cells");
    out.require(high_errors > 0, "high-frequency cells register errors");
    out.require(change < 0.05, "mean change < 0.05 when doubling samples");
    out.require(emitted, "PGM and CSV emitted");
    return out;
}

Outcome io_check() {
    Outcome out;
    // CIFAR-10: bytes written from a known dataset parse back to it
    std::mt19937_64 rng(8);
    std::vector<std::uint8_t> file;
    std::vector<int> labels;
    std::vector<float> expect;
    for (int r = 0; r < 25; ++r) {
        labels.push_back(static_cast<int>(rng() % 10));
        file.push_back(static_cast<std::uint8_t>(labels.back()));
        for (int k = 0; k < 3072; ++k) {
            const auto v = static_cast<std::uint8_t>(rng() % 256);
            file.push_back(v);
            expect.push_back(static_cast<float>(v) / 255.0f);
        }
    }
    const auto dir = scratch("io");
    {
        std::ofstream f(dir / "batch.bin", std::ios::binary);
        f.write(reinterpret_cast<const char*>(file.data()), static_cast<std::streamsize>(file.size()));
    }
    const auto d = load_cifar10(dir / "batch.bin");
    const bool cifar_ok = d.labels == labels && d.images == expect;
    bool truncated_rejected = false;
    try {
        parse_cifar10(std::span<const std::uint8_t>(file).first(file.size() - 1));
    } catch (const FormatError&) {
        truncated_rejected = true;
    }
    out.require(cifar_ok, "CIFAR-10 layout round trip");
    out.require(truncated_rejected, "truncated CIFAR-10 file rejected");

    ModelConfig mc;
    mc.depth = 1;
    mc.width = 1;
    mc.num_classes = 10;
    Model model(mc, 9);
    model.forward(uniform_tensor({4, 3, 32, 32}, rng), true);  // populate running stats
    save_checkpoint(model, dir / "model.wwrn");
    Model back = load_checkpoint(dir / "model.wwrn");
    const Tensor x = uniform_tensor({4, 3, 32, 32}, rng);
    const bool forward_equal = bitwise(back.forward(x, false), model.forward(x, false));
    const auto bytes = encode_checkpoint(model);
    const bool bytes_equal = encode_checkpoint(back) == bytes;
    out.require(forward_equal, "loaded model forward bit-identical");
    out.require(bytes_equal, "re-encoded checkpoint byte-identical");

    std::size_t detected = 0;
    const std::size_t trials = 200;
    for (std::size_t t = 0; t < trials; ++t) {
        auto corrupt = bytes;
        const std::size_t at = 12 + rng() % (bytes.size() - 16);
        corrupt[at] ^= static_cast<std::uint8_t>(1 + rng() % 255);
        try {
            decode_checkpoint(corrupt);
        } catch (const FormatError&) {
            ++detected;
        }
    }
    out.detail << "CIFAR round trip " << (cifar_ok ? "ok" : "mismatch") << ", checkpoint forward "
               << (forward_equal ? "bit-identical" : "differs") << ", corruption detected " << detected << "/"
               << trials;
    out.require(detected == trials, "every single-byte corruption detected");
    return out;
}

}  // namespace

int main() {
    const std::pair<const char*, std::function<Outcome()>> criteria[] = {
        {"1 wavelet correctness", wavelet_suite},
        {"2 WAP contract", wap_contract},
        {"3 theorem harness", theorem_harness},
        {"4 attack suite", attack_suite},
        {"5 adversarial training direction", training_direction},
        {"6 ablation hook", ablation_hook},
        {"7 Fourier heat map", fourier_heat_map_check},
        {"8 I/O", io_check},
    };
    int failures = 0;
    for (const auto& [name, run] : criteria) {
        Outcome o;
        try {
            o = run();
        } catch (const std::exception& e) {
            o.pass = false;
            o.detail << "exception: " << e.what();
        }
        failures += !o.pass;
        std::printf("%s criterion %s: %s\n", o.pass ? "PASS" : "FAIL", name, o.detail.str().c_str());
        std::fflush(stdout);
    }
    fs::remove_all(fs::temp_directory_path() / ("wavreg_acceptance_" + std::to_string(::getpid())));
    return failures == 0 ? 0 : 1;
}
