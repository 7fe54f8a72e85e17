#include "wavreg/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <random>

#include "wavreg/errors.hpp"
#include "wavreg/ops.hpp"
#include "wavreg/wavelet.hpp"

namespace wavreg {

double accuracy(Classifier& model, const Dataset& data, AttackKind kind, const AttackConfig& attack,
                std::size_t batch_size) {
    if (data.size() == 0) throw InputError("accuracy: dataset is empty");
    if (batch_size == 0) throw ConfigError("accuracy: batch size must be >= 1");
    std::size_t correct = 0;
    for (std::size_t begin = 0; begin < data.size(); begin += batch_size) {
        const std::size_t count = std::min(batch_size, data.size() - begin);
        std::vector<std::size_t> idx(count);
        std::iota(idx.begin(), idx.end(), begin);
        Tensor x = data.batch(idx);
        const auto y = data.batch_labels(idx);
        if (kind != AttackKind::none) {
            AttackConfig cfg = attack;
            cfg.seed = attack.seed + begin;  // per-batch stream, independent of batch order
            x = run_attack(kind, model, x, y, cfg).adversarial;
        }
        NoGradGuard no_grad;
        const auto pred = argmax_rows(model.logits(x));
        for (std::size_t i = 0; i < count; ++i) correct += pred[i] == y[i];
    }
    return static_cast<double>(correct) / static_cast<double>(data.size());
}

// ---------------------------------------------------------------------------
// Fourier heat map

std::vector<double> HeatMapGrid::full() const {
    const std::size_t h = image_height, w = image_width;
    std::vector<double> out(h * w, 0.0);
    for (std::size_t i = 0; i < h; ++i)
        for (std::size_t j = 0; j < w; ++j) {
            std::size_t ii = i, jj = j;
            if (j >= cols) {
                ii = (h - i) % h;
                jj = (w - j) % w;
            }
            if (ii < rows && jj < cols) out[i * w + j] = at(ii, jj);
        }
    return out;
}

std::vector<double> HeatMapGrid::centered() const {
    const auto f = full();
    const std::size_t h = image_height, w = image_width;
    std::vector<double> out(h * w);
    for (std::size_t i = 0; i < h; ++i)
        for (std::size_t j = 0; j < w; ++j) out[((i + h / 2) % h) * w + (j + w / 2) % w] = f[i * w + j];
    return out;
}

int centered_frequency(std::size_t i, std::size_t n) {
    const auto k = static_cast<int>(i % n);
    return k > static_cast<int>(n / 2) ? k - static_cast<int>(n) : k;
}

std::vector<double> fourier_basis(std::size_t i, std::size_t j, std::size_t height, std::size_t width) {
    if (i >= height || j >= width) throw DimensionError("fourier_basis: frequency outside the image spectrum");
    const double two_pi = 2.0 * std::numbers::pi;
    std::vector<double> u(height * width);
    double norm = 0.0;
    for (std::size_t y = 0; y < height; ++y)
        for (std::size_t x = 0; x < width; ++x) {
            const double v = std::cos(two_pi * (static_cast<double>(i * y) / static_cast<double>(height) +
                                                static_cast<double>(j * x) / static_cast<double>(width)));
            u[y * width + x] = v;
            norm += v * v;
        }
    norm = std::sqrt(norm);
    for (auto& v : u) v /= norm;
    return u;
}

HeatMapGrid fourier_heat_map(Classifier& model, const Dataset& data, const HeatMapOptions& options) {
    if (!(options.eps_f > 0.0)) throw ConfigError("heatmap.eps_f must be > 0");
    if (options.samples_per_cell == 0) throw ConfigError("heatmap.samples_per_cell must be >= 1");
    if (data.size() == 0) throw InputError("fourier_heat_map: dataset is empty");
    const std::size_t h = data.height, w = data.width, c = data.channels;
    const std::size_t max_rows = h, max_cols = w / 2 + 1;
    HeatMapGrid grid;
    grid.rows = options.rows ? options.rows : max_rows;
    grid.cols = options.cols ? options.cols : max_cols;
    if (grid.rows > max_rows || grid.cols > max_cols)
        throw DimensionError("fourier_heat_map: grid " + std::to_string(grid.rows) + "x" + std::to_string(grid.cols) +
                             " exceeds the half spectrum " + std::to_string(max_rows) + "x" +
                             std::to_string(max_cols));
    grid.image_height = h;
    grid.image_width = w;
    grid.eps_f = options.eps_f;
    grid.samples_per_cell = options.samples_per_cell;
    grid.error.assign(grid.rows * grid.cols, 0.0);

    const std::size_t n = options.samples_per_cell;
    const std::size_t batch = std::max<std::size_t>(1, options.batch_size);
    const std::size_t plane = h * w;
    NoGradGuard no_grad;
    for (std::size_t i = 0; i < grid.rows; ++i)
        for (std::size_t j = 0; j < grid.cols; ++j) {
            const auto u = fourier_basis(i, j, h, w);
            // One stream per cell, so a cell's signs do not depend on the grid extent.
            std::mt19937_64 rng(options.seed ^ (0x9E3779B97F4A7C15ULL * (i * max_cols + j + 1)));
            std::bernoulli_distribution coin(0.5);
            std::size_t wrong = 0;
            for (std::size_t begin = 0; begin < n; begin += batch) {
                const std::size_t count = std::min(batch, n - begin);
                std::vector<std::size_t> idx(count);
                for (std::size_t k = 0; k < count; ++k) idx[k] = (begin + k) % data.size();
                Tensor x = data.batch(idx);
                auto v = x.data();
                for (std::size_t s = 0; s < count; ++s)
                    for (std::size_t ch = 0; ch < c; ++ch) {
                        const double sign = coin(rng) ? 1.0 : -1.0;
                        float* p = v.data() + (s * c + ch) * plane;
                        for (std::size_t k = 0; k < plane; ++k)
                            p[k] = static_cast<float>(std::clamp(p[k] + sign * options.eps_f * u[k], 0.0, 1.0));
                    }
                const auto pred = argmax_rows(model.logits(x));
                const auto y = data.batch_labels(idx);
                for (std::size_t s = 0; s < count; ++s) wrong += pred[s] != y[s];
            }
            grid.error[i * grid.cols + j] = static_cast<double>(wrong) / static_cast<double>(n);
        }
    return grid;
}

// ---------------------------------------------------------------------------
// Grad-CAM

GradCam gradcam(FeatureClassifier& model, const Tensor& x, int class_id) {
    if (x.rank() != 4 || x.dim(0) != 1) throw DimensionError("gradcam: expected one image [1,C,H,W], got " + shape_string(x.shape()));
    if (class_id < 0 || static_cast<std::size_t>(class_id) >= model.num_classes())
        throw InputError("gradcam: class " + std::to_string(class_id) + " outside [0," +
                         std::to_string(model.num_classes()) + ")");

    Tensor features;
    {
        NoGradGuard no_grad;
        features = model.trace(x).features;
    }
    if (features.rank() != 4) throw DimensionError("gradcam: feature grid must be [1,K,h,w]");
    Tensor leaf = features.detach();
    leaf.set_requires_grad(true);

    // Parameters stay untouched: only the feature leaf collects a gradient.
    std::vector<std::pair<Tensor, bool>> saved;
    for (auto& t : model.trainable_tensors()) {
        saved.emplace_back(t, t.requires_grad());
        t.set_requires_grad(false);
    }
    const Tensor logits = model.head(leaf);
    std::vector<float> pick(logits.size(), 0.0f);
    pick[static_cast<std::size_t>(class_id)] = 1.0f;
    backward(weighted_sum(logits, pick));
    for (auto& [t, on] : saved) t.set_requires_grad(on);

    const std::size_t k = leaf.dim(1), h = leaf.dim(2), w = leaf.dim(3), hw = h * w;
    GradCam out;
    out.height = h;
    out.width = w;
    out.alpha.assign(k, 0.0);
    const auto g = leaf.grad();
    for (std::size_t ch = 0; ch < k; ++ch) {
        double s = 0.0;
        for (std::size_t p = 0; p < hw; ++p) s += g[ch * hw + p];
        out.alpha[ch] = s / static_cast<double>(hw);
    }
    std::vector<double> cam(hw, 0.0);
    for (std::size_t ch = 0; ch < k; ++ch)
        for (std::size_t p = 0; p < hw; ++p) cam[p] += out.alpha[ch] * leaf[ch * hw + p];
    for (auto& v : cam) v = std::max(v, 0.0);
    const auto [lo, hi] = std::minmax_element(cam.begin(), cam.end());
    const double range = *hi - *lo;
    out.map.resize(hw);
    for (std::size_t p = 0; p < hw; ++p)
        out.map[p] = range > 0.0 ? static_cast<float>((cam[p] - *lo) / range) : 0.0f;
    return out;
}

// ---------------------------------------------------------------------------
// Regularity checks

MotherWavelet::MotherWavelet(const std::string& base, int cascade_levels) : base_(base) {
    if (base == "haar") return;  // closed form
    if (cascade_levels < 1 || cascade_levels > 20) throw ConfigError("cascade levels must lie in [1,20]");
    const FilterBank fb = filter_bank(base);
    // psi(k / 2^J) ~ 2^{J/2} x_J[k], where x_1 = hi_s and each further level
    // scatters through lo_s.
    auto upsample = [](const std::vector<double>& v, const Eigen::VectorXd& f) {
        const auto taps = static_cast<std::size_t>(f.size());
        std::vector<double> out(2 * (v.size() - 1) + taps, 0.0);
        for (std::size_t k = 0; k < v.size(); ++k)
            for (std::size_t n = 0; n < taps; ++n) out[2 * k + n] += f[static_cast<Eigen::Index>(n)] * v[k];
        return out;
    };
    std::vector<double> x = upsample({1.0}, fb.hi_s);
    for (int level = 1; level < cascade_levels; ++level) x = upsample(x, fb.lo_s);
    const double scale = std::pow(2.0, cascade_levels / 2.0);
    for (auto& v : x) v *= scale;
    samples_ = std::move(x);
    step_ = std::pow(2.0, -cascade_levels);
    support_ = static_cast<double>(fb.lo_s.size() - 1);
}

double MotherWavelet::operator()(double t) const {
    if (samples_.empty()) {
        if (t < 0.0 || t >= 1.0) return 0.0;
        return t < 0.5 ? 1.0 : -1.0;
    }
    if (t < 0.0 || t >= support_) return 0.0;
    const double pos = t / step_;
    const auto k = static_cast<std::size_t>(pos);
    if (k + 1 >= samples_.size()) return samples_.back();
    const double frac = pos - static_cast<double>(k);
    return (1.0 - frac) * samples_[k] + frac * samples_[k + 1];
}

namespace {

double probe_value(const ProbeSpec& probe, double x) {
    if (probe.kind == ProbeKind::sine) return std::sin(2.0 * std::numbers::pi * x);
    return std::pow(std::abs(x - probe.center), probe.alpha);
}

void check_alpha(double alpha) {
    if (!(alpha > 0.0 && alpha <= 1.0)) throw ConfigError("Hoelder exponent must lie in (0,1]");
}

double fit_slope(const std::vector<double>& xs, const std::vector<double>& ys) {
    const double n = static_cast<double>(xs.size());
    const double mx = std::accumulate(xs.begin(), xs.end(), 0.0) / n;
    const double my = std::accumulate(ys.begin(), ys.end(), 0.0) / n;
    double sxy = 0.0, sxx = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        sxy += (xs[i] - mx) * (ys[i] - my);
        sxx += (xs[i] - mx) * (xs[i] - mx);
    }
    return sxy / sxx;
}

double median(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const std::size_t m = v.size() / 2;
    return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

}  // namespace

double wavelet_coefficient(const MotherWavelet& psi, const ProbeSpec& probe, double a, double b, std::size_t grid) {
    if (!(a > 0.0)) throw ConfigError("wavelet scale must be > 0");
    if (grid == 0) throw ConfigError("quadrature grid must be >= 1");
    const double lo = b, hi = b + a * psi.support();
    if (lo < 0.0 || hi > 1.0)
        throw ConfigError("wavelet support [" + std::to_string(lo) + ", " + std::to_string(hi) + "] leaves [0,1]");
    const double h = 1.0 / static_cast<double>(grid);
    // Midpoints (k + 1/2) h inside [lo, hi).
    const auto first = static_cast<std::size_t>(std::max(0.0, std::ceil(lo / h - 0.5)));
    const auto last = std::min(grid, static_cast<std::size_t>(std::max(0.0, std::ceil(hi / h - 0.5))));
    const std::size_t count = last > first ? last - first : 0;
    if (count < 16)
        throw ResolutionError("quadrature grid of " + std::to_string(grid) + " points leaves " +
                              std::to_string(count) + " samples under the support at scale " + std::to_string(a) +
                              " (need 16)");
    double s = 0.0;
    for (std::size_t k = first; k < last; ++k) {
        const double x = (static_cast<double>(k) + 0.5) * h;
        s += probe_value(probe, x) * psi((x - b) / a);
    }
    return s * h / std::sqrt(a);
}

DecayFit theorem_decay_check(const std::string& base, const ProbeSpec& probe, std::vector<double> scales, double b,
                             const QuadratureOptions& options) {
    if (probe.kind == ProbeKind::holder) check_alpha(probe.alpha);
    if (scales.size() < 2) throw ConfigError("decay fit needs at least two scales");
    for (double a : scales)
        if (!(a > 0.0)) throw ConfigError("scales must be positive");
    std::sort(scales.begin(), scales.end(), std::greater<>());
    if (std::adjacent_find(scales.begin(), scales.end()) != scales.end())
        throw ConfigError("scales must be distinct");

    const MotherWavelet psi(base, options.cascade_levels);
    DecayFit fit;
    fit.base = base;
    fit.alpha = probe.kind == ProbeKind::holder ? probe.alpha : 1.0;
    fit.theoretical_slope = fit.alpha + 0.5;
    fit.scales = scales;
    std::vector<double> lx, ly;
    for (double a : scales) {
        const double c = std::abs(wavelet_coefficient(psi, probe, a, b, options.grid));
        fit.coefficients.push_back(c);
        if (!(c > 0.0)) throw NumericError("wavelet coefficient vanished at scale " + std::to_string(a));
        lx.push_back(std::log(a));
        ly.push_back(std::log(c));
    }
    fit.fitted_slope = fit_slope(lx, ly);
    return fit;
}

LocalRegularityReport theorem_local_regularity_check(const std::string& base, double alpha, double x0,
                                                     const std::vector<double>& offsets,
                                                     const std::vector<double>& scales,
                                                     const QuadratureOptions& options) {
    check_alpha(alpha);
    if (offsets.empty() || scales.empty()) throw ConfigError("local regularity check needs offsets and scales");
    const MotherWavelet psi(base, options.cascade_levels);
    const ProbeSpec probe{ProbeKind::holder, alpha, x0};
    LocalRegularityReport report;

    for (int refinement = 0; refinement < 3; ++refinement) {
        const std::size_t grid = options.grid << refinement;
        std::vector<double> ratios, log_ratios;
        for (double a : scales)
            for (double b : offsets) {
                const double c = std::abs(wavelet_coefficient(psi, probe, a, x0 + b, grid));
                const double ab = std::abs(b);
                ratios.push_back(c / (std::sqrt(a) * (std::pow(a, alpha) + std::pow(ab, alpha))));
                // The logarithmic refinement is only meaningful for 0 < |b| < 1.
                if (ab > 0.0 && ab < 1.0)
                    log_ratios.push_back(c / (std::sqrt(a) * (std::pow(a, alpha) + std::pow(ab, alpha) / std::abs(std::log(ab)))));
            }
        report.grids.push_back(grid);
        report.max_ratio.push_back(*std::max_element(ratios.begin(), ratios.end()));
        report.median_ratio.push_back(median(ratios));
        report.max_log_ratio.push_back(log_ratios.empty() ? 0.0 : *std::max_element(log_ratios.begin(), log_ratios.end()));
    }
    bool bounded = true;
    for (std::size_t r = 0; r < report.grids.size(); ++r) {
        if (!std::isfinite(report.max_ratio[r]) || report.max_ratio[r] > 10.0 * report.median_ratio[r]) bounded = false;
        const double drift = report.max_ratio[r] / report.max_ratio[0];
        if (!(drift > 0.1 && drift < 10.0)) bounded = false;
    }
    report.ratio_bounded = bounded;

    // Dyadic modulus on the finest grid, over points of [0,1] with x + delta in [0,1].
    const std::size_t grid = report.grids.back();
    const double h = 1.0 / static_cast<double>(grid);
    for (int j = 2; j <= 10; ++j) {
        const double delta = std::ldexp(1.0, -j);
        const auto shift = static_cast<std::size_t>(std::llround(delta / h));
        double omega = 0.0;
        for (std::size_t k = 0; k + shift < grid; ++k) {
            const double x = static_cast<double>(k) * h;
            omega = std::max(omega, std::abs(probe_value(probe, x) - probe_value(probe, x + delta)));
        }
        report.deltas.push_back(delta);
        report.modulus.push_back(omega);
        report.modulus_constants.push_back(omega / std::pow(delta, alpha));
    }
    bool halves = true;
    const double expected = std::pow(2.0, -alpha);
    for (std::size_t i = 1; i < report.modulus.size(); ++i) {
        const double r = report.modulus[i] / report.modulus[i - 1];
        report.halving_ratios.push_back(r);
        if (std::abs(r - expected) > 0.2 * expected) halves = false;
    }
    report.dyadic_bound_holds = halves;
    return report;
}

}  // namespace wavreg
