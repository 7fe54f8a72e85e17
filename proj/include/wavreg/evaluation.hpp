#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "wavreg/attacks.hpp"
#include "wavreg/data.hpp"
#include "wavreg/model.hpp"

namespace wavreg {

// Fraction of samples whose prediction equals the label, after the given
// white-box attack (AttackKind::none = clean accuracy).
double accuracy(Classifier& model, const Dataset& data, AttackKind kind = AttackKind::none,
                const AttackConfig& attack = {}, std::size_t batch_size = 100);

// ---------------------------------------------------------------------------
// Fourier heat map

// Error rates over the half spectrum: rows index the vertical frequency
// 0..H-1, columns the horizontal frequency 0..W/2. The remaining columns
// follow from conjugate symmetry.
struct HeatMapGrid {
    std::size_t rows = 0, cols = 0;
    std::size_t image_height = 0, image_width = 0;
    std::vector<double> error;  // rows * cols
    double eps_f = 0.0;
    std::size_t samples_per_cell = 0;

    double at(std::size_t i, std::size_t j) const { return error[i * cols + j]; }
    // Full H x W map with error(i, j) = error(-i mod H, -j mod W).
    std::vector<double> full() const;
    // Same grid with the zero frequency moved to the centre.
    std::vector<double> centered() const;
};

struct HeatMapOptions {
    double eps_f = 4.0;
    std::size_t samples_per_cell = 100;
    std::uint64_t seed = 0;
    // Restrict to the first rows x cols cells; 0 = the whole half spectrum.
    std::size_t rows = 0, cols = 0;
    std::size_t batch_size = 100;
};

// Signed frequency of DFT index i on an axis of length n, in (-n/2, n/2].
int centered_frequency(std::size_t i, std::size_t n);

// Real H x W image cos(2 pi (i y / H + j x / W)) scaled to unit L2 norm; its
// spectrum sits at (i, j) and the conjugate point.
std::vector<double> fourier_basis(std::size_t i, std::size_t j, std::size_t height, std::size_t width);

// Each cell perturbs samples_per_cell images (the first ones of `data`) by
// x +/- eps_f * U_ij per channel with an independent random sign, clamps to
// [0,1], and records the misclassification rate.
HeatMapGrid fourier_heat_map(Classifier& model, const Dataset& data, const HeatMapOptions& options = {});

// ---------------------------------------------------------------------------
// Grad-CAM

struct GradCam {
    std::size_t height = 0, width = 0;
    std::vector<float> map;    // height * width, in [0,1]
    std::vector<double> alpha; // one weight per feature channel
};

// alpha_k = spatial mean of d score_c / d A^k over the final feature grid;
// map = ReLU(sum_k alpha_k A^k), min-max normalised. `x` is one image
// [1,C,H,W]. Throws InputError for a class outside [0, num_classes).
GradCam gradcam(FeatureClassifier& model, const Tensor& x, int class_id);

// ---------------------------------------------------------------------------
// Wavelet regularity checks on 1-D probes

enum class ProbeKind { holder, sine };

struct ProbeSpec {
    ProbeKind kind = ProbeKind::holder;
    double alpha = 1.0;  // exponent of |x - b|^alpha
    double center = 0.5; // singularity location b
};

struct DecayFit {
    std::string base;
    double alpha = 0.0;
    std::vector<double> scales;        // strictly decreasing
    std::vector<double> coefficients;  // |<f, psi^{a,b}>|
    double fitted_slope = 0.0;
    double theoretical_slope = 0.0;    // alpha + 1/2
};

struct QuadratureOptions {
    std::size_t grid = std::size_t{1} << 16;  // points on [0,1]
    int cascade_levels = 12;                  // for bases without closed form psi
};

// Sampled mother wavelet psi(t) on its support [0, support()).
class MotherWavelet {
public:
    explicit MotherWavelet(const std::string& base, int cascade_levels = 12);
    double operator()(double t) const;
    double support() const { return support_; }
    const std::string& base() const { return base_; }

private:
    std::string base_;
    double support_ = 1.0;
    double step_ = 0.0;
    std::vector<double> samples_;  // empty for the closed-form Haar wavelet
};

// Coefficient <f, psi^{a,b}> with psi^{a,b}(x) = a^{-1/2} psi((x - b) / a),
// by the midpoint rule on `grid` points of [0,1]. Throws ResolutionError when
// fewer than 16 grid points fall under the support.
double wavelet_coefficient(const MotherWavelet& psi, const ProbeSpec& probe, double a, double b,
                           std::size_t grid);

// Fits log|<f, psi^{a,b}>| against log a by least squares.
DecayFit theorem_decay_check(const std::string& base, const ProbeSpec& probe, std::vector<double> scales,
                             double b, const QuadratureOptions& options = {});

struct LocalRegularityReport {
    std::vector<std::size_t> grids;       // quadrature sizes, each refinement doubles
    std::vector<double> max_ratio;        // per grid
    std::vector<double> median_ratio;     // per grid
    std::vector<double> max_log_ratio;    // log-refined bound, reported only
    bool ratio_bounded = false;
    // Dyadic modulus of continuity omega(2^-j) = max |f(x) - f(x + 2^-j)|.
    std::vector<double> deltas;
    std::vector<double> modulus;
    std::vector<double> modulus_constants;  // omega / delta^alpha
    std::vector<double> halving_ratios;     // omega(delta/2) / omega(delta)
    bool dyadic_bound_holds = false;
    bool holds() const { return ratio_bounded && dyadic_bound_holds; }
};

// Empirical ratio |<f, psi^{a, x0 + b}>| / (a^{1/2} (a^alpha + |b|^alpha)) over
// the (a, b) grid at the base quadrature size and two refinements; bounded
// when every per-grid maximum stays under 10x its median and the maxima agree
// across refinements within that factor. Also checks that the dyadic modulus
// halves like 2^-alpha within 20%.
LocalRegularityReport theorem_local_regularity_check(const std::string& base, double alpha, double x0,
                                                     const std::vector<double>& offsets,
                                                     const std::vector<double>& scales,
                                                     const QuadratureOptions& options = {});

}  // namespace wavreg
