#include "wavreg/wavelet.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <array>
#include <cmath>
#include <random>

#include "wavreg/errors.hpp"
#include "wavreg/ops.hpp"

namespace wavreg {

namespace {

constexpr std::array<std::string_view, 6> kBases = {"haar", "db5", "sym4", "coif4", "bior3.1", "rbio2.2"};

// Orthogonal scaling filters (synthesis lowpass, correlation form). The
// highpass follows from the quadrature-mirror relation.
const std::vector<double> kDb5 = {0.16010239797419293,  0.6038292697971896,    0.7243085284377729,
                                  0.13842814590132074,  -0.24229488706638203,  -0.032244869584638375,
                                  0.07757149384004572,  -0.006241490212798274, -0.012580751999081999,
                                  0.0033357252854737712};
const std::vector<double> kSym4 = {0.0322231006040427,  -0.012603967262037833, -0.09921954357684722,
                                   0.29785779560527736, 0.8037387518059161,    0.49761866763201545,
                                   -0.02963552764599851, -0.07576571478927333};
const std::vector<double> kCoif4 = {
    0.000892313902537003,   -0.001629492425226786,  -0.007346167936268051, 0.01606894713157503,
    0.02668230466960483,    -0.08126671024919373,   -0.05607731960356926,  0.41530842700068227,
    0.7822389344242826,     0.43438603311435653,    -0.06662747236681717,  -0.09622042453595264,
    0.03933442260558915,    0.02508225333794961,    -0.015211728187697211, -0.0056582838001308835,
    0.0037514346971460866,  0.0012665610789256603,  -0.0005890202246332165, -0.0002599743371222568,
    6.233885431278719e-05,  3.1229861599195265e-05, -3.259647940030751e-06, -1.7849909144933469e-06};

Eigen::VectorXd to_vector(const std::vector<double>& v, double factor = 1.0) {
    Eigen::VectorXd out(static_cast<Eigen::Index>(v.size()));
    for (std::size_t i = 0; i < v.size(); ++i) out[static_cast<Eigen::Index>(i)] = v[i] * factor;
    return out;
}

FilterBank orthogonal_bank(std::string name, const std::vector<double>& lowpass) {
    FilterBank fb;
    fb.name = std::move(name);
    fb.orthogonal = true;
    fb.lo_a = to_vector(lowpass);
    const Eigen::Index n = fb.lo_a.size();
    fb.hi_a.resize(n);
    for (Eigen::Index i = 0; i < n; ++i) fb.hi_a[i] = (i % 2 == 0 ? 1.0 : -1.0) * fb.lo_a[n - 1 - i];
    fb.lo_s = fb.lo_a;
    fb.hi_s = fb.hi_a;
    return fb;
}

FilterBank biorthogonal_bank(std::string name, const std::vector<double>& lo_a, const std::vector<double>& hi_a,
                             const std::vector<double>& lo_s, const std::vector<double>& hi_s, double lo_scale,
                             double hi_scale) {
    FilterBank fb;
    fb.name = std::move(name);
    fb.orthogonal = false;
    fb.lo_a = to_vector(lo_a, lo_scale);
    fb.hi_a = to_vector(hi_a, hi_scale);
    fb.lo_s = to_vector(lo_s, hi_scale);
    fb.hi_s = to_vector(hi_s, lo_scale);
    return fb;
}

FilterBank make_bank(std::string_view name) {
    const double r2 = std::sqrt(2.0);
    if (name == "haar") return orthogonal_bank("haar", {1.0 / r2, 1.0 / r2});
    if (name == "db5") return orthogonal_bank("db5", kDb5);
    if (name == "sym4") return orthogonal_bank("sym4", kSym4);
    if (name == "coif4") return orthogonal_bank("coif4", kCoif4);
    if (name == "bior3.1")
        // Four taps centred in an eight-tap frame (the catalog filter size).
        return biorthogonal_bank("bior3.1", {0, 0, -1, 3, 3, -1, 0, 0}, {0, 0, 1, -3, 3, -1, 0, 0},
                                 {0, 0, 1, 3, 3, 1, 0, 0}, {0, 0, -1, -3, 3, 1, 0, 0}, r2 / 4.0, r2 / 8.0);
    if (name == "rbio2.2")
        return biorthogonal_bank("rbio2.2", {0, 1, 2, 1, 0, 0}, {0, 1, 2, -6, 2, 1}, {-1, 2, 6, 2, -1, 0},
                                 {0, 0, 1, -2, 1, 0}, r2 / 4.0, r2 / 8.0);
    if (name == "dmey")
        throw UnsupportedBaseError("wavelet base 'dmey' is not supported: the discrete Meyer wavelet has infinite "
                                   "support and no finite filter bank");
    throw UnsupportedBaseError("unknown wavelet base '" + std::string(name) + "'");
}

// Periodic analysis (rows: LL half then HL half) and synthesis matrices of one
// 1-D level on a signal of length `len`.
Eigen::MatrixXd analysis_matrix(const Eigen::VectorXd& lo, const Eigen::VectorXd& hi, Eigen::Index len) {
    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(len, len);
    for (Eigen::Index k = 0; k < len / 2; ++k) {
        for (Eigen::Index n = 0; n < lo.size(); ++n) a(k, (2 * k + n) % len) += lo[n];
        for (Eigen::Index n = 0; n < hi.size(); ++n) a(len / 2 + k, (2 * k + n) % len) += hi[n];
    }
    return a;
}

}  // namespace

double FilterBankReport::worst() const {
    return std::max({lowpass_sum_error, highpass_sum_error, energy_error, shift_orthogonality_error,
                     reconstruction_error});
}

std::span<const std::string_view> supported_bases() { return kBases; }

FilterBankReport verify_filter_bank(const FilterBank& fb) {
    FilterBankReport r;
    r.lowpass_sum_error = std::abs(fb.lo_a.sum() - std::sqrt(2.0));
    r.highpass_sum_error = std::abs(fb.hi_a.sum());
    if (fb.orthogonal) {
        r.energy_error = std::abs(fb.lo_a.squaredNorm() - 1.0);
        const Eigen::Index n = fb.lo_a.size();
        for (Eigen::Index shift = 0; 2 * shift < n; ++shift) {
            double dot = 0.0;
            for (Eigen::Index i = 0; i + 2 * shift < n; ++i) dot += fb.lo_a[i] * fb.lo_a[i + 2 * shift];
            r.shift_orthogonality_error =
                std::max(r.shift_orthogonality_error, std::abs(dot - (shift == 0 ? 1.0 : 0.0)));
        }
    }
    // Period long enough that no tap wraps onto itself.
    const Eigen::Index taps = std::max({fb.lo_a.size(), fb.hi_a.size(), fb.lo_s.size(), fb.hi_s.size()});
    const Eigen::Index len = 2 * (taps + taps % 2);
    const Eigen::MatrixXd analysis = analysis_matrix(fb.lo_a, fb.hi_a, len);
    const Eigen::MatrixXd synthesis = analysis_matrix(fb.lo_s, fb.hi_s, len).transpose();
    r.reconstruction_error = (synthesis * analysis - Eigen::MatrixXd::Identity(len, len)).cwiseAbs().maxCoeff();
    return r;
}

FilterBank filter_bank(std::string_view name) {
    FilterBank fb = make_bank(name);
    const auto report = verify_filter_bank(fb);
    if (report.worst() > kFilterTolerance)
        throw NumericError("filter bank '" + fb.name + "' fails its identity checks (worst residual " +
                           std::to_string(report.worst()) + ")");
    return fb;
}

Eigen::VectorXd wap_filter(const FilterBank& fb) {
    Eigen::VectorXd g = Eigen::VectorXd::Zero(std::max(fb.lo_a.size(), fb.hi_a.size()));
    g.head(fb.lo_a.size()) += fb.lo_a;
    g.head(fb.hi_a.size()) += fb.hi_a;
    return g;
}

Eigen::VectorXd cascaded_lowpass(const FilterBank& fb, int levels) {
    if (levels < 1) throw ConfigError("cascaded_lowpass: levels must be >= 1");
    Eigen::VectorXd e = fb.lo_a;
    Eigen::Index stride = 2;
    for (int level = 1; level < levels; ++level, stride *= 2) {
        // e'[stride*m + n] += lo_a[m] * e[n]
        Eigen::VectorXd next = Eigen::VectorXd::Zero(stride * (fb.lo_a.size() - 1) + e.size());
        for (Eigen::Index m = 0; m < fb.lo_a.size(); ++m) next.segment(stride * m, e.size()) += fb.lo_a[m] * e;
        e = std::move(next);
    }
    return e;
}

// ---------------------------------------------------------------------------

namespace {

using PlaneF = Plane<float>;

void require_even_nchw(const Tensor& x, const char* op) {
    if (x.rank() != 4) throw DimensionError(std::string(op) + ": expected [N,C,H,W], got " + shape_string(x.shape()));
    if (x.dim(2) < 2 || x.dim(3) < 2 || x.dim(2) % 2 != 0 || x.dim(3) % 2 != 0)
        throw DimensionError(std::string(op) + ": spatial size must be even and >= 2, got " + shape_string(x.shape()));
}

}  // namespace

Tensor separable_analysis(const Tensor& x, const Eigen::VectorXd& width_filter, const Eigen::VectorXd& height_filter) {
    require_even_nchw(x, "dwt2d");
    const std::size_t n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
    const std::size_t oh = h / 2, ow = w / 2;
    const auto eh = static_cast<Eigen::Index>(h), ew = static_cast<Eigen::Index>(w);
    const auto eoh = static_cast<Eigen::Index>(oh), eow = static_cast<Eigen::Index>(ow);
    std::vector<float> out(n * c * oh * ow);
    for (std::size_t p = 0; p < n * c; ++p) {
        Eigen::Map<const PlaneF> in(x.data().data() + p * h * w, eh, ew);
        Eigen::Map<PlaneF>(out.data() + p * oh * ow, eoh, eow) = analyze(in, width_filter, height_filter);
    }
    return make_result({n, c, oh, ow}, std::move(out), {x},
                       [x, width_filter, height_filter, n, c, h, w, oh, ow](const Tensor& o) {
        if (!x.requires_grad()) return;
        Tensor xt = x;
        auto gx = xt.grad_buffer();
        const auto eh = static_cast<Eigen::Index>(h), ew = static_cast<Eigen::Index>(w);
        const auto eoh = static_cast<Eigen::Index>(oh), eow = static_cast<Eigen::Index>(ow);
        for (std::size_t p = 0; p < n * c; ++p) {
            Eigen::Map<const PlaneF> g(o.grad().data() + p * oh * ow, eoh, eow);
            Eigen::Map<PlaneF>(gx.data() + p * h * w, eh, ew) += scatter(g, width_filter, height_filter, eh, ew);
        }
    });
}

Tensor separable_scatter(const Tensor& y, const Eigen::VectorXd& width_filter, const Eigen::VectorXd& height_filter,
                         std::size_t h, std::size_t w) {
    if (y.rank() != 4 || y.dim(2) * 2 != h || y.dim(3) * 2 != w)
        throw DimensionError("idwt2d: subband " + shape_string(y.shape()) + " does not halve " + std::to_string(h) +
                             "x" + std::to_string(w));
    const std::size_t n = y.dim(0), c = y.dim(1), oh = y.dim(2), ow = y.dim(3);
    const auto eh = static_cast<Eigen::Index>(h), ew = static_cast<Eigen::Index>(w);
    const auto eoh = static_cast<Eigen::Index>(oh), eow = static_cast<Eigen::Index>(ow);
    std::vector<float> out(n * c * h * w);
    for (std::size_t p = 0; p < n * c; ++p) {
        Eigen::Map<const PlaneF> in(y.data().data() + p * oh * ow, eoh, eow);
        Eigen::Map<PlaneF>(out.data() + p * h * w, eh, ew) = scatter(in, width_filter, height_filter, eh, ew);
    }
    return make_result({n, c, h, w}, std::move(out), {y},
                       [y, width_filter, height_filter, n, c, h, w, oh, ow](const Tensor& o) {
        if (!y.requires_grad()) return;
        Tensor yt = y;
        auto gy = yt.grad_buffer();
        const auto eh = static_cast<Eigen::Index>(h), ew = static_cast<Eigen::Index>(w);
        const auto eoh = static_cast<Eigen::Index>(oh), eow = static_cast<Eigen::Index>(ow);
        for (std::size_t p = 0; p < n * c; ++p) {
            Eigen::Map<const PlaneF> g(o.grad().data() + p * h * w, eh, ew);
            Eigen::Map<PlaneF>(gy.data() + p * oh * ow, eoh, eow) += analyze(g, width_filter, height_filter);
        }
    });
}

SubbandSet dwt2d(const Tensor& x, const FilterBank& fb) {
    return {separable_analysis(x, fb.lo_a, fb.lo_a), separable_analysis(x, fb.hi_a, fb.lo_a),
            separable_analysis(x, fb.lo_a, fb.hi_a), separable_analysis(x, fb.hi_a, fb.hi_a)};
}

Tensor idwt2d(const SubbandSet& s, const FilterBank& fb) {
    for (const Tensor* t : {&s.lh, &s.hl, &s.hh})
        if (t->shape() != s.ll.shape())
            throw DimensionError("idwt2d: subband shapes differ: " + shape_string(s.ll.shape()) + " vs " +
                                 shape_string(t->shape()));
    if (s.ll.rank() != 4) throw DimensionError("idwt2d: expected [N,C,H,W] subbands, got " + shape_string(s.ll.shape()));
    const std::size_t h = 2 * s.ll.dim(2), w = 2 * s.ll.dim(3);
    Tensor x = separable_scatter(s.ll, fb.lo_s, fb.lo_s, h, w);
    x = add(x, separable_scatter(s.lh, fb.hi_s, fb.lo_s, h, w));
    x = add(x, separable_scatter(s.hl, fb.lo_s, fb.hi_s, h, w));
    return add(x, separable_scatter(s.hh, fb.hi_s, fb.hi_s, h, w));
}

Tensor wavelet_average_pool(const Tensor& x, const FilterBank& fb) {
    const Eigen::VectorXd g = wap_filter(fb);
    return scale(separable_analysis(x, g, g), 0.25f);
}

Tensor wavelet_low_pass_pool(const Tensor& x, const FilterBank& fb, bool match_wap_scale) {
    Tensor ll = separable_analysis(x, fb.lo_a, fb.lo_a);
    return match_wap_scale ? scale(ll, 0.5f) : ll;
}

MultilevelReport multilevel_consistency(const Tensor& x, const FilterBank& fb, int levels, double tolerance) {
    if (levels < 1) throw ConfigError("multilevel consistency: levels must be >= 1");
    if (x.rank() != 4) throw DimensionError("multilevel consistency: expected [N,C,H,W], got " + shape_string(x.shape()));
    const std::size_t block = std::size_t{1} << levels;
    if (x.dim(2) % block != 0 || x.dim(3) % block != 0)
        throw DimensionError("multilevel consistency: spatial size " + shape_string(x.shape()) +
                             " not divisible by 2^" + std::to_string(levels));
    NoGradGuard no_grad;
    const std::size_t n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
    const Eigen::VectorXd e = cascaded_lowpass(fb, levels);
    const auto stride = static_cast<Eigen::Index>(block);
    MultilevelReport report;
    for (std::size_t p = 0; p < n * c; ++p) {
        Plane<double> approx =
            Eigen::Map<const PlaneF>(x.data().data() + p * h * w, static_cast<Eigen::Index>(h), static_cast<Eigen::Index>(w))
                .cast<double>();
        const Plane<double> original = approx;
        for (int level = 0; level < levels; ++level) approx = analyze(approx, fb.lo_a, fb.lo_a);
        // Single pass with the cascaded filter at stride 2^levels.
        for (Eigen::Index k = 0; k < approx.rows(); ++k)
            for (Eigen::Index l = 0; l < approx.cols(); ++l) {
                double acc = 0.0;
                for (Eigen::Index i = 0; i < e.size(); ++i)
                    for (Eigen::Index j = 0; j < e.size(); ++j)
                        acc += e[i] * e[j] * original((stride * k + i) % original.rows(), (stride * l + j) % original.cols());
                report.max_abs_deviation = std::max(report.max_abs_deviation, std::abs(acc - approx(k, l)));
            }
    }
    report.consistent = report.max_abs_deviation <= tolerance;
    return report;
}

bool multilevel_consistency_check(const Tensor& x, const FilterBank& fb, int levels) {
    return multilevel_consistency(x, fb, levels).consistent;
}

double wap_lipschitz_constant(const FilterBank& fb, std::size_t size, int iterations, std::uint64_t seed) {
    if (size < 2 || size % 2 != 0) throw DimensionError("wap_lipschitz_constant: size must be even and >= 2");
    const auto n = static_cast<Eigen::Index>(size);
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal;
    Plane<double> v(n, n);
    for (Eigen::Index i = 0; i < v.size(); ++i) v.data()[i] = normal(rng);
    v /= v.norm();
    // WAP as the average of the four subbands; its adjoint scatters back
    // through the same analysis filters.
    auto forward = [&](const Plane<double>& x) {
        const auto s = dwt2(x, fb);
        return Plane<double>(0.25 * (s.ll + s.lh + s.hl + s.hh));
    };
    auto adjoint = [&](const Plane<double>& y) {
        Plane<double> x = scatter(y, fb.lo_a, fb.lo_a, n, n);
        x += scatter(y, fb.hi_a, fb.lo_a, n, n);
        x += scatter(y, fb.lo_a, fb.hi_a, n, n);
        x += scatter(y, fb.hi_a, fb.hi_a, n, n);
        return Plane<double>(0.25 * x);
    };
    double eigenvalue = 0.0;
    for (int it = 0; it < iterations; ++it) {
        Plane<double> next = adjoint(forward(v));
        eigenvalue = next.norm();
        if (eigenvalue == 0.0) return 0.0;
        v = next / eigenvalue;
    }
    return std::sqrt(eigenvalue);
}

}  // namespace wavreg
