#pragma once

#include <Eigen/Core>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "wavreg/tensor.hpp"

namespace wavreg {

// Analysis/synthesis filter quadruple of one wavelet base.
//
// Filters are stored in correlation form: one analysis level computes
//   y[k] = sum_n lo_a[n] * x[(2k + n) mod L]
// and synthesis scatters x[(2k + n) mod L] += lo_s[n] * y_lo[k] + hi_s[n] * y_hi[k].
// For orthogonal banks lo_s == lo_a and hi_s == hi_a.
struct FilterBank {
    std::string name;
    Eigen::VectorXd lo_a;
    Eigen::VectorXd hi_a;
    Eigen::VectorXd lo_s;
    Eigen::VectorXd hi_s;
    bool orthogonal = false;
};

// Residuals of the identities every bank is validated against on load.
struct FilterBankReport {
    double lowpass_sum_error = 0.0;   // |sum lo_a - sqrt(2)|
    double highpass_sum_error = 0.0;  // |sum hi_a|
    double energy_error = 0.0;        // |sum lo_a^2 - 1|, orthogonal banks only
    double shift_orthogonality_error = 0.0;  // max_k |<lo_a, lo_a shifted by 2k> - delta_k|, orthogonal only
    double reconstruction_error = 0.0;       // two-channel perfect-reconstruction residual
    double worst() const;
};

inline constexpr double kFilterTolerance = 1e-10;

// Identifiers accepted by filter_bank(), in catalog order.
std::span<const std::string_view> supported_bases();

// Throws UnsupportedBaseError for anything outside supported_bases() (dmey is
// rejected explicitly: it has infinite support).
FilterBank filter_bank(std::string_view name);

FilterBankReport verify_filter_bank(const FilterBank& fb);

// ---------------------------------------------------------------------------
// Plane kernels, templated on scalar. Accumulation is always in double.

template <typename Scalar>
using Plane = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// y[k,l] = sum_{i,j} height[i] * width[j] * x[(2k+i) mod H, (2l+j) mod W].
// Filtering runs along the width first, then along the height.
template <typename Derived>
Plane<typename Derived::Scalar> analyze(const Eigen::MatrixBase<Derived>& x, const Eigen::VectorXd& width_filter,
                                        const Eigen::VectorXd& height_filter) {
    using Scalar = typename Derived::Scalar;
    const Eigen::Index h = x.rows(), w = x.cols();
    const Eigen::Index oh = h / 2, ow = w / 2;
    Plane<double> rows = Plane<double>::Zero(h, ow);
    for (Eigen::Index r = 0; r < h; ++r)
        for (Eigen::Index l = 0; l < ow; ++l) {
            double acc = 0.0;
            for (Eigen::Index j = 0; j < width_filter.size(); ++j)
                acc += width_filter[j] * static_cast<double>(x(r, (2 * l + j) % w));
            rows(r, l) = acc;
        }
    Plane<Scalar> y(oh, ow);
    for (Eigen::Index k = 0; k < oh; ++k)
        for (Eigen::Index l = 0; l < ow; ++l) {
            double acc = 0.0;
            for (Eigen::Index i = 0; i < height_filter.size(); ++i) acc += height_filter[i] * rows((2 * k + i) % h, l);
            y(k, l) = static_cast<Scalar>(acc);
        }
    return y;
}

// Adjoint of analyze(): upsample by two and scatter through the filters.
// With synthesis filters this is one branch of the inverse transform.
template <typename Derived>
Plane<typename Derived::Scalar> scatter(const Eigen::MatrixBase<Derived>& y, const Eigen::VectorXd& width_filter,
                                        const Eigen::VectorXd& height_filter, Eigen::Index h, Eigen::Index w) {
    using Scalar = typename Derived::Scalar;
    const Eigen::Index oh = y.rows(), ow = y.cols();
    Plane<double> rows = Plane<double>::Zero(h, ow);
    for (Eigen::Index k = 0; k < oh; ++k)
        for (Eigen::Index i = 0; i < height_filter.size(); ++i)
            for (Eigen::Index l = 0; l < ow; ++l) rows((2 * k + i) % h, l) += height_filter[i] * static_cast<double>(y(k, l));
    Plane<double> x = Plane<double>::Zero(h, w);
    for (Eigen::Index r = 0; r < h; ++r)
        for (Eigen::Index l = 0; l < ow; ++l)
            for (Eigen::Index j = 0; j < width_filter.size(); ++j) x(r, (2 * l + j) % w) += width_filter[j] * rows(r, l);
    return x.template cast<Scalar>();
}

template <typename Scalar>
struct Subbands {
    Plane<Scalar> ll;  // approximation
    Plane<Scalar> lh;  // horizontal detail: lowpass vertical, highpass horizontal
    Plane<Scalar> hl;  // vertical detail: highpass vertical, lowpass horizontal
    Plane<Scalar> hh;  // diagonal detail
};

template <typename Derived>
Subbands<typename Derived::Scalar> dwt2(const Eigen::MatrixBase<Derived>& x, const FilterBank& fb) {
    return {analyze(x, fb.lo_a, fb.lo_a), analyze(x, fb.hi_a, fb.lo_a), analyze(x, fb.lo_a, fb.hi_a),
            analyze(x, fb.hi_a, fb.hi_a)};
}

template <typename Scalar>
Plane<Scalar> idwt2(const Subbands<Scalar>& s, const FilterBank& fb) {
    const Eigen::Index h = 2 * s.ll.rows(), w = 2 * s.ll.cols();
    Plane<double> x = scatter(s.ll.template cast<double>(), fb.lo_s, fb.lo_s, h, w);
    x += scatter(s.lh.template cast<double>(), fb.hi_s, fb.lo_s, h, w);
    x += scatter(s.hl.template cast<double>(), fb.lo_s, fb.hi_s, h, w);
    x += scatter(s.hh.template cast<double>(), fb.hi_s, fb.hi_s, h, w);
    return x.template cast<Scalar>();
}

// The combined filter lo_a + hi_a. WAP factors as one separable analysis with
// it on both axes, scaled by 0.25.
Eigen::VectorXd wap_filter(const FilterBank& fb);

// Equivalent single-pass lowpass filter of `levels` cascaded analysis steps,
// applied with stride 2^levels.
Eigen::VectorXd cascaded_lowpass(const FilterBank& fb, int levels);

// ---------------------------------------------------------------------------
// Differentiable tensor-level operations over [N,C,H,W].

struct SubbandSet {
    Tensor ll;
    Tensor lh;
    Tensor hl;
    Tensor hh;
};

// One separable periodic analysis step per plane; backward is the scatter.
Tensor separable_analysis(const Tensor& x, const Eigen::VectorXd& width_filter, const Eigen::VectorXd& height_filter);
// Upsample-and-filter to [N,C,h,w]; backward is the analysis.
Tensor separable_scatter(const Tensor& y, const Eigen::VectorXd& width_filter, const Eigen::VectorXd& height_filter,
                         std::size_t h, std::size_t w);

SubbandSet dwt2d(const Tensor& x, const FilterBank& fb);
Tensor idwt2d(const SubbandSet& s, const FilterBank& fb);

// 0.25 * (LL + LH + HL + HH): halves H and W.
Tensor wavelet_average_pool(const Tensor& x, const FilterBank& fb);

// LL only; optionally scaled by 0.5 to match WAP's magnitude on constants.
Tensor wavelet_low_pass_pool(const Tensor& x, const FilterBank& fb, bool match_wap_scale = false);

struct MultilevelReport {
    bool consistent = false;
    double max_abs_deviation = 0.0;
};

// Compares the level-`levels` approximation obtained by recursive dwt2d on LL
// with the one obtained by a single cascaded-filter pass.
MultilevelReport multilevel_consistency(const Tensor& x, const FilterBank& fb, int levels, double tolerance = 1e-5);
bool multilevel_consistency_check(const Tensor& x, const FilterBank& fb, int levels);

// Largest singular value of WAP on a size x size plane, by power iteration on
// WAP^T WAP.
double wap_lipschitz_constant(const FilterBank& fb, std::size_t size = 32, int iterations = 500,
                              std::uint64_t seed = 7);

}  // namespace wavreg
