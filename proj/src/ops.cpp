#include "wavreg/ops.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>

#include "wavreg/errors.hpp"

namespace wavreg {

namespace {

using MatrixXfR = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

Eigen::Map<const Eigen::ArrayXf> plane(const float* p, std::size_t n) {
    return Eigen::Map<const Eigen::ArrayXf>(p, static_cast<Eigen::Index>(n));
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
    if (a.shape() != b.shape())
        throw DimensionError(std::string(op) + ": shape mismatch " + shape_string(a.shape()) + " vs " +
                             shape_string(b.shape()));
}

void require_rank(const Tensor& x, std::size_t rank, const char* op) {
    if (x.rank() != rank)
        throw DimensionError(std::string(op) + ": expected rank " + std::to_string(rank) + ", got " +
                             shape_string(x.shape()));
}

void check_labels(std::span<const int> labels, std::size_t n, std::size_t classes, const char* op) {
    if (labels.size() != n)
        throw DimensionError(std::string(op) + ": " + std::to_string(labels.size()) + " labels for batch of " +
                             std::to_string(n));
    for (int y : labels)
        if (y < 0 || static_cast<std::size_t>(y) >= classes)
            throw InputError(std::string(op) + ": label " + std::to_string(y) + " outside [0," +
                             std::to_string(classes) + ")");
}

// Adds `delta` into t's gradient when t takes part in differentiation.
template <typename F>
void accumulate(Tensor t, F&& fill) {
    if (!t.requires_grad()) return;
    fill(t.grad_buffer());
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "add");
    std::vector<float> out(a.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] + b[i];
    return make_result(a.shape(), std::move(out), {a, b}, [a, b](const Tensor& o) {
        const auto g = o.grad();
        accumulate(a, [&](std::span<float> ga) { for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += g[i]; });
        accumulate(b, [&](std::span<float> gb) { for (std::size_t i = 0; i < gb.size(); ++i) gb[i] += g[i]; });
    });
}

Tensor sub(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "sub");
    std::vector<float> out(a.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] - b[i];
    return make_result(a.shape(), std::move(out), {a, b}, [a, b](const Tensor& o) {
        const auto g = o.grad();
        accumulate(a, [&](std::span<float> ga) { for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += g[i]; });
        accumulate(b, [&](std::span<float> gb) { for (std::size_t i = 0; i < gb.size(); ++i) gb[i] -= g[i]; });
    });
}

Tensor mul(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "mul");
    std::vector<float> out(a.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] * b[i];
    return make_result(a.shape(), std::move(out), {a, b}, [a, b](const Tensor& o) {
        const auto g = o.grad();
        accumulate(a, [&](std::span<float> ga) { for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += g[i] * b[i]; });
        accumulate(b, [&](std::span<float> gb) { for (std::size_t i = 0; i < gb.size(); ++i) gb[i] += g[i] * a[i]; });
    });
}

Tensor scale(const Tensor& x, float factor) {
    std::vector<float> out(x.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] * factor;
    return make_result(x.shape(), std::move(out), {x}, [x, factor](const Tensor& o) {
        const auto g = o.grad();
        accumulate(x, [&](std::span<float> gx) { for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += g[i] * factor; });
    });
}

Tensor sum(const Tensor& x) {
    double acc = 0.0;
    for (float v : x.data()) acc += v;
    return make_result({1}, {static_cast<float>(acc)}, {x}, [x](const Tensor& o) {
        const float g = o.grad()[0];
        accumulate(x, [&](std::span<float> gx) { for (auto& v : gx) v += g; });
    });
}

Tensor mean(const Tensor& x) { return scale(sum(x), 1.0f / static_cast<float>(x.size())); }

Tensor weighted_sum(const Tensor& x, std::span<const float> weights) {
    if (weights.size() != x.size())
        throw DimensionError("weighted_sum: " + std::to_string(weights.size()) + " weights for tensor " +
                             shape_string(x.shape()));
    double acc = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) acc += static_cast<double>(x[i]) * weights[i];
    std::vector<float> w(weights.begin(), weights.end());
    return make_result({1}, {static_cast<float>(acc)}, {x}, [x, w = std::move(w)](const Tensor& o) {
        const float g = o.grad()[0];
        accumulate(x, [&](std::span<float> gx) { for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += g * w[i]; });
    });
}

Tensor reshape(const Tensor& x, Shape shape) {
    if (shape_size(shape) != x.size())
        throw DimensionError("reshape: cannot view " + shape_string(x.shape()) + " as " + shape_string(shape));
    std::vector<float> out(x.data().begin(), x.data().end());
    return make_result(std::move(shape), std::move(out), {x}, [x](const Tensor& o) {
        const auto g = o.grad();
        accumulate(x, [&](std::span<float> gx) { for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += g[i]; });
    });
}

Tensor relu(const Tensor& x) {
    std::vector<float> out(x.size());
    const float* xv = x.data().data();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = xv[i] > 0.0f ? xv[i] : 0.0f;
    return make_result(x.shape(), std::move(out), {x}, [x](const Tensor& o) {
        const float* g = o.grad().data();
        const float* xv = x.data().data();
        accumulate(x, [&](std::span<float> gx) {
            for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += xv[i] > 0.0f ? g[i] : 0.0f;
        });
    });
}

namespace {

struct ConvGeometry {
    std::size_t n, c, h, w, k, kh, kw, stride, pad, oh, ow;
    std::size_t patch() const { return c * kh * kw; }
    std::size_t positions() const { return oh * ow; }
};

// Unfolds sample `n` of x into a [C*kh*kw, OH*OW] column matrix.
// Samples [first, first + count) unfold into adjacent column blocks of `cols`.
void im2col(const float* x, const ConvGeometry& g, std::size_t first, std::size_t count, MatrixXfR& cols) {
    const std::size_t p = g.positions();
    cols.resize(static_cast<Eigen::Index>(g.patch()), static_cast<Eigen::Index>(count * p));
    for (std::size_t s = 0; s < count; ++s) {
        const float* sample = x + (first + s) * g.c * g.h * g.w;
        for (std::size_t c = 0; c < g.c; ++c)
            for (std::size_t i = 0; i < g.kh; ++i)
                for (std::size_t j = 0; j < g.kw; ++j) {
                    const auto row = static_cast<Eigen::Index>((c * g.kh + i) * g.kw + j);
                    const float* plane = sample + c * g.h * g.w;
                    float* dst = cols.row(row).data() + s * p;
                    // Output columns whose input column ox * stride + j - pad is inside [0, w).
                    const std::size_t lo = j >= g.pad ? 0 : (g.pad - j + g.stride - 1) / g.stride;
                    const std::size_t hi =
                        std::max(lo, std::min(g.ow, g.w + g.pad > j ? (g.w + g.pad - j - 1) / g.stride + 1 : 0));
                    for (std::size_t oy = 0; oy < g.oh; ++oy) {
                        const auto iy =
                            static_cast<std::ptrdiff_t>(oy * g.stride + i) - static_cast<std::ptrdiff_t>(g.pad);
                        float* line = dst + oy * g.ow;
                        if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(g.h)) {
                            std::fill(line, line + g.ow, 0.0f);
                            continue;
                        }
                        const float* src = plane + static_cast<std::size_t>(iy) * g.w;
                        for (std::size_t ox = 0; ox < lo; ++ox) line[ox] = 0.0f;
                        if (g.stride == 1) {
                            const float* from = src + (lo + j - g.pad);
                            std::copy(from, from + (hi - lo), line + lo);
                        } else {
                            for (std::size_t ox = lo; ox < hi; ++ox) line[ox] = src[ox * g.stride + j - g.pad];
                        }
                        for (std::size_t ox = hi; ox < g.ow; ++ox) line[ox] = 0.0f;
                    }
                }
    }
}

// Adjoint of im2col for one sample block of `cols`.
void col2im(const MatrixXfR& cols, const ConvGeometry& g, std::size_t s, double* dx) {
    const std::size_t p = g.positions();
    for (std::size_t c = 0; c < g.c; ++c)
        for (std::size_t i = 0; i < g.kh; ++i)
            for (std::size_t j = 0; j < g.kw; ++j) {
                const auto row = static_cast<Eigen::Index>((c * g.kh + i) * g.kw + j);
                const float* src = cols.row(row).data() + s * p;
                double* plane = dx + c * g.h * g.w;
                for (std::size_t oy = 0; oy < g.oh; ++oy) {
                    const auto iy = static_cast<std::ptrdiff_t>(oy * g.stride + i) - static_cast<std::ptrdiff_t>(g.pad);
                    if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(g.h)) continue;
                    double* dst = plane + static_cast<std::size_t>(iy) * g.w;
                    for (std::size_t ox = 0; ox < g.ow; ++ox) {
                        const auto ix =
                            static_cast<std::ptrdiff_t>(ox * g.stride + j) - static_cast<std::ptrdiff_t>(g.pad);
                        if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(g.w)) continue;
                        dst[ix] += src[oy * g.ow + ox];
                    }
                }
            }
}

// Samples per GEMM so the unfolded block stays around 4 MB.
std::size_t conv_chunk(const ConvGeometry& g) {
    const std::size_t per = g.patch() * g.positions();
    return std::clamp<std::size_t>((std::size_t{1} << 20) / std::max<std::size_t>(per, 1), 1, g.n);
}

}  // namespace

Tensor conv2d(const Tensor& x, const Tensor& weight, std::size_t stride, std::size_t padding) {
    require_rank(x, 4, "conv2d");
    require_rank(weight, 4, "conv2d");
    if (stride == 0) throw DimensionError("conv2d: stride must be >= 1");
    ConvGeometry g{x.dim(0), x.dim(1), x.dim(2), x.dim(3), weight.dim(0), weight.dim(2), weight.dim(3),
                   stride, padding, 0, 0};
    if (weight.dim(1) != g.c)
        throw DimensionError("conv2d: input has " + std::to_string(g.c) + " channels, weight expects " +
                             std::to_string(weight.dim(1)));
    if (g.kh > g.h + 2 * padding || g.kw > g.w + 2 * padding)
        throw DimensionError("conv2d: kernel " + shape_string(weight.shape()) + " larger than padded input " +
                             shape_string(x.shape()));
    g.oh = (g.h + 2 * padding - g.kh) / stride + 1;
    g.ow = (g.w + 2 * padding - g.kw) / stride + 1;

    const auto k = static_cast<Eigen::Index>(g.k);
    const auto patch = static_cast<Eigen::Index>(g.patch());
    const auto positions = static_cast<Eigen::Index>(g.positions());
    const MatrixXfR w = Eigen::Map<const MatrixXfR>(weight.data().data(), k, patch);
    const std::size_t chunk = conv_chunk(g);

    std::vector<float> out(g.n * g.k * g.positions());
    MatrixXfR cols, y;
    for (std::size_t first = 0; first < g.n; first += chunk) {
        const std::size_t count = std::min(chunk, g.n - first);
        im2col(x.data().data(), g, first, count, cols);
        y.noalias() = w * cols;
        for (std::size_t s = 0; s < count; ++s)
            Eigen::Map<MatrixXfR>(out.data() + (first + s) * g.k * g.positions(), k, positions) =
                y.middleCols(static_cast<Eigen::Index>(s) * positions, positions);
    }

    return make_result({g.n, g.k, g.oh, g.ow}, std::move(out), {x, weight}, [x, weight, g, chunk](const Tensor& o) {
        const auto k = static_cast<Eigen::Index>(g.k);
        const auto patch = static_cast<Eigen::Index>(g.patch());
        const auto positions = static_cast<Eigen::Index>(g.positions());
        const MatrixXfR w = Eigen::Map<const MatrixXfR>(weight.data().data(), k, patch);
        MatrixXfR dw = MatrixXfR::Zero(k, patch);
        MatrixXfR cols, dcols, dy;
        std::vector<double> dx(g.c * g.h * g.w);
        const auto grad = o.grad();
        for (std::size_t first = 0; first < g.n; first += chunk) {
            const std::size_t count = std::min(chunk, g.n - first);
            dy.resize(k, static_cast<Eigen::Index>(count) * positions);
            for (std::size_t s = 0; s < count; ++s)
                dy.middleCols(static_cast<Eigen::Index>(s) * positions, positions) =
                    Eigen::Map<const MatrixXfR>(grad.data() + (first + s) * g.k * g.positions(), k, positions)
                        ;
            if (weight.requires_grad()) {
                im2col(x.data().data(), g, first, count, cols);
                dw.noalias() += dy * cols.transpose();
            }
            if (x.requires_grad()) {
                dcols.noalias() = w.transpose() * dy;
                Tensor xt = x;
                for (std::size_t s = 0; s < count; ++s) {
                    std::fill(dx.begin(), dx.end(), 0.0);
                    col2im(dcols, g, s, dx.data());
                    auto gx = xt.grad_buffer().subspan((first + s) * dx.size(), dx.size());
                    for (std::size_t i = 0; i < dx.size(); ++i) gx[i] += static_cast<float>(dx[i]);
                }
            }
        }
        accumulate(weight, [&](std::span<float> gw) {
            Eigen::Map<MatrixXfR>(gw.data(), k, patch) += dw;
        });
    });
}

Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b) {
    require_rank(x, 2, "linear");
    require_rank(w, 2, "linear");
    require_rank(b, 1, "linear");
    const auto n = static_cast<Eigen::Index>(x.dim(0));
    const auto d = static_cast<Eigen::Index>(x.dim(1));
    const auto m = static_cast<Eigen::Index>(w.dim(1));
    if (w.dim(0) != x.dim(1) || b.dim(0) != w.dim(1))
        throw DimensionError("linear: incompatible shapes " + shape_string(x.shape()) + ", " +
                             shape_string(w.shape()) + ", " + shape_string(b.shape()));
    const Eigen::MatrixXd xd = Eigen::Map<const MatrixXfR>(x.data().data(), n, d).cast<double>();
    const Eigen::MatrixXd wd = Eigen::Map<const MatrixXfR>(w.data().data(), d, m).cast<double>();
    const Eigen::RowVectorXd bd = Eigen::Map<const Eigen::RowVectorXf>(b.data().data(), m).cast<double>();
    Eigen::MatrixXd y = xd * wd;
    y.rowwise() += bd;
    std::vector<float> out(static_cast<std::size_t>(n * m));
    Eigen::Map<MatrixXfR>(out.data(), n, m) = y.cast<float>();

    return make_result({x.dim(0), w.dim(1)}, std::move(out), {x, w, b}, [x, w, b, n, d, m](const Tensor& o) {
        const Eigen::MatrixXd dy = Eigen::Map<const MatrixXfR>(o.grad().data(), n, m).cast<double>();
        accumulate(x, [&](std::span<float> gx) {
            const Eigen::MatrixXd wd = Eigen::Map<const MatrixXfR>(w.data().data(), d, m).cast<double>();
            Eigen::Map<MatrixXfR>(gx.data(), n, d) += (dy * wd.transpose()).cast<float>();
        });
        accumulate(w, [&](std::span<float> gw) {
            const Eigen::MatrixXd xd = Eigen::Map<const MatrixXfR>(x.data().data(), n, d).cast<double>();
            Eigen::Map<MatrixXfR>(gw.data(), d, m) += (xd.transpose() * dy).cast<float>();
        });
        accumulate(b, [&](std::span<float> gb) {
            Eigen::Map<Eigen::RowVectorXf>(gb.data(), m) += dy.colwise().sum().cast<float>();
        });
    });
}

Tensor batch_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, BatchNormState& state, bool training) {
    if (x.rank() != 4 && x.rank() != 2)
        throw DimensionError("batch_norm: expected [N,C,H,W] or [N,C], got " + shape_string(x.shape()));
    const std::size_t n = x.dim(0), c = x.dim(1);
    const std::size_t hw = x.rank() == 4 ? x.dim(2) * x.dim(3) : 1;
    if (gamma.size() != c || beta.size() != c || state.running_mean.size() != c || state.running_var.size() != c)
        throw DimensionError("batch_norm: per-channel parameters must have " + std::to_string(c) + " entries");
    const double count = static_cast<double>(n * hw);
    if (training && count < 2) throw DimensionError("batch_norm: training mode needs more than one value per channel");

    const float* xv = x.data().data();
    std::vector<double> mu(c), inv_std(c);
    if (training) {
        std::vector<double> s(c, 0.0), ss(c, 0.0);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t ch = 0; ch < c; ++ch) {
                s[ch] += plane(xv + (i * c + ch) * hw, hw).cast<double>().sum();
            }
        for (std::size_t ch = 0; ch < c; ++ch) mu[ch] = s[ch] / count;
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t ch = 0; ch < c; ++ch) {
                ss[ch] += (plane(xv + (i * c + ch) * hw, hw).cast<double>() - mu[ch]).square().sum();
            }
        auto rm = state.running_mean.data();
        auto rv = state.running_var.data();
        for (std::size_t ch = 0; ch < c; ++ch) {
            inv_std[ch] = 1.0 / std::sqrt(ss[ch] / count + state.epsilon);
            rm[ch] = static_cast<float>((1.0 - state.momentum) * rm[ch] + state.momentum * mu[ch]);
            rv[ch] = static_cast<float>((1.0 - state.momentum) * rv[ch] + state.momentum * ss[ch] / (count - 1.0));
        }
    } else {
        for (std::size_t ch = 0; ch < c; ++ch) {
            mu[ch] = state.running_mean[ch];
            inv_std[ch] = 1.0 / std::sqrt(static_cast<double>(state.running_var[ch]) + state.epsilon);
        }
    }

    std::vector<float> out(x.size());
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t ch = 0; ch < c; ++ch) {
            const std::size_t base = (i * c + ch) * hw;
            const auto a = static_cast<float>(gamma[ch] * inv_std[ch]);
            const auto b = static_cast<float>(beta[ch] - gamma[ch] * inv_std[ch] * mu[ch]);
            Eigen::Map<Eigen::ArrayXf>(out.data() + base, static_cast<Eigen::Index>(hw)) = plane(xv + base, hw) * a + b;
        }

    return make_result(x.shape(), std::move(out), {x, gamma, beta},
                       [x, gamma, beta, mu, inv_std, n, c, hw, training, count](const Tensor& o) {
        const float* g = o.grad().data();
        const float* xv = x.data().data();
        std::vector<double> sum_g(c, 0.0), sum_gx(c, 0.0);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t ch = 0; ch < c; ++ch) {
                const std::size_t base = (i * c + ch) * hw;
                const auto gp = plane(g + base, hw).cast<double>();
                sum_g[ch] += gp.sum();
                sum_gx[ch] += (gp * (plane(xv + base, hw).cast<double>() - mu[ch])).sum() * inv_std[ch];
            }
        accumulate(gamma, [&](std::span<float> gg) { for (std::size_t ch = 0; ch < c; ++ch) gg[ch] += static_cast<float>(sum_gx[ch]); });
        accumulate(beta, [&](std::span<float> gb) { for (std::size_t ch = 0; ch < c; ++ch) gb[ch] += static_cast<float>(sum_g[ch]); });
        accumulate(x, [&](std::span<float> gx) {
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t ch = 0; ch < c; ++ch) {
                    const std::size_t base = (i * c + ch) * hw;
                    // dx = gamma * inv_std * (g - mean(g) - xhat * mean(g * xhat)), batch terms only in training.
                    const double scale = gamma[ch] * inv_std[ch];
                    const double mg = training ? sum_g[ch] / count : 0.0;
                    const double mgx = training ? sum_gx[ch] / count : 0.0;
                    const auto a = static_cast<float>(scale);
                    const auto b = static_cast<float>(scale * mgx * inv_std[ch]);
                    const auto off = static_cast<float>(-scale * mg + scale * mgx * inv_std[ch] * mu[ch]);
                    Eigen::Map<Eigen::ArrayXf>(gx.data() + base, static_cast<Eigen::Index>(hw)) +=
                        plane(g + base, hw) * a - plane(xv + base, hw) * b + off;
                }
        });
    });
}

Tensor avg_pool2d(const Tensor& x, std::size_t kernel) {
    require_rank(x, 4, "avg_pool2d");
    const std::size_t n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
    if (kernel == 0 || h % kernel != 0 || w % kernel != 0)
        throw DimensionError("avg_pool2d: kernel " + std::to_string(kernel) + " does not divide " +
                             shape_string(x.shape()));
    const std::size_t oh = h / kernel, ow = w / kernel;
    const double inv = 1.0 / static_cast<double>(kernel * kernel);
    std::vector<float> out(n * c * oh * ow);
    for (std::size_t p = 0; p < n * c; ++p)
        for (std::size_t i = 0; i < oh; ++i)
            for (std::size_t j = 0; j < ow; ++j) {
                double s = 0.0;
                for (std::size_t a = 0; a < kernel; ++a)
                    for (std::size_t b = 0; b < kernel; ++b) s += x[p * h * w + (i * kernel + a) * w + j * kernel + b];
                out[p * oh * ow + i * ow + j] = static_cast<float>(s * inv);
            }
    return make_result({n, c, oh, ow}, std::move(out), {x}, [x, n, c, h, w, oh, ow, kernel, inv](const Tensor& o) {
        const auto g = o.grad();
        accumulate(x, [&](std::span<float> gx) {
            for (std::size_t p = 0; p < n * c; ++p)
                for (std::size_t i = 0; i < oh; ++i)
                    for (std::size_t j = 0; j < ow; ++j) {
                        const auto v = static_cast<float>(g[p * oh * ow + i * ow + j] * inv);
                        for (std::size_t a = 0; a < kernel; ++a)
                            for (std::size_t b = 0; b < kernel; ++b) gx[p * h * w + (i * kernel + a) * w + j * kernel + b] += v;
                    }
        });
    });
}

Tensor subsample2d(const Tensor& x) {
    require_rank(x, 4, "subsample2d");
    const std::size_t n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
    if (h % 2 != 0 || w % 2 != 0) throw DimensionError("subsample2d: odd spatial size " + shape_string(x.shape()));
    const std::size_t oh = h / 2, ow = w / 2;
    std::vector<float> out(n * c * oh * ow);
    for (std::size_t p = 0; p < n * c; ++p)
        for (std::size_t i = 0; i < oh; ++i)
            for (std::size_t j = 0; j < ow; ++j) out[(p * oh + i) * ow + j] = x[p * h * w + 2 * i * w + 2 * j];
    return make_result({n, c, oh, ow}, std::move(out), {x}, [x, n, c, h, w, oh, ow](const Tensor& o) {
        const auto g = o.grad();
        accumulate(x, [&](std::span<float> gx) {
            for (std::size_t p = 0; p < n * c; ++p)
                for (std::size_t i = 0; i < oh; ++i)
                    for (std::size_t j = 0; j < ow; ++j) gx[p * h * w + 2 * i * w + 2 * j] += g[(p * oh + i) * ow + j];
        });
    });
}

Tensor softmax_cross_entropy(const Tensor& logits, std::span<const int> labels) {
    require_rank(logits, 2, "softmax_cross_entropy");
    const std::size_t n = logits.dim(0), classes = logits.dim(1);
    check_labels(labels, n, classes, "softmax_cross_entropy");
    std::vector<double> probs(n * classes);
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const float* z = logits.data().data() + i * classes;
        const double m = *std::max_element(z, z + classes);
        double s = 0.0;
        for (std::size_t c = 0; c < classes; ++c) s += std::exp(z[c] - m);
        const double lse = m + std::log(s);
        for (std::size_t c = 0; c < classes; ++c) probs[i * classes + c] = std::exp(z[c] - lse);
        total += lse - z[labels[static_cast<std::ptrdiff_t>(i)]];
    }
    std::vector<int> y(labels.begin(), labels.end());
    const double loss = total / static_cast<double>(n);
    if (!std::isfinite(loss)) throw NumericError("softmax_cross_entropy: non-finite loss");
    return make_result({1}, {static_cast<float>(loss)}, {logits},
                       [logits, probs = std::move(probs), y = std::move(y), n, classes](const Tensor& o) {
        const double g = o.grad()[0] / static_cast<double>(n);
        accumulate(logits, [&](std::span<float> gz) {
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t c = 0; c < classes; ++c) {
                    const double onehot = static_cast<int>(c) == y[i] ? 1.0 : 0.0;
                    gz[i * classes + c] += static_cast<float>(g * (probs[i * classes + c] - onehot));
                }
        });
    });
}

Tensor cw_margin(const Tensor& logits, std::span<const int> labels, float kappa) {
    require_rank(logits, 2, "cw_margin");
    const std::size_t n = logits.dim(0), classes = logits.dim(1);
    if (classes < 2) throw DimensionError("cw_margin: needs at least two classes");
    check_labels(labels, n, classes, "cw_margin");
    std::vector<float> out(n);
    std::vector<std::size_t> rival(n);
    std::vector<bool> active(n);
    for (std::size_t i = 0; i < n; ++i) {
        const float* z = logits.data().data() + i * classes;
        const auto y = static_cast<std::size_t>(labels[i]);
        std::size_t best = y == 0 ? 1 : 0;
        for (std::size_t c = 0; c < classes; ++c)
            if (c != y && z[c] > z[best]) best = c;
        rival[i] = best;
        const float margin = z[y] - z[best];
        active[i] = margin >= -kappa;
        out[i] = active[i] ? margin : -kappa;
    }
    std::vector<int> y(labels.begin(), labels.end());
    return make_result({n}, std::move(out), {logits},
                       [logits, rival = std::move(rival), active = std::move(active), y = std::move(y), n,
                        classes](const Tensor& o) {
        const auto g = o.grad();
        accumulate(logits, [&](std::span<float> gz) {
            for (std::size_t i = 0; i < n; ++i) {
                if (!active[i]) continue;
                gz[i * classes + static_cast<std::size_t>(y[i])] += g[i];
                gz[i * classes + rival[i]] -= g[i];
            }
        });
    });
}

std::vector<float> per_sample_cross_entropy(const Tensor& logits, std::span<const int> labels) {
    require_rank(logits, 2, "per_sample_cross_entropy");
    const std::size_t n = logits.dim(0), classes = logits.dim(1);
    check_labels(labels, n, classes, "per_sample_cross_entropy");
    std::vector<float> out(n);
    for (std::size_t i = 0; i < n; ++i) {
        const float* z = logits.data().data() + i * classes;
        const double m = *std::max_element(z, z + classes);
        double s = 0.0;
        for (std::size_t c = 0; c < classes; ++c) s += std::exp(z[c] - m);
        out[i] = static_cast<float>(m + std::log(s) - z[labels[i]]);
    }
    return out;
}

std::vector<int> argmax_rows(const Tensor& logits) {
    require_rank(logits, 2, "argmax_rows");
    const std::size_t n = logits.dim(0), classes = logits.dim(1);
    std::vector<int> out(n);
    for (std::size_t i = 0; i < n; ++i) {
        const float* z = logits.data().data() + i * classes;
        out[i] = static_cast<int>(std::max_element(z, z + classes) - z);
    }
    return out;
}

}  // namespace wavreg
