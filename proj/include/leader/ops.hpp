#pragma once

// Dense layer primitives. Every function is a pure function of its inputs.
// Matrix products and transcendental activations go through Eigen; all other
// reductions run in a fixed order so results are bit-reproducible.

#include <leader/tensor.hpp>

#include <Eigen/Core>
#include <unsupported/Eigen/SpecialFunctions>

#include <algorithm>
#include <limits>
#include <string>
#include <utility>

namespace leader::ops {

enum class Activation { gelu, sigmoid, linear };
enum class PoolMode { avg, max };
enum class Padding { valid, same };

inline constexpr float kLayerNormEps = 1e-6f;

namespace detail {

using RowMatrix = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMatrixMap = Eigen::Map<const RowMatrix>;
using MatrixMap = Eigen::Map<RowMatrix>;
using ArrayMap = Eigen::Map<Eigen::ArrayXf>;
using ConstArrayMap = Eigen::Map<const Eigen::ArrayXf>;

inline void require_same_shape(const Tensor& a, const Tensor& b, const char* what) {
    if (!a.same_shape(b)) {
        throw StructuralError(std::string(what) + ": shape mismatch " + a.shape_string() + " vs " + b.shape_string());
    }
}

}  // namespace detail

/// Dilated "same" cross-correlation with stride 1 and zero fill.
inline Tensor conv2d(const Tensor& x, const ConvKernel& k, std::size_t dilation = 1) {
    k.validate();
    if (dilation == 0) throw StructuralError("conv2d: dilation must be positive");
    if (k.in_channels != x.channels()) {
        throw StructuralError("conv2d: kernel expects " + std::to_string(k.in_channels) + " input channels, tensor has " +
                              std::to_string(x.channels()));
    }
    const auto h = static_cast<std::ptrdiff_t>(x.height());
    const auto w = static_cast<std::ptrdiff_t>(x.width());
    const auto cin = static_cast<std::ptrdiff_t>(k.in_channels);
    const auto cout = static_cast<std::ptrdiff_t>(k.out_channels);

    Tensor out(x.height(), x.width(), k.out_channels);
    detail::MatrixMap y(out.data(), h * w, cout);
    if (k.has_bias()) {
        y.rowwise() = Eigen::Map<const Eigen::RowVectorXf>(k.bias.data(), cout);
    } else {
        y.setZero();
    }

    if (k.size == 1) {
        detail::ConstMatrixMap xm(x.data(), h * w, cin);
        detail::ConstMatrixMap wm(k.weights.data(), cin, cout);
        y.noalias() += xm * wm;
        return out;
    }

    const auto ks = static_cast<std::ptrdiff_t>(k.size);
    const auto radius = ks / 2;
    const auto d = static_cast<std::ptrdiff_t>(dilation);
    // Row blocks are unrolled into patch matrices (im2col) so every block is one GEMM.
    const std::ptrdiff_t depth = ks * ks * cin;
    const std::ptrdiff_t rows_per_block = std::max<std::ptrdiff_t>(1, 4096 / w);
    detail::ConstMatrixMap wm(k.weights.data(), depth, cout);
    detail::RowMatrix patch(rows_per_block * w, depth);
    for (std::ptrdiff_t i0 = 0; i0 < h; i0 += rows_per_block) {
        const std::ptrdiff_t rows = std::min(rows_per_block, h - i0);
        patch.setZero();
        for (std::ptrdiff_t r = 0; r < rows; ++r) {
            for (std::ptrdiff_t ky = 0; ky < ks; ++ky) {
                const std::ptrdiff_t src = i0 + r + (ky - radius) * d;
                if (src < 0 || src >= h) continue;
                for (std::ptrdiff_t kx = 0; kx < ks; ++kx) {
                    const std::ptrdiff_t dx = (kx - radius) * d;
                    const std::ptrdiff_t j0 = std::max<std::ptrdiff_t>(0, -dx);
                    const std::ptrdiff_t j1 = std::min<std::ptrdiff_t>(w, w - dx);
                    const std::ptrdiff_t col = (ky * ks + kx) * cin;
                    for (std::ptrdiff_t j = j0; j < j1; ++j) {
                        const float* s = x.data() + (src * w + j + dx) * cin;
                        std::copy(s, s + cin, patch.data() + (r * w + j) * depth + col);
                    }
                }
            }
        }
        y.middleRows(i0 * w, rows * w).noalias() += patch.topRows(rows * w) * wm;
    }
    return out;
}

/// Per-channel "same" convolution without bias.
inline Tensor depthwise_conv2d(const Tensor& x, const DepthwiseKernel& k) {
    k.validate();
    if (k.channels != x.channels()) {
        throw StructuralError("depthwise_conv2d: kernel has " + std::to_string(k.channels) + " filters, tensor has " +
                              std::to_string(x.channels()) + " channels");
    }
    const auto h = static_cast<std::ptrdiff_t>(x.height());
    const auto w = static_cast<std::ptrdiff_t>(x.width());
    const std::size_t c = x.channels();
    const auto radius = static_cast<std::ptrdiff_t>(k.size / 2);

    // Each tap is one multiply-add over a contiguous row span against the
    // tap weights tiled to the row length.
    const auto ks = static_cast<std::ptrdiff_t>(k.size);
    const auto row = static_cast<Eigen::Index>(w) * static_cast<Eigen::Index>(c);
    Eigen::ArrayXXf tiled(row, ks * ks);
    for (std::ptrdiff_t t = 0; t < ks * ks; ++t) {
        for (std::ptrdiff_t j = 0; j < w; ++j) {
            std::copy_n(k.weights.data() + t * c, c, tiled.col(t).data() + j * c);
        }
    }
    Tensor out(x.height(), x.width(), c);
    const auto cs = static_cast<std::ptrdiff_t>(c);
    for (std::ptrdiff_t i = 0; i < h; ++i) {
        for (std::ptrdiff_t ky = 0; ky < ks; ++ky) {
            const std::ptrdiff_t src = i + ky - radius;
            if (src < 0 || src >= h) continue;
            for (std::ptrdiff_t kx = 0; kx < ks; ++kx) {
                const std::ptrdiff_t dx = kx - radius;
                const std::ptrdiff_t j0 = std::max<std::ptrdiff_t>(0, -dx);
                const std::ptrdiff_t j1 = std::min<std::ptrdiff_t>(w, w - dx);
                const Eigen::Index n = (j1 - j0) * cs;
                detail::ArrayMap dst(out.data() + (i * w + j0) * cs, n);
                detail::ConstArrayMap sx(x.data() + (src * w + j0 + dx) * cs, n);
                dst += sx * tiled.col(ky * ks + kx).segment(j0 * cs, n);
            }
        }
    }
    return out;
}

/// Standardizes each pixel's channel vector, then scales by gamma and shifts by beta.
inline Tensor layer_norm(const Tensor& x, std::span<const float> gamma, std::span<const float> beta,
                         float eps = kLayerNormEps) {
    if (gamma.size() != x.channels() || beta.size() != x.channels()) {
        throw StructuralError("layer_norm: gamma/beta length must equal channel count " + std::to_string(x.channels()));
    }
    if (!(eps > 0.0f)) throw StructuralError("layer_norm: eps must be positive");

    Tensor out(x.height(), x.width(), x.channels());
    const std::size_t c = x.channels();
    const double inv_c = 1.0 / static_cast<double>(c);
    for (std::size_t p = 0; p < x.pixels(); ++p) {
        const float* v = x.data() + p * c;
        // Eight fixed accumulator lanes: vectorizable and order-stable.
        double acc[8] = {};
        std::size_t ch = 0;
        for (; ch + 8 <= c; ch += 8)
            for (std::size_t l = 0; l < 8; ++l) acc[l] += v[ch + l];
        double mean = ((acc[0] + acc[4]) + (acc[1] + acc[5])) + ((acc[2] + acc[6]) + (acc[3] + acc[7]));
        for (; ch < c; ++ch) mean += v[ch];
        mean *= inv_c;

        double sq[8] = {};
        ch = 0;
        for (; ch + 8 <= c; ch += 8) {
            for (std::size_t l = 0; l < 8; ++l) {
                const double dv = v[ch + l] - mean;
                sq[l] += dv * dv;
            }
        }
        double var = ((sq[0] + sq[4]) + (sq[1] + sq[5])) + ((sq[2] + sq[6]) + (sq[3] + sq[7]));
        for (; ch < c; ++ch) {
            const double dv = v[ch] - mean;
            var += dv * dv;
        }
        var *= inv_c;

        const double inv = 1.0 / std::sqrt(var + static_cast<double>(eps));
        float* o = out.data() + p * c;
        for (std::size_t k = 0; k < c; ++k) o[k] = static_cast<float>((v[k] - mean) * inv) * gamma[k] + beta[k];
    }
    return out;
}

/// Elementwise activation. GELU uses the exact erf form. Sigmoid results are
/// kept strictly inside (0, 1) even where float rounding would saturate.
inline Tensor activation(const Tensor& x, Activation kind) {
    Tensor out = x;
    detail::ArrayMap y(out.data(), static_cast<Eigen::Index>(out.size()));
    detail::ConstArrayMap a(x.data(), static_cast<Eigen::Index>(x.size()));
    switch (kind) {
        case Activation::gelu:
            y = 0.5f * a * (1.0f + (a * 0.70710678118654752f).erf());
            break;
        case Activation::sigmoid: {
            constexpr float lo = std::numeric_limits<float>::min();
            const float hi = std::nextafter(1.0f, 0.0f);
            y = a.logistic().max(lo).min(hi);
            break;
        }
        case Activation::linear:
            break;
    }
    return out;
}

/// Output extent of one spatial axis.
inline std::size_t pooled_extent(std::size_t extent, std::size_t size, std::size_t stride, Padding padding) {
    if (padding == Padding::same) return (extent + stride - 1) / stride;
    if (extent < size) {
        throw StructuralError("pool2d: valid pooling window " + std::to_string(size) + " exceeds extent " +
                              std::to_string(extent));
    }
    return (extent - size) / stride + 1;
}

/// Spatial pooling. Same padding ignores out-of-bounds taps: max treats them
/// as -inf, avg divides by the in-bounds count.
inline Tensor pool2d(const Tensor& x, PoolMode mode, std::size_t size, std::size_t stride,
                     Padding padding = Padding::valid) {
    if (size == 0 || stride == 0) throw StructuralError("pool2d: size and stride must be positive");
    const std::size_t oh = pooled_extent(x.height(), size, stride, padding);
    const std::size_t ow = pooled_extent(x.width(), size, stride, padding);
    std::ptrdiff_t pad_top = 0;
    std::ptrdiff_t pad_left = 0;
    if (padding == Padding::same) {
        const auto need_h = static_cast<std::ptrdiff_t>((oh - 1) * stride + size) - static_cast<std::ptrdiff_t>(x.height());
        const auto need_w = static_cast<std::ptrdiff_t>((ow - 1) * stride + size) - static_cast<std::ptrdiff_t>(x.width());
        pad_top = std::max<std::ptrdiff_t>(need_h, 0) / 2;
        pad_left = std::max<std::ptrdiff_t>(need_w, 0) / 2;
    }
    const auto h = static_cast<std::ptrdiff_t>(x.height());
    const auto w = static_cast<std::ptrdiff_t>(x.width());
    const std::size_t c = x.channels();

    const auto cs = static_cast<Eigen::Index>(c);
    auto window = [&](std::size_t o, std::ptrdiff_t pad, std::ptrdiff_t extent) {
        const std::ptrdiff_t s0 = static_cast<std::ptrdiff_t>(o * stride) - pad;
        return std::pair{std::max<std::ptrdiff_t>(s0, 0),
                         std::min<std::ptrdiff_t>(s0 + static_cast<std::ptrdiff_t>(size), extent)};
    };
    if (mode == PoolMode::max) {
        // Separable: horizontal maxima first, then vertical.
        Tensor across(x.height(), ow, c);
        for (std::ptrdiff_t r = 0; r < h; ++r) {
            for (std::size_t oj = 0; oj < ow; ++oj) {
                const auto [ca, cb] = window(oj, pad_left, w);
                detail::ArrayMap o(across.data() + (r * static_cast<std::ptrdiff_t>(ow) + oj) * c, cs);
                o.setConstant(-std::numeric_limits<float>::infinity());
                for (std::ptrdiff_t cc = ca; cc < cb; ++cc) o = o.max(detail::ConstArrayMap(x.data() + (r * w + cc) * c, cs));
            }
        }
        Tensor out(oh, ow, c);
        const auto row = static_cast<Eigen::Index>(ow * c);
        for (std::size_t oi = 0; oi < oh; ++oi) {
            const auto [ra, rb] = window(oi, pad_top, h);
            detail::ArrayMap o(out.data() + oi * ow * c, row);
            o.setConstant(-std::numeric_limits<float>::infinity());
            for (std::ptrdiff_t r = ra; r < rb; ++r) o = o.max(detail::ConstArrayMap(across.data() + r * row, row));
        }
        return out;
    }

    Tensor out(oh, ow, c);
    std::vector<double> sum(c);
    for (std::size_t oi = 0; oi < oh; ++oi) {
        const std::ptrdiff_t r0 = static_cast<std::ptrdiff_t>(oi * stride) - pad_top;
        const std::ptrdiff_t ra = std::max<std::ptrdiff_t>(r0, 0);
        const std::ptrdiff_t rb = std::min<std::ptrdiff_t>(r0 + static_cast<std::ptrdiff_t>(size), h);
        for (std::size_t oj = 0; oj < ow; ++oj) {
            const std::ptrdiff_t c0 = static_cast<std::ptrdiff_t>(oj * stride) - pad_left;
            const std::ptrdiff_t ca = std::max<std::ptrdiff_t>(c0, 0);
            const std::ptrdiff_t cb = std::min<std::ptrdiff_t>(c0 + static_cast<std::ptrdiff_t>(size), w);
            float* o = out.data() + (oi * ow + oj) * c;
            if (mode == PoolMode::max) {
                std::fill(o, o + c, -std::numeric_limits<float>::infinity());
                for (std::ptrdiff_t r = ra; r < rb; ++r) {
                    for (std::ptrdiff_t cc = ca; cc < cb; ++cc) {
                        const float* s = x.data() + (r * w + cc) * c;
                        for (std::size_t ch = 0; ch < c; ++ch) o[ch] = std::max(o[ch], s[ch]);
                    }
                }
            } else {
                std::fill(sum.begin(), sum.end(), 0.0);
                for (std::ptrdiff_t r = ra; r < rb; ++r) {
                    for (std::ptrdiff_t cc = ca; cc < cb; ++cc) {
                        const float* s = x.data() + (r * w + cc) * c;
                        for (std::size_t ch = 0; ch < c; ++ch) sum[ch] += s[ch];
                    }
                }
                const auto count = static_cast<double>((rb - ra) * (cb - ca));
                for (std::size_t ch = 0; ch < c; ++ch) o[ch] = static_cast<float>(sum[ch] / count);
            }
        }
    }
    return out;
}

/// Replicates each pixel into a factor x factor block.
inline Tensor upsample_nearest(const Tensor& x, std::size_t factor) {
    if (factor == 0) throw StructuralError("upsample_nearest: factor must be >= 1");
    if (factor == 1) return x;
    const std::size_t c = x.channels();
    Tensor out(x.height() * factor, x.width() * factor, c);
    for (std::size_t i = 0; i < out.height(); ++i) {
        for (std::size_t j = 0; j < out.width(); ++j) {
            const float* s = x.data() + ((i / factor) * x.width() + j / factor) * c;
            std::copy(s, s + c, out.data() + (i * out.width() + j) * c);
        }
    }
    return out;
}

/// Channel-wise concatenation [a, b].
inline Tensor concat(const Tensor& a, const Tensor& b) {
    if (!a.same_spatial(b)) {
        throw StructuralError("concat: spatial mismatch " + a.shape_string() + " vs " + b.shape_string());
    }
    const std::size_t ca = a.channels();
    const std::size_t cb = b.channels();
    Tensor out(a.height(), a.width(), ca + cb);
    for (std::size_t p = 0; p < a.pixels(); ++p) {
        float* o = out.data() + p * (ca + cb);
        std::copy(a.data() + p * ca, a.data() + (p + 1) * ca, o);
        std::copy(b.data() + p * cb, b.data() + (p + 1) * cb, o + ca);
    }
    return out;
}

/// Splits the channels into two equal halves, preserving order.
inline std::pair<Tensor, Tensor> split_half(const Tensor& x) {
    if (x.channels() % 2 != 0) {
        throw StructuralError("split_half: channel count " + std::to_string(x.channels()) + " is odd");
    }
    const std::size_t half = x.channels() / 2;
    Tensor a(x.height(), x.width(), half);
    Tensor b(x.height(), x.width(), half);
    for (std::size_t p = 0; p < x.pixels(); ++p) {
        const float* s = x.data() + p * x.channels();
        std::copy(s, s + half, a.data() + p * half);
        std::copy(s + half, s + 2 * half, b.data() + p * half);
    }
    return {std::move(a), std::move(b)};
}

inline Tensor multiply(const Tensor& a, const Tensor& b) {
    detail::require_same_shape(a, b, "multiply");
    Tensor out = a;
    detail::ArrayMap(out.data(), static_cast<Eigen::Index>(out.size())) *=
        detail::ConstArrayMap(b.data(), static_cast<Eigen::Index>(b.size()));
    return out;
}

inline Tensor add(const Tensor& a, const Tensor& b) {
    detail::require_same_shape(a, b, "add");
    Tensor out = a;
    detail::ArrayMap(out.data(), static_cast<Eigen::Index>(out.size())) +=
        detail::ConstArrayMap(b.data(), static_cast<Eigen::Index>(b.size()));
    return out;
}

/// Top-left crop to height x width.
inline Tensor crop(const Tensor& x, std::size_t height, std::size_t width) {
    if (height > x.height() || width > x.width()) {
        throw StructuralError("crop: target " + std::to_string(height) + "x" + std::to_string(width) +
                              " exceeds tensor " + x.shape_string());
    }
    const std::size_t c = x.channels();
    Tensor out(height, width, c);
    for (std::size_t i = 0; i < height; ++i) {
        const float* s = x.data() + i * x.width() * c;
        std::copy(s, s + width * c, out.data() + i * width * c);
    }
    return out;
}

/// Extracts one channel as a single-channel map.
inline Tensor channel(const Tensor& x, std::size_t ch) {
    if (ch >= x.channels()) throw StructuralError("channel index out of range");
    Tensor out(x.height(), x.width(), 1);
    for (std::size_t p = 0; p < x.pixels(); ++p) out.data()[p] = x.data()[p * x.channels() + ch];
    return out;
}

}  // namespace leader::ops
