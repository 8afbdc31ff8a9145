#pragma once

// Turns dense network outputs into a sparse minutiae list: Gaussian smoothing,
// 7x7 non-maximum suppression, angle decoding and thresholded readout.

#include <leader/minutiae.hpp>
#include <leader/ops.hpp>
#include <leader/tensor.hpp>

#include <cmath>
#include <numbers>
#include <string>

namespace leader::postprocess {

struct Settings {
    std::size_t smoothing_size = 5;
    double smoothing_sigma = 1.0;
    std::size_t nms_window = 7;
    double tau_q = 0.6;
};

/// Normalized size x size Gaussian as a single-channel convolution kernel.
inline ConvKernel gaussian_kernel(std::size_t size = 5, double sigma = 1.0) {
    if (size % 2 == 0) throw StructuralError("gaussian_kernel: size must be odd");
    if (!(sigma > 0.0)) throw StructuralError("gaussian_kernel: sigma must be positive");
    const auto r = static_cast<double>(size / 2);
    std::vector<double> g(size * size);
    double total = 0.0;
    for (std::size_t i = 0; i < size; ++i) {
        for (std::size_t j = 0; j < size; ++j) {
            const double dy = static_cast<double>(i) - r;
            const double dx = static_cast<double>(j) - r;
            g[i * size + j] = std::exp(-(dx * dx + dy * dy) / (2.0 * sigma * sigma));
            total += g[i * size + j];
        }
    }
    ConvKernel k;
    k.size = size;
    k.in_channels = 1;
    k.out_channels = 1;
    k.weights.resize(size * size);
    for (std::size_t i = 0; i < g.size(); ++i) k.weights[i] = static_cast<float>(g[i] / total);
    return k;
}

inline void require_single_channel(const Tensor& t, const char* what) {
    if (t.channels() != 1) {
        throw StructuralError(std::string(what) + ": expected a single-channel map, got " + t.shape_string());
    }
}

inline Tensor gaussian_smooth(const Tensor& p_hat, std::size_t size = 5, double sigma = 1.0) {
    require_single_channel(p_hat, "gaussian_smooth");
    const ConvKernel k = gaussian_kernel(size, sigma);
    const auto h = static_cast<std::ptrdiff_t>(p_hat.height());
    const auto w = static_cast<std::ptrdiff_t>(p_hat.width());
    const auto ks = static_cast<std::ptrdiff_t>(size);
    const std::ptrdiff_t r = ks / 2;
    Tensor out(p_hat.height(), p_hat.width(), 1);
    for (std::ptrdiff_t i = 0; i < h; ++i) {
        for (std::ptrdiff_t ky = 0; ky < ks; ++ky) {
            const std::ptrdiff_t src = i + ky - r;
            if (src < 0 || src >= h) continue;
            for (std::ptrdiff_t kx = 0; kx < ks; ++kx) {
                const std::ptrdiff_t dx = kx - r;
                const std::ptrdiff_t j0 = std::max<std::ptrdiff_t>(0, -dx);
                const std::ptrdiff_t j1 = std::min<std::ptrdiff_t>(w, w - dx);
                if (j1 <= j0) continue;
                Eigen::Map<Eigen::ArrayXf>(out.data() + i * w + j0, j1 - j0) +=
                    k.weights[static_cast<std::size_t>(ky * ks + kx)] *
                    Eigen::Map<const Eigen::ArrayXf>(p_hat.data() + src * w + j0 + dx, j1 - j0);
            }
        }
    }
    return out;
}

/// Keeps a value only where it equals the maximum of its window (ties all
/// survive), zero elsewhere. Out-of-bounds neighbours never win.
inline Tensor nms(const Tensor& p_star, std::size_t window = 7) {
    require_single_channel(p_star, "nms");
    const Tensor peaks = ops::pool2d(p_star, ops::PoolMode::max, window, 1, ops::Padding::same);
    Tensor out(p_star.height(), p_star.width(), 1);
    for (std::size_t p = 0; p < p_star.size(); ++p) {
        const float v = p_star.data()[p];
        out.data()[p] = (v == peaks.data()[p]) ? v : 0.0f;
    }
    return out;
}

/// Angle of (vx, vy) in (-pi, pi]; the zero vector maps to 0.
inline float polar_angle(float vx, float vy) noexcept {
    if (vx == 0.0f && vy == 0.0f) return 0.0f;
    const float a = std::atan2(vy, vx);
    return a <= -std::numbers::pi_v<float> ? std::numbers::pi_v<float> : a;
}

inline Tensor cartesian_to_polar(const Tensor& vx, const Tensor& vy) {
    if (!vx.same_shape(vy)) {
        throw StructuralError("cartesian_to_polar: shape mismatch " + vx.shape_string() + " vs " + vy.shape_string());
    }
    Tensor out(vx.height(), vx.width(), vx.channels());
    for (std::size_t p = 0; p < vx.size(); ++p) out.data()[p] = polar_angle(vx.data()[p], vy.data()[p]);
    return out;
}

/// Emits one minutia per pixel with p_tilde >= tau_q, in row-major order.
inline MinutiaSet extract_minutiae(const Tensor& p_tilde, const Tensor& d_hat, const Tensor& t_hat, double tau_q) {
    require_single_channel(p_tilde, "extract_minutiae");
    if (!p_tilde.same_shape(d_hat) || !p_tilde.same_shape(t_hat)) {
        throw StructuralError("extract_minutiae: maps differ in shape (" + p_tilde.shape_string() + ", " +
                              d_hat.shape_string() + ", " + t_hat.shape_string() + ")");
    }
    MinutiaSet set;
    set.width = p_tilde.width();
    set.height = p_tilde.height();
    for (std::size_t i = 0; i < p_tilde.height(); ++i) {
        for (std::size_t j = 0; j < p_tilde.width(); ++j) {
            const double q = p_tilde.at(i, j);
            if (!(q >= tau_q)) continue;
            Minutia m;
            m.x = static_cast<double>(j);
            m.y = static_cast<double>(i);
            // float(pi) lies just above pi; read it as pi rather than wrapping to -pi.
            const double d = d_hat.at(i, j);
            m.theta = (d > std::numbers::pi && d <= std::numbers::pi_v<float>) ? std::numbers::pi : wrap_angle(d);
            m.kind = t_hat.at(i, j) >= 0.5f ? MinutiaKind::ridge_ending : MinutiaKind::bifurcation;
            m.quality = q;
            set.items.push_back(m);
        }
    }
    return set;
}

}  // namespace leader::postprocess
