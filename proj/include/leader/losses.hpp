#pragma once

// Multi-task loss values (no gradients): CMR-weighted BCE for position,
// masked normalized RMS angular error for direction and masked BCE for type.

#include <leader/tensor.hpp>
#include <leader/weights.hpp>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

namespace leader::losses {

inline constexpr double kEpsilon = 1e-8;
inline constexpr double kBceClamp = 1e-7;

struct LossWeights {
    double alpha_p = 0.85;
    double alpha_d = 0.10;
    double alpha_t = 0.05;
    double epsilon = kEpsilon;

    void validate() const {
        if (alpha_p < 0.0 || alpha_d < 0.0 || alpha_t < 0.0 || !(alpha_p + alpha_d + alpha_t > 0.0)) {
            throw StructuralError("loss weights must be non-negative with a positive sum");
        }
        if (!(epsilon > 0.0)) throw StructuralError("loss epsilon must be positive");
    }
};

struct LossParts {
    double position = 0.0;
    double direction = 0.0;
    double type = 0.0;
};

/// Signed wrapped difference in [-pi, pi).
inline double angular_difference(double d, double d_hat) noexcept {
    constexpr double two_pi = 2.0 * std::numbers::pi;
    double r = std::fmod(d - d_hat + std::numbers::pi, two_pi);
    if (r < 0.0) r += two_pi;
    return r - std::numbers::pi;
}

/// Binary cross-entropy with the prediction clamped to [clamp, 1 - clamp].
inline double bce(double target, double prediction, double clamp = kBceClamp) noexcept {
    const double p = std::clamp(prediction, clamp, 1.0 - clamp);
    return -(target * std::log(p) + (1.0 - target) * std::log(1.0 - p));
}

namespace detail {
inline void require_same(const Tensor& a, const Tensor& b, const char* what) {
    if (!a.same_shape(b)) {
        throw StructuralError(std::string(what) + ": shape mismatch " + a.shape_string() + " vs " + b.shape_string());
    }
}
}  // namespace detail

/// sum(w * BCE(p, p_hat)) / (sum(w) + eps)
inline double position_loss(const Tensor& P, const Tensor& p_hat, const Tensor& W, double eps = kEpsilon) {
    detail::require_same(P, p_hat, "position_loss");
    detail::require_same(P, W, "position_loss");
    double num = 0.0;
    double den = 0.0;
    for (std::size_t k = 0; k < P.size(); ++k) {
        const double w = W.data()[k];
        if (w != 0.0) num += w * bce(P.data()[k], p_hat.data()[k]);
        den += w;
    }
    return num / (den + eps);
}

/// (1/pi) * sqrt(sum(p * phi^2) / (sum(p) + eps)), always within [0, 1].
inline double direction_loss(const Tensor& P, const Tensor& D, const Tensor& d_hat, double eps = kEpsilon) {
    detail::require_same(P, D, "direction_loss");
    detail::require_same(P, d_hat, "direction_loss");
    double num = 0.0;
    double den = 0.0;
    for (std::size_t k = 0; k < P.size(); ++k) {
        const double p = P.data()[k];
        if (p != 0.0) {
            const double phi = angular_difference(D.data()[k], d_hat.data()[k]);
            num += p * phi * phi;
        }
        den += p;
    }
    return std::sqrt(num / (den + eps)) / std::numbers::pi;
}

/// sum(p * BCE(t, t_hat)) / (sum(p) + eps)
inline double type_loss(const Tensor& P, const Tensor& T, const Tensor& t_hat, double eps = kEpsilon) {
    detail::require_same(P, T, "type_loss");
    detail::require_same(P, t_hat, "type_loss");
    double num = 0.0;
    double den = 0.0;
    for (std::size_t k = 0; k < P.size(); ++k) {
        const double p = P.data()[k];
        if (p != 0.0) num += p * bce(T.data()[k], t_hat.data()[k]);
        den += p;
    }
    return num / (den + eps);
}

inline double composite_loss(const LossParts& parts, const LossWeights& weights) {
    weights.validate();
    return weights.alpha_p * parts.position + weights.alpha_d * parts.direction + weights.alpha_t * parts.type;
}

/// All three terms for one sample.
inline LossParts evaluate(const Tensor& P, const Tensor& W, const Tensor& D, const Tensor& T, const Tensor& p_hat,
                          const Tensor& d_hat, const Tensor& t_hat, double eps = kEpsilon) {
    return {position_loss(P, p_hat, W, eps), direction_loss(P, D, d_hat, eps), type_loss(P, T, t_hat, eps)};
}

/// RMS over every stored parameter element; 0 for an empty store.
inline double weight_magnitude(const WeightStore& store) {
    double sum = 0.0;
    std::size_t n = 0;
    for (const auto& [name, t] : store) {
        for (float v : t.values) sum += static_cast<double>(v) * v;
        n += t.size();
    }
    return n == 0 ? 0.0 : std::sqrt(sum / static_cast<double>(n));
}

}  // namespace leader::losses
