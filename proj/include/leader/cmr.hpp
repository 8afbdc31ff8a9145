#pragma once

// Castle-Moat-Rampart ground-truth encoding: a binary position map whose
// components each belong to exactly one minutia, a weight map shaped by the
// piecewise omega profile, and nearest-minutia direction/type maps.

#include <leader/minutiae.hpp>
#include <leader/tensor.hpp>

#include <cmath>
#include <limits>
#include <string>
#include <vector>

namespace leader::cmr {

struct CmrParams {
    double delta = 4.0;   // castle radius
    double beta = 2.0;    // moat width
    double sigma = 2.0;   // slope of the Gaussian flanks
    double lambda = 0.3;  // background plateau

    double s1() const noexcept { return beta + 3.0 * sigma; }

    void validate() const {
        if (!(delta > 0.0) || !(beta > 0.0) || !(sigma > 0.0) || !(lambda > 0.0 && lambda < 1.0)) {
            throw StructuralError("CMR parameters require delta, beta, sigma > 0 and 0 < lambda < 1");
        }
    }
};

struct GroundTruthMaps {
    Tensor position;   // P, binary
    Tensor weight;     // W, [0, 1]
    Tensor direction;  // D, radians
    Tensor type;       // T, 1 = ridge ending, 0 = bifurcation
};

inline double distance(double x0, double y0, double x1, double y1) noexcept {
    const double dx = x1 - x0;
    const double dy = y1 - y0;
    return std::sqrt(dx * dx + dy * dy);
}

/// p = 1 where exactly one minutia lies within delta and none lies in the
/// band (delta, delta + beta].
inline Tensor position_map(const MinutiaSet& gt, std::size_t width, std::size_t height, const CmrParams& params) {
    params.validate();
    std::vector<unsigned> inside(width * height, 0);
    std::vector<unsigned char> banned(width * height, 0);
    const double reach = params.delta + params.beta;
    for (const Minutia& m : gt.items) {
        const auto i0 = static_cast<std::ptrdiff_t>(std::floor(m.y - reach));
        const auto i1 = static_cast<std::ptrdiff_t>(std::ceil(m.y + reach));
        const auto j0 = static_cast<std::ptrdiff_t>(std::floor(m.x - reach));
        const auto j1 = static_cast<std::ptrdiff_t>(std::ceil(m.x + reach));
        for (std::ptrdiff_t i = std::max<std::ptrdiff_t>(i0, 0); i <= i1 && i < static_cast<std::ptrdiff_t>(height); ++i) {
            for (std::ptrdiff_t j = std::max<std::ptrdiff_t>(j0, 0); j <= j1 && j < static_cast<std::ptrdiff_t>(width); ++j) {
                const double rho = distance(m.x, m.y, static_cast<double>(j), static_cast<double>(i));
                const std::size_t p = static_cast<std::size_t>(i) * width + static_cast<std::size_t>(j);
                if (rho <= params.delta) {
                    ++inside[p];
                } else if (rho <= reach) {
                    banned[p] = 1;
                }
            }
        }
    }
    Tensor out(height, width, 1);
    for (std::size_t p = 0; p < out.size(); ++p) out.data()[p] = (inside[p] == 1 && !banned[p]) ? 1.0f : 0.0f;
    return out;
}

/// Squared Euclidean distance from every pixel to the nearest positive pixel
/// (exact, separable lower-envelope transform). +inf where P has no positives.
inline std::vector<double> squared_distance_to_positive(const Tensor& P) {
    const std::size_t h = P.height();
    const std::size_t w = P.width();
    constexpr double far = 1e20;
    const std::size_t n = std::max(h, w);
    std::vector<double> f(n), d(n), z(n + 1);
    std::vector<std::size_t> v(n);

    auto transform_1d = [&](std::size_t len) {
        std::size_t k = 0;
        v[0] = 0;
        z[0] = -std::numeric_limits<double>::infinity();
        z[1] = std::numeric_limits<double>::infinity();
        for (std::size_t q = 1; q < len; ++q) {
            const auto qd = static_cast<double>(q);
            auto intersect = [&] {
                const auto vk = static_cast<double>(v[k]);
                return ((f[q] + qd * qd) - (f[v[k]] + vk * vk)) / (2.0 * qd - 2.0 * vk);
            };
            double s = intersect();
            while (s <= z[k]) {  // z[0] = -inf stops the walk
                --k;
                s = intersect();
            }
            ++k;
            v[k] = q;
            z[k] = s;
            z[k + 1] = std::numeric_limits<double>::infinity();
        }
        k = 0;
        for (std::size_t q = 0; q < len; ++q) {
            while (z[k + 1] < static_cast<double>(q)) ++k;
            const double dq = static_cast<double>(q) - static_cast<double>(v[k]);
            d[q] = dq * dq + f[v[k]];
        }
    };

    std::vector<double> grid(h * w);
    for (std::size_t j = 0; j < w; ++j) {
        for (std::size_t i = 0; i < h; ++i) f[i] = P.at(i, j) > 0.5f ? 0.0 : far;
        transform_1d(h);
        for (std::size_t i = 0; i < h; ++i) grid[i * w + j] = d[i];
    }
    for (std::size_t i = 0; i < h; ++i) {
        for (std::size_t j = 0; j < w; ++j) f[j] = grid[i * w + j];
        transform_1d(w);
        for (std::size_t j = 0; j < w; ++j) {
            grid[i * w + j] = d[j] >= far / 2 ? std::numeric_limits<double>::infinity() : d[j];
        }
    }
    return grid;
}

/// Distance from pixel (i, j) to the nearest positive pixel of P; +inf if none.
inline double rho_min(const Tensor& P, std::size_t i, std::size_t j) {
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t y = 0; y < P.height(); ++y) {
        for (std::size_t x = 0; x < P.width(); ++x) {
            if (P.at(y, x) > 0.5f) {
                const double dx = static_cast<double>(j) - static_cast<double>(x);
                const double dy = static_cast<double>(i) - static_cast<double>(y);
                best = std::min(best, dx * dx + dy * dy);
            }
        }
    }
    return std::sqrt(best);
}

inline double gaussian(double z, double sigma) noexcept { return std::exp(-(z * z) / (2.0 * sigma * sigma)); }

/// Piecewise castle / moat / slope / rampart / plateau profile.
inline double omega(double s, const CmrParams& params) {
    if (s < 0.0 || std::isnan(s)) throw StructuralError("omega: distance must be non-negative");
    const double s1 = params.s1();
    if (s == 0.0) return 1.0;
    if (s <= params.beta) return 0.0;
    if (s <= s1) return gaussian(s - s1, params.sigma);
    if (s <= s1 + params.beta) return 1.0;
    return params.lambda + (1.0 - params.lambda) * gaussian(s - s1 - params.beta, params.sigma);
}

inline Tensor weight_map(const Tensor& P, const CmrParams& params) {
    params.validate();
    const std::vector<double> sq = squared_distance_to_positive(P);
    Tensor out(P.height(), P.width(), 1);
    for (std::size_t p = 0; p < sq.size(); ++p) out.data()[p] = static_cast<float>(omega(std::sqrt(sq[p]), params));
    return out;
}

/// Direction and type of the nearest minutia at every pixel; ties go to the
/// lower index. Empty input yields zero maps.
inline std::pair<Tensor, Tensor> direction_type_maps(const MinutiaSet& gt, std::size_t width, std::size_t height) {
    Tensor dir(height, width, 1);
    Tensor type(height, width, 1);
    if (gt.items.empty()) return {std::move(dir), std::move(type)};
    for (std::size_t i = 0; i < height; ++i) {
        for (std::size_t j = 0; j < width; ++j) {
            std::size_t best = 0;
            double best_d = std::numeric_limits<double>::infinity();
            for (std::size_t k = 0; k < gt.items.size(); ++k) {
                const double dx = static_cast<double>(j) - gt.items[k].x;
                const double dy = static_cast<double>(i) - gt.items[k].y;
                const double d2 = dx * dx + dy * dy;
                if (d2 < best_d) {
                    best_d = d2;
                    best = k;
                }
            }
            dir.at(i, j) = static_cast<float>(gt.items[best].theta);
            type.at(i, j) = gt.items[best].kind == MinutiaKind::ridge_ending ? 1.0f : 0.0f;
        }
    }
    return {std::move(dir), std::move(type)};
}

inline GroundTruthMaps encode(const MinutiaSet& gt, std::size_t width, std::size_t height, const CmrParams& params) {
    GroundTruthMaps maps;
    maps.position = position_map(gt, width, height, params);
    maps.weight = weight_map(maps.position, params);
    auto [d, t] = direction_type_maps(gt, width, height);
    maps.direction = std::move(d);
    maps.type = std::move(t);
    return maps;
}

/// Plain Gaussian heatmap target (max over minutiae of exp(-rho^2 / 2 sigma^2))
/// with uniform weights. Only kept as the ablation baseline; the radius/sigma
/// of the original baseline is unknown, so this is an approximation.
inline GroundTruthMaps encode_gaussian_baseline(const MinutiaSet& gt, std::size_t width, std::size_t height,
                                                double sigma = 2.0) {
    GroundTruthMaps maps;
    maps.position = Tensor(height, width, 1);
    for (const Minutia& m : gt.items) {
        for (std::size_t i = 0; i < height; ++i) {
            for (std::size_t j = 0; j < width; ++j) {
                const double r = distance(m.x, m.y, static_cast<double>(j), static_cast<double>(i));
                if (r > 4.0 * sigma) continue;
                float& p = maps.position.at(i, j);
                p = std::max(p, static_cast<float>(gaussian(r, sigma)));
            }
        }
    }
    maps.weight = Tensor(height, width, 1, 1.0f);
    auto [d, t] = direction_type_maps(gt, width, height);
    maps.direction = std::move(d);
    maps.type = std::move(t);
    return maps;
}

}  // namespace leader::cmr
