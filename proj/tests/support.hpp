#pragma once

// Random generators and straightforward nested-loop references shared by the
// unit tests and the acceptance runner.

#include <leader/leader.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <vector>

namespace testing_support {

using leader::Tensor;

inline Tensor random_tensor(std::size_t h, std::size_t w, std::size_t c, std::mt19937_64& rng, float lo = -1.0f,
                            float hi = 1.0f) {
    std::uniform_real_distribution<float> u(lo, hi);
    Tensor t(h, w, c);
    for (float& v : t.values()) v = u(rng);
    return t;
}

inline leader::ConvKernel random_conv(std::size_t size, std::size_t in, std::size_t out, bool bias,
                                      std::mt19937_64& rng) {
    std::uniform_real_distribution<float> u(-1.0f, 1.0f);
    leader::ConvKernel k;
    k.size = size;
    k.in_channels = in;
    k.out_channels = out;
    k.weights.resize(size * size * in * out);
    for (float& v : k.weights) v = u(rng);
    if (bias) {
        k.bias.resize(out);
        for (float& v : k.bias) v = u(rng);
    }
    return k;
}

inline leader::DepthwiseKernel random_depthwise(std::size_t size, std::size_t c, std::mt19937_64& rng) {
    std::uniform_real_distribution<float> u(-1.0f, 1.0f);
    leader::DepthwiseKernel k;
    k.size = size;
    k.channels = c;
    k.weights.resize(size * size * c);
    for (float& v : k.weights) v = u(rng);
    return k;
}

inline double max_abs_diff(const Tensor& a, const Tensor& b) {
    if (!a.same_shape(b)) return std::numeric_limits<double>::infinity();
    double m = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) m = std::max(m, std::fabs(double(a.data()[k]) - double(b.data()[k])));
    return m;
}

inline Tensor ref_conv2d(const Tensor& x, const leader::ConvKernel& k, std::size_t dilation = 1) {
    Tensor out(x.height(), x.width(), k.out_channels);
    const long h = long(x.height()), w = long(x.width()), r = long(k.size / 2), d = long(dilation);
    for (long i = 0; i < h; ++i)
        for (long j = 0; j < w; ++j)
            for (std::size_t co = 0; co < k.out_channels; ++co) {
                double s = k.has_bias() ? k.bias[co] : 0.0;
                for (long ky = 0; ky < long(k.size); ++ky)
                    for (long kx = 0; kx < long(k.size); ++kx) {
                        const long yi = i + (ky - r) * d, xj = j + (kx - r) * d;
                        if (yi < 0 || yi >= h || xj < 0 || xj >= w) continue;
                        for (std::size_t ci = 0; ci < k.in_channels; ++ci)
                            s += double(k.weight(ky, kx, ci, co)) * x.at(yi, xj, ci);
                    }
                out.at(i, j, co) = float(s);
            }
    return out;
}

inline Tensor ref_depthwise(const Tensor& x, const leader::DepthwiseKernel& k) {
    Tensor out(x.height(), x.width(), x.channels());
    const long h = long(x.height()), w = long(x.width()), r = long(k.size / 2);
    for (std::size_t c = 0; c < x.channels(); ++c)
        for (long i = 0; i < h; ++i)
            for (long j = 0; j < w; ++j) {
                double s = 0.0;
                for (long ky = 0; ky < long(k.size); ++ky)
                    for (long kx = 0; kx < long(k.size); ++kx) {
                        const long yi = i + ky - r, xj = j + kx - r;
                        if (yi >= 0 && yi < h && xj >= 0 && xj < w) s += double(k.weight(ky, kx, c)) * x.at(yi, xj, c);
                    }
                out.at(i, j, c) = float(s);
            }
    return out;
}

inline Tensor ref_layer_norm(const Tensor& x, const std::vector<float>& gamma, const std::vector<float>& beta,
                             double eps) {
    Tensor out(x.height(), x.width(), x.channels());
    const std::size_t c = x.channels();
    for (std::size_t i = 0; i < x.height(); ++i)
        for (std::size_t j = 0; j < x.width(); ++j) {
            double mean = 0.0;
            for (std::size_t k = 0; k < c; ++k) mean += x.at(i, j, k);
            mean /= double(c);
            double var = 0.0;
            for (std::size_t k = 0; k < c; ++k) var += (x.at(i, j, k) - mean) * (x.at(i, j, k) - mean);
            var /= double(c);
            for (std::size_t k = 0; k < c; ++k)
                out.at(i, j, k) = float((x.at(i, j, k) - mean) / std::sqrt(var + eps) * gamma[k] + beta[k]);
        }
    return out;
}

/// Windows start at o * stride - pad where pad is half the total same-padding.
inline Tensor ref_pool(const Tensor& x, leader::ops::PoolMode mode, std::size_t size, std::size_t stride, bool same) {
    const long h = long(x.height()), w = long(x.width());
    long oh, ow, pt = 0, pl = 0;
    if (same) {
        oh = (h + long(stride) - 1) / long(stride);
        ow = (w + long(stride) - 1) / long(stride);
        pt = std::max(0L, (oh - 1) * long(stride) + long(size) - h) / 2;
        pl = std::max(0L, (ow - 1) * long(stride) + long(size) - w) / 2;
    } else {
        oh = (h - long(size)) / long(stride) + 1;
        ow = (w - long(size)) / long(stride) + 1;
    }
    Tensor out(std::size_t(oh), std::size_t(ow), x.channels());
    for (long oi = 0; oi < oh; ++oi)
        for (long oj = 0; oj < ow; ++oj)
            for (std::size_t c = 0; c < x.channels(); ++c) {
                double best = -std::numeric_limits<double>::infinity(), sum = 0.0;
                long count = 0;
                for (long a = 0; a < long(size); ++a)
                    for (long b = 0; b < long(size); ++b) {
                        const long i = oi * long(stride) - pt + a, j = oj * long(stride) - pl + b;
                        if (i < 0 || i >= h || j < 0 || j >= w) continue;
                        best = std::max(best, double(x.at(i, j, c)));
                        sum += x.at(i, j, c);
                        ++count;
                    }
                out.at(oi, oj, c) = float(mode == leader::ops::PoolMode::max ? best : sum / double(count));
            }
    return out;
}

/// Pixels equal to their centered window maximum keep their value.
inline Tensor ref_nms(const Tensor& p, std::size_t window) {
    Tensor out(p.height(), p.width(), 1);
    const long h = long(p.height()), w = long(p.width()), r = long(window / 2);
    for (long i = 0; i < h; ++i)
        for (long j = 0; j < w; ++j) {
            float m = -std::numeric_limits<float>::infinity();
            for (long a = i - r; a <= i + r; ++a)
                for (long b = j - r; b <= j + r; ++b)
                    if (a >= 0 && a < h && b >= 0 && b < w) m = std::max(m, p.at(a, b));
            out.at(i, j) = p.at(i, j) == m ? p.at(i, j) : 0.0f;
        }
    return out;
}

/// Eq. 2 read literally at one pixel.
inline bool ref_position_pixel(const leader::MinutiaSet& gt, double x, double y, double delta, double beta) {
    std::size_t inside = 0;
    for (const auto& m : gt.items) {
        const double d = std::hypot(m.x - x, m.y - y);
        if (d <= delta) ++inside;
        if (d > delta && d <= delta + beta) return false;
    }
    return inside == 1;
}

inline leader::MinutiaSet random_minutiae(std::size_t n, std::size_t w, std::size_t h, std::mt19937_64& rng,
                                          bool integer_coords = true) {
    std::uniform_real_distribution<double> ux(0.0, double(w - 1)), uy(0.0, double(h - 1)), ut(-M_PI, M_PI),
        uq(0.0, 1.0);
    leader::MinutiaSet s;
    s.width = w;
    s.height = h;
    for (std::size_t k = 0; k < n; ++k) {
        leader::Minutia m;
        m.x = ux(rng);
        m.y = uy(rng);
        if (integer_coords) {
            m.x = std::round(m.x);
            m.y = std::round(m.y);
        }
        m.theta = leader::wrap_angle(ut(rng));
        m.kind = rng() % 2 ? leader::MinutiaKind::ridge_ending : leader::MinutiaKind::bifurcation;
        m.quality = uq(rng);
        s.items.push_back(m);
    }
    return s;
}

/// Best (cardinality, -distance) over every partial one-to-one matching.
struct BruteMatch {
    std::size_t tp = 0;
    double distance = 0.0;
};

inline BruteMatch brute_force_matching(const leader::MinutiaSet& e, const leader::MinutiaSet& g,
                                       const leader::eval::ThresholdLevel& level, bool type_aware) {
    BruteMatch best;
    std::vector<bool> used(g.size(), false);
    auto rec = [&](auto&& self, std::size_t i, std::size_t tp, double dist) -> void {
        if (i == e.size()) {
            if (tp > best.tp || (tp == best.tp && dist < best.distance)) best = {tp, dist};
            return;
        }
        self(self, i + 1, tp, dist);
        for (std::size_t j = 0; j < g.size(); ++j) {
            if (used[j] || !leader::eval::feasible(e.items[i], g.items[j], level, type_aware)) continue;
            used[j] = true;
            self(self, i + 1, tp + 1, dist + std::hypot(e.items[i].x - g.items[j].x, e.items[i].y - g.items[j].y));
            used[j] = false;
        }
    };
    rec(rec, 0, 0, 0.0);
    return best;
}

/// Ranks by counting strictly better scores (competition) or averaging tied positions.
inline std::vector<double> ref_ranks(const std::vector<double>& scores, bool average) {
    std::vector<double> r(scores.size());
    for (std::size_t i = 0; i < scores.size(); ++i) {
        std::size_t better = 0, equal = 0;
        for (double s : scores) {
            better += s > scores[i];
            equal += s == scores[i];
        }
        r[i] = average ? double(better) + (double(equal) + 1.0) / 2.0 : double(better + 1);
    }
    return r;
}

}  // namespace testing_support
