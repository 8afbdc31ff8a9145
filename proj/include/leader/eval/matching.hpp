#pragma once

// Intrinsic evaluation: ridge-area cropping with a boundary margin, optimal
// one-to-one pairing of extracted and ground-truth minutiae, and
// precision / recall / F1 with quality-threshold sweeps.

#include <leader/losses.hpp>
#include <leader/minutiae.hpp>
#include <leader/tensor.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <optional>
#include <vector>

namespace leader::eval {

struct ThresholdLevel {
    double rho_t = 16.0;                    // pixels
    double theta_t = std::numbers::pi / 6;  // radians

    void validate() const {
        if (!(rho_t > 0.0) || !(theta_t > 0.0)) throw StructuralError("threshold level needs positive rho_t and theta_t");
    }
};

/// Loose, medium and strict levels.
inline const std::vector<ThresholdLevel>& standard_levels() {
    static const std::vector<ThresholdLevel> levels{
        {16.0, std::numbers::pi / 6}, {12.0, std::numbers::pi / 8}, {8.0, std::numbers::pi / 10}};
    return levels;
}

inline constexpr double kBoundaryMargin = 14.0;

// ---------------------------------------------------------------------------
// Cropping

struct BoundingBox {
    std::size_t row0 = 0, col0 = 0;  // inclusive
    std::size_t row1 = 0, col1 = 0;  // inclusive

    std::size_t height() const noexcept { return row1 - row0 + 1; }
    std::size_t width() const noexcept { return col1 - col0 + 1; }
};

/// Bounding box of the foreground (> 0.5) pixels, if any.
inline std::optional<BoundingBox> foreground_box(const Tensor& mask) {
    std::optional<BoundingBox> box;
    for (std::size_t i = 0; i < mask.height(); ++i) {
        for (std::size_t j = 0; j < mask.width(); ++j) {
            if (mask.at(i, j) <= 0.5f) continue;
            if (!box) {
                box = BoundingBox{i, j, i, j};
            } else {
                box->row0 = std::min(box->row0, i);
                box->row1 = std::max(box->row1, i);
                box->col0 = std::min(box->col0, j);
                box->col1 = std::max(box->col1, j);
            }
        }
    }
    return box;
}

struct CropResult {
    MinutiaSet set;
    BoundingBox box;
    bool empty_mask = false;  // warning: nothing to evaluate
};

/// True when some background pixel lies within `margin` of (x, y). Pixels
/// outside the box count as background, which makes the box edge a boundary.
inline bool near_background(const Tensor& mask, const BoundingBox& box, double x, double y, double margin) {
    const auto r = static_cast<std::ptrdiff_t>(std::ceil(margin)) + 1;
    const auto ci = static_cast<std::ptrdiff_t>(std::floor(y));
    const auto cj = static_cast<std::ptrdiff_t>(std::floor(x));
    const double m2 = margin * margin;
    for (std::ptrdiff_t i = ci - r; i <= ci + r + 1; ++i) {
        for (std::ptrdiff_t j = cj - r; j <= cj + r + 1; ++j) {
            const double dx = static_cast<double>(j) - x;
            const double dy = static_cast<double>(i) - y;
            if (dx * dx + dy * dy > m2) continue;
            const bool inside = i >= static_cast<std::ptrdiff_t>(box.row0) && i <= static_cast<std::ptrdiff_t>(box.row1) &&
                                j >= static_cast<std::ptrdiff_t>(box.col0) && j <= static_cast<std::ptrdiff_t>(box.col1);
            if (!inside) return true;
            if (mask.at(static_cast<std::size_t>(i), static_cast<std::size_t>(j)) <= 0.5f) return true;
        }
    }
    return false;
}

/// Drops minutiae outside the foreground box or within `margin` pixels of the
/// background, and re-expresses the rest relative to the box origin.
inline CropResult crop_and_filter(const MinutiaSet& set, const Tensor& mask, double margin = kBoundaryMargin) {
    if (mask.channels() != 1) throw StructuralError("crop_and_filter: mask must be single-channel");
    if (set.width != 0 && (set.width != mask.width() || set.height != mask.height())) {
        throw StructuralError("crop_and_filter: mask is " + std::to_string(mask.width()) + "x" +
                              std::to_string(mask.height()) + " but minutiae refer to " + std::to_string(set.width) +
                              "x" + std::to_string(set.height));
    }
    CropResult out;
    const auto box = foreground_box(mask);
    if (!box) {
        out.empty_mask = true;
        return out;
    }
    out.box = *box;
    out.set.width = box->width();
    out.set.height = box->height();
    const auto x0 = static_cast<double>(box->col0);
    const auto y0 = static_cast<double>(box->row0);
    for (const Minutia& m : set.items) {
        if (m.x < x0 || m.x > static_cast<double>(box->col1) || m.y < y0 || m.y > static_cast<double>(box->row1)) continue;
        if (near_background(mask, *box, m.x, m.y, margin)) continue;
        Minutia shifted = m;
        shifted.x -= x0;
        shifted.y -= y0;
        out.set.items.push_back(shifted);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Assignment

/// Minimum-cost assignment of every row to a distinct column (rows <= cols).
/// Returns the column chosen for each row.
inline std::vector<std::size_t> solve_assignment(const std::vector<std::vector<double>>& cost) {
    const std::size_t n = cost.size();
    if (n == 0) return {};
    const std::size_t m = cost.front().size();
    if (m < n) throw StructuralError("solve_assignment: needs at least as many columns as rows");
    constexpr double inf = std::numeric_limits<double>::infinity();
    // Potentials (u, v), matching p and predecessor way, all 1-based with a
    // virtual column 0.
    std::vector<double> u(n + 1, 0.0), v(m + 1, 0.0);
    std::vector<std::size_t> p(m + 1, 0), way(m + 1, 0);
    for (std::size_t i = 1; i <= n; ++i) {
        p[0] = i;
        std::size_t j0 = 0;
        std::vector<double> minv(m + 1, inf);
        std::vector<char> used(m + 1, 0);
        do {
            used[j0] = 1;
            const std::size_t i0 = p[j0];
            double delta = inf;
            std::size_t j1 = 0;
            for (std::size_t j = 1; j <= m; ++j) {
                if (used[j]) continue;
                const double cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
                if (cur < minv[j]) {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if (minv[j] < delta) {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for (std::size_t j = 0; j <= m; ++j) {
                if (used[j]) {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
        } while (p[j0] != 0);
        do {
            const std::size_t j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
        } while (j0 != 0);
    }
    std::vector<std::size_t> row_to_col(n, 0);
    for (std::size_t j = 1; j <= m; ++j)
        if (p[j] != 0) row_to_col[p[j] - 1] = j - 1;
    return row_to_col;
}

struct MatchedPair {
    std::size_t extracted = 0;
    std::size_t gt = 0;
    double distance = 0.0;
    double angle = 0.0;  // signed wrapped difference
};

struct MatchResult {
    std::vector<MatchedPair> pairs;
    std::size_t tp = 0;
    std::size_t fp = 0;
    std::size_t fn = 0;
    bool type_aware = false;
};

inline bool feasible(const Minutia& e, const Minutia& g, const ThresholdLevel& level, bool type_aware) {
    const double rho = std::hypot(e.x - g.x, e.y - g.y);
    const double phi = losses::angular_difference(e.theta, g.theta);
    return rho <= level.rho_t && std::abs(phi) <= level.theta_t && (!type_aware || e.kind == g.kind);
}

/// Maximum-cardinality feasible one-to-one pairing; among those, minimum
/// total distance. Infeasible pairs cost more than any full feasible
/// matching, so the min-cost assignment settles cardinality first.
inline MatchResult pair_minutiae(const MinutiaSet& extracted, const MinutiaSet& gt, const ThresholdLevel& level,
                                 bool type_aware) {
    level.validate();
    MatchResult r;
    r.type_aware = type_aware;
    const std::size_t ne = extracted.size();
    const std::size_t ng = gt.size();
    const bool transpose = ne > ng;  // rows must not outnumber columns
    const std::size_t rows = transpose ? ng : ne;
    const std::size_t cols = transpose ? ne : ng;
    const double penalty = level.rho_t * static_cast<double>(rows + 1) + 1.0;

    std::vector<std::vector<double>> cost(rows, std::vector<double>(cols, penalty));
    for (std::size_t a = 0; a < rows; ++a) {
        for (std::size_t b = 0; b < cols; ++b) {
            const Minutia& e = extracted.items[transpose ? b : a];
            const Minutia& g = gt.items[transpose ? a : b];
            if (feasible(e, g, level, type_aware)) cost[a][b] = std::hypot(e.x - g.x, e.y - g.y);
        }
    }
    const auto assignment = solve_assignment(cost);
    for (std::size_t a = 0; a < rows; ++a) {
        const std::size_t ei = transpose ? assignment[a] : a;
        const std::size_t gi = transpose ? a : assignment[a];
        const Minutia& e = extracted.items[ei];
        const Minutia& g = gt.items[gi];
        if (!feasible(e, g, level, type_aware)) continue;
        r.pairs.push_back({ei, gi, std::hypot(e.x - g.x, e.y - g.y), losses::angular_difference(e.theta, g.theta)});
    }
    std::sort(r.pairs.begin(), r.pairs.end(), [](const auto& x, const auto& y) { return x.extracted < y.extracted; });
    r.tp = r.pairs.size();
    r.fp = ne - r.tp;
    r.fn = ng - r.tp;
    return r;
}

// ---------------------------------------------------------------------------
// Scores

struct OperatingPoint {
    double tau = 0.0;
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    std::size_t tp = 0, fp = 0, fn = 0;
};

/// Zero denominators give 0.
inline OperatingPoint precision_recall_f1(std::size_t tp, std::size_t fp, std::size_t fn) {
    OperatingPoint op;
    op.tp = tp;
    op.fp = fp;
    op.fn = fn;
    const auto t = static_cast<double>(tp);
    op.precision = tp + fp == 0 ? 0.0 : t / static_cast<double>(tp + fp);
    op.recall = tp + fn == 0 ? 0.0 : t / static_cast<double>(tp + fn);
    const double s = op.precision + op.recall;
    op.f1 = s > 0.0 ? 2.0 * op.precision * op.recall / s : 0.0;
    return op;
}

inline OperatingPoint precision_recall_f1(const MatchResult& r) { return precision_recall_f1(r.tp, r.fp, r.fn); }

struct PrCurve {
    std::vector<OperatingPoint> points;  // ascending tau
    OperatingPoint best;                 // highest F1, lowest tau on ties
    bool empty_mask = false;
};

/// Sweeps tau over the distinct qualities (plus one step above the highest),
/// re-pairing the surviving minutiae at every threshold. Inputs are taken as
/// already filtered.
inline PrCurve sweep_quality(const MinutiaSet& extracted, const MinutiaSet& gt, const ThresholdLevel& level,
                             bool type_aware) {
    std::vector<double> taus;
    for (const Minutia& m : extracted.items) taus.push_back(m.quality);
    std::sort(taus.begin(), taus.end());
    taus.erase(std::unique(taus.begin(), taus.end()), taus.end());
    taus.push_back(taus.empty() ? 0.0 : std::nextafter(taus.back(), std::numeric_limits<double>::infinity()));

    PrCurve curve;
    MinutiaSet kept = extracted;
    for (double tau : taus) {
        kept.items.clear();
        for (const Minutia& m : extracted.items)
            if (m.quality >= tau) kept.items.push_back(m);
        OperatingPoint op = precision_recall_f1(pair_minutiae(kept, gt, level, type_aware));
        op.tau = tau;
        curve.points.push_back(op);
    }
    curve.best = curve.points.front();
    for (const auto& op : curve.points)
        if (op.f1 > curve.best.f1) curve.best = op;
    return curve;
}

/// Crops both sets with the mask, then sweeps the quality threshold.
inline PrCurve pr_curve(const MinutiaSet& extracted, const MinutiaSet& gt, const Tensor& mask, const ThresholdLevel& level,
                        bool type_aware, double margin = kBoundaryMargin) {
    const CropResult ce = crop_and_filter(extracted, mask, margin);
    const CropResult cg = crop_and_filter(gt, mask, margin);
    PrCurve curve = sweep_quality(ce.set, cg.set, level, type_aware);
    curve.empty_mask = ce.empty_mask;
    return curve;
}

}  // namespace leader::eval
