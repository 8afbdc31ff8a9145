#pragma once

// Per-sample rankings of methods by F1 and pairwise direct-win statistics.

#include <leader/tensor.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <vector>

namespace leader::eval {

/// methods x samples F1 values.
struct F1Table {
    std::vector<std::string> methods;
    std::vector<std::string> samples;
    std::vector<std::vector<double>> f1;  // f1[method][sample]

    std::size_t method_count() const noexcept { return f1.size(); }
    std::size_t sample_count() const noexcept { return f1.empty() ? 0 : f1.front().size(); }

    void validate() const {
        for (const auto& row : f1) {
            if (row.size() != sample_count()) throw StructuralError("F1 table is not rectangular");
            for (double v : row)
                if (!std::isfinite(v)) throw StructuralError("F1 table contains a non-finite value");
        }
        if (!methods.empty() && methods.size() != f1.size()) throw StructuralError("F1 table: method names do not match rows");
        if (!samples.empty() && samples.size() != sample_count()) {
            throw StructuralError("F1 table: sample names do not match columns");
        }
    }
};

/// competition: tied methods share the best rank (1, 1, 3);
/// average: tied methods share the mean of their positions (1.5, 1.5, 3).
enum class TieRule { competition, average };

/// Ranks of all methods on one sample; higher F1 ranks better (1 = best).
inline std::vector<double> rank_sample(const std::vector<double>& scores, TieRule rule) {
    const std::size_t n = scores.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
    std::vector<double> ranks(n);
    for (std::size_t k = 0; k < n;) {
        std::size_t e = k;
        while (e + 1 < n && scores[order[e + 1]] == scores[order[k]]) ++e;
        const double r = rule == TieRule::competition ? static_cast<double>(k + 1)
                                                      : (static_cast<double>(k + 1) + static_cast<double>(e + 1)) / 2.0;
        for (std::size_t t = k; t <= e; ++t) ranks[order[t]] = r;
        k = e + 1;
    }
    return ranks;
}

struct DirectWins {
    std::size_t samples = 0;
    std::vector<std::vector<std::size_t>> wins;  // wins[i][j]: samples where i beats j strictly
    std::vector<std::vector<std::size_t>> ties;

    double percent(std::size_t i, std::size_t j) const {
        return samples == 0 ? 0.0 : 100.0 * static_cast<double>(wins[i][j]) / static_cast<double>(samples);
    }
    double tie_percent(std::size_t i, std::size_t j) const {
        return samples == 0 ? 0.0 : 100.0 * static_cast<double>(ties[i][j]) / static_cast<double>(samples);
    }
};

inline DirectWins direct_win_matrix(const F1Table& table) {
    table.validate();
    const std::size_t m = table.method_count();
    DirectWins d;
    d.samples = table.sample_count();
    d.wins.assign(m, std::vector<std::size_t>(m, 0));
    d.ties.assign(m, std::vector<std::size_t>(m, 0));
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < m; ++j) {
            if (i == j) continue;
            for (std::size_t s = 0; s < d.samples; ++s) {
                const double a = table.f1[i][s];
                const double b = table.f1[j][s];
                if (a > b) {
                    ++d.wins[i][j];
                } else if (a == b) {
                    ++d.ties[i][j];
                }
            }
        }
    }
    return d;
}

struct MethodSummary {
    std::string method;
    double mean_rank = 0.0;
    double sd_rank = 0.0;    // population standard deviation over samples
    double top1 = 0.0;       // % samples ranked first
    double top3 = 0.0;       // % samples ranked within the first three
    double bottom_half = 0.0;  // % samples ranked in the lower half (rank > M / 2)
};

struct RankingReport {
    TieRule rule = TieRule::competition;
    std::vector<std::vector<double>> ranks;  // ranks[method][sample]
    std::vector<MethodSummary> summary;
    DirectWins direct;
};

inline RankingReport sample_ranking(const F1Table& table, TieRule rule = TieRule::competition) {
    table.validate();
    const std::size_t m = table.method_count();
    const std::size_t n = table.sample_count();
    if (m < 2) throw StructuralError("sample_ranking: need at least two methods");
    if (n == 0) throw StructuralError("sample_ranking: need at least one sample");

    RankingReport rep;
    rep.rule = rule;
    rep.ranks.assign(m, std::vector<double>(n, 0.0));
    std::vector<double> column(m);
    for (std::size_t s = 0; s < n; ++s) {
        for (std::size_t i = 0; i < m; ++i) column[i] = table.f1[i][s];
        const auto r = rank_sample(column, rule);
        for (std::size_t i = 0; i < m; ++i) rep.ranks[i][s] = r[i];
    }

    const double half = static_cast<double>(m) / 2.0;
    for (std::size_t i = 0; i < m; ++i) {
        MethodSummary ms;
        ms.method = i < table.methods.size() ? table.methods[i] : "method" + std::to_string(i + 1);
        const auto& r = rep.ranks[i];
        const double mean = std::accumulate(r.begin(), r.end(), 0.0) / static_cast<double>(n);
        double ss = 0.0;
        std::size_t t1 = 0, t3 = 0, bh = 0;
        for (double v : r) {
            ss += (v - mean) * (v - mean);
            t1 += v <= 1.0;
            t3 += v <= 3.0;
            bh += v > half;
        }
        ms.mean_rank = mean;
        ms.sd_rank = std::sqrt(ss / static_cast<double>(n));
        ms.top1 = 100.0 * static_cast<double>(t1) / static_cast<double>(n);
        ms.top3 = 100.0 * static_cast<double>(t3) / static_cast<double>(n);
        ms.bottom_half = 100.0 * static_cast<double>(bh) / static_cast<double>(n);
        rep.summary.push_back(ms);
    }
    rep.direct = direct_win_matrix(table);
    return rep;
}

}  // namespace leader::eval
