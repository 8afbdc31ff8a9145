#include "support.hpp"

#include <gtest/gtest.h>

#include <numbers>

using namespace leader;
using namespace testing_support;
using std::numbers::pi;

namespace {

const cmr::CmrParams kParams{};

Minutia at(double x, double y, double theta = 0.0, MinutiaKind k = MinutiaKind::ridge_ending) {
    Minutia m;
    m.x = x;
    m.y = y;
    m.theta = theta;
    m.kind = k;
    return m;
}

MinutiaSet set_of(std::vector<Minutia> items, std::size_t w = 64, std::size_t h = 64) {
    MinutiaSet s;
    s.width = w;
    s.height = h;
    s.items = std::move(items);
    return s;
}

Tensor oracle_position(const MinutiaSet& gt, std::size_t w, std::size_t h, const cmr::CmrParams& p) {
    Tensor out(h, w, 1);
    for (std::size_t i = 0; i < h; ++i)
        for (std::size_t j = 0; j < w; ++j)
            out.at(i, j) = ref_position_pixel(gt, double(j), double(i), p.delta, p.beta) ? 1.0f : 0.0f;
    return out;
}

double scalar_omega(double s, double delta, double beta, double sigma, double lambda) {
    (void)delta;
    const double s1 = beta + 3 * sigma;
    auto g = [&](double z) { return std::exp(-z * z / (2 * sigma * sigma)); };
    if (s == 0) return 1;
    if (s <= beta) return 0;
    if (s <= s1) return g(s - s1);
    if (s <= s1 + beta) return 1;
    return lambda + (1 - lambda) * g(s - s1 - beta);
}

}  // namespace

TEST(CmrParams, Validation) {
    EXPECT_NO_THROW(kParams.validate());
    EXPECT_EQ(kParams.s1(), 8.0);
    EXPECT_THROW((cmr::CmrParams{0, 2, 2, 0.3}).validate(), StructuralError);
    EXPECT_THROW((cmr::CmrParams{4, 2, 2, 1.0}).validate(), StructuralError);
    EXPECT_THROW((cmr::CmrParams{4, 2, 2, 0.0}).validate(), StructuralError);
}

TEST(PositionMap, EmptyAndSingleDisk) {
    const Tensor e = cmr::position_map(set_of({}), 32, 32, kParams);
    EXPECT_EQ(e, Tensor(32, 32, 1, 0.0f));
    const Tensor p = cmr::position_map(set_of({at(30, 30)}), 64, 64, kParams);
    double n = 0;
    for (float v : p.values()) n += v;
    EXPECT_EQ(n, 49.0);
    EXPECT_EQ(p.at(30, 34), 1.0f);
    EXPECT_EQ(p.at(30, 35), 0.0f);
    EXPECT_EQ(p, oracle_position(set_of({at(30, 30)}), 64, 64, kParams));
}

TEST(PositionMap, CloseNeighboursMatchOracle) {
    for (double sep : {5.0, 6.0, 7.0, 4.5, 9.0}) {
        const MinutiaSet gt = set_of({at(20, 30), at(20 + sep, 30.5)});
        const Tensor p = cmr::position_map(gt, 64, 64, kParams);
        EXPECT_EQ(p, oracle_position(gt, 64, 64, kParams)) << sep;
        // Positive pixels of different minutiae are at least beta apart.
        std::vector<std::pair<int, int>> a, b;
        for (int i = 0; i < 64; ++i)
            for (int j = 0; j < 64; ++j)
                if (p.at(i, j) > 0.5f) (std::hypot(j - 20.0, i - 30.0) <= 4 ? a : b).emplace_back(i, j);
        for (auto [i, j] : a)
            for (auto [k, l] : b) EXPECT_GE(std::hypot(double(i - k), double(j - l)), kParams.beta);
    }
}

TEST(PositionMap, RandomConfigurationsMatchOracle) {
    std::mt19937_64 rng(1);
    for (int trial = 0; trial < 40; ++trial) {
        const MinutiaSet gt = random_minutiae(1 + rng() % 10, 64, 64, rng, trial % 2 == 0);
        EXPECT_EQ(cmr::position_map(gt, 64, 64, kParams), oracle_position(gt, 64, 64, kParams));
    }
}

TEST(PositionMap, EquidistantPairFailsUniqueness) {
    const MinutiaSet gt = set_of({at(10, 10), at(14, 10)});
    const Tensor p = cmr::position_map(gt, 32, 32, {4, 0.5, 2, 0.3});
    EXPECT_EQ(p.at(10, 12), 0.0f);
}

TEST(RhoMin, CasesAndTransform) {
    Tensor p(10, 10, 1);
    EXPECT_TRUE(std::isinf(cmr::rho_min(p, 3, 3)));
    p.at(2, 3) = 1.0f;
    EXPECT_EQ(cmr::rho_min(p, 2, 3), 0.0);
    EXPECT_DOUBLE_EQ(cmr::rho_min(p, 5, 7), 5.0);

    std::mt19937_64 rng(2);
    for (int trial = 0; trial < 20; ++trial) {
        const std::size_t h = 5 + rng() % 30, w = 5 + rng() % 30;
        Tensor s(h, w, 1);
        for (float& v : s.values()) v = (rng() % 23 == 0) ? 1.0f : 0.0f;
        const auto sq = cmr::squared_distance_to_positive(s);
        for (std::size_t i = 0; i < h; ++i)
            for (std::size_t j = 0; j < w; ++j) {
                double best = std::numeric_limits<double>::infinity();
                for (std::size_t y = 0; y < h; ++y)
                    for (std::size_t x = 0; x < w; ++x)
                        if (s.at(y, x) > 0.5f) {
                            const double dy = double(i) - double(y), dx = double(j) - double(x);
                            best = std::min(best, dx * dx + dy * dy);
                        }
                EXPECT_EQ(sq[i * w + j], best);
                EXPECT_EQ(cmr::rho_min(s, i, j), std::sqrt(best));
            }
    }
}

TEST(Omega, ProfileValues) {
    EXPECT_EQ(cmr::omega(0, kParams), 1.0);
    EXPECT_EQ(cmr::omega(1, kParams), 0.0);
    EXPECT_EQ(cmr::omega(2, kParams), 0.0);
    EXPECT_NEAR(cmr::omega(5, kParams), std::exp(-9.0 / 8.0), 1e-12);
    EXPECT_NEAR(cmr::omega(5, kParams), 0.32465, 1e-5);
    EXPECT_EQ(cmr::omega(8, kParams), 1.0);
    EXPECT_EQ(cmr::omega(9, kParams), 1.0);
    EXPECT_EQ(cmr::omega(10, kParams), 1.0);
    EXPECT_NEAR(cmr::omega(1e6, kParams), 0.3, 1e-12);
    EXPECT_NEAR(cmr::omega(std::numeric_limits<double>::infinity(), kParams), 0.3, 1e-12);
    EXPECT_THROW(cmr::omega(-1, kParams), StructuralError);
    for (double s = 0; s < 30; s += 0.37) {
        const double v = cmr::omega(s, kParams);
        EXPECT_GE(v, 0.0);
        EXPECT_LE(v, 1.0);
        EXPECT_EQ(v, scalar_omega(s, 4, 2, 2, 0.3));
    }
}

TEST(WeightMap, ComposesOmegaWithRhoMin) {
    const Tensor zero(12, 12, 1);
    const Tensor w0 = cmr::weight_map(zero, kParams);
    for (float v : w0.values()) EXPECT_FLOAT_EQ(v, 0.3f);

    std::mt19937_64 rng(3);
    const MinutiaSet gt = random_minutiae(6, 48, 40, rng);
    const Tensor p = cmr::position_map(gt, 48, 40, kParams);
    const Tensor w = cmr::weight_map(p, kParams);
    for (std::size_t i = 0; i < 40; ++i)
        for (std::size_t j = 0; j < 48; ++j) {
            const double r = cmr::rho_min(p, i, j);
            EXPECT_EQ(w.at(i, j), float(cmr::omega(r, kParams)));
            if (p.at(i, j) > 0.5f) EXPECT_EQ(w.at(i, j), 1.0f);
            if (r > 0 && r <= kParams.beta) EXPECT_EQ(w.at(i, j), 0.0f);
        }
}

TEST(WeightMap, IsolatedRadialProfile) {
    const Tensor p = cmr::position_map(set_of({at(32, 32)}, 80, 80), 80, 80, kParams);
    const Tensor w = cmr::weight_map(p, kParams);
    for (int r = 0; r <= 20; ++r) {
        const double s = std::max(0.0, double(r) - 4.0);
        EXPECT_NEAR(w.at(32, std::size_t(32 + r)), scalar_omega(s, 4, 2, 2, 0.3), 1e-6) << r;
    }
}

TEST(DirectionType, NearestAttributes) {
    const auto [d1, t1] = cmr::direction_type_maps(set_of({at(5, 5, pi / 3, MinutiaKind::bifurcation)}), 16, 16);
    for (float v : d1.values()) EXPECT_FLOAT_EQ(v, float(pi / 3));
    for (float v : t1.values()) EXPECT_EQ(v, 0.0f);

    const MinutiaSet two = set_of({at(4, 8, 0.5), at(12, 8, -1.0, MinutiaKind::bifurcation)});
    const auto [d2, t2] = cmr::direction_type_maps(two, 17, 16);
    for (std::size_t i = 0; i < 16; ++i)
        for (std::size_t j = 0; j < 17; ++j) {
            const std::size_t k = j <= 8 ? 0 : 1;  // column 8 is equidistant: lower index wins
            EXPECT_FLOAT_EQ(d2.at(i, j), float(two.items[k].theta));
            EXPECT_EQ(t2.at(i, j), k == 0 ? 1.0f : 0.0f);
        }

    const auto [de, te] = cmr::direction_type_maps(set_of({}), 4, 4);
    EXPECT_EQ(de, Tensor(4, 4, 1));
    EXPECT_EQ(te, Tensor(4, 4, 1));
}

TEST(Encode, ComponentsMapToUniqueMinutia) {
    std::mt19937_64 rng(4);
    for (int trial = 0; trial < 10; ++trial) {
        const MinutiaSet gt = random_minutiae(12, 64, 64, rng);
        const auto maps = cmr::encode(gt, 64, 64, kParams);
        // Every positive pixel's nearest minutia is within delta and unique.
        for (std::size_t i = 0; i < 64; ++i)
            for (std::size_t j = 0; j < 64; ++j) {
                if (maps.position.at(i, j) < 0.5f) continue;
                std::size_t within = 0;
                for (const auto& m : gt.items) within += std::hypot(m.x - double(j), m.y - double(i)) <= kParams.delta;
                EXPECT_EQ(within, 1u);
            }
        for (float v : maps.weight.values()) {
            EXPECT_GE(v, 0.0f);
            EXPECT_LE(v, 1.0f);
        }
    }
    const auto empty = cmr::encode(set_of({}), 8, 8, kParams);
    for (float v : empty.weight.values()) EXPECT_FLOAT_EQ(v, 0.3f);
}

TEST(Encode, GaussianBaselinePeaksAtMinutiae) {
    const auto maps = cmr::encode_gaussian_baseline(set_of({at(10, 10)}, 32, 32), 32, 32);
    EXPECT_EQ(maps.position.at(10, 10), 1.0f);
    EXPECT_LT(maps.position.at(10, 13), 1.0f);
    EXPECT_EQ(maps.position.at(30, 30), 0.0f);
    for (float v : maps.weight.values()) EXPECT_EQ(v, 1.0f);
}
