#pragma once

#include <cmath>
#include <cstddef>
#include <numbers>
#include <vector>

namespace leader {

enum class MinutiaKind { ridge_ending, bifurcation };

/// Wraps an angle into (-pi, pi].
inline double wrap_angle(double theta) noexcept {
    constexpr double two_pi = 2.0 * std::numbers::pi;
    double r = std::fmod(theta + std::numbers::pi, two_pi);
    if (r <= 0.0) r += two_pi;
    return r - std::numbers::pi;
}

struct Minutia {
    double x = 0.0;  // column
    double y = 0.0;  // row
    double theta = 0.0;  // radians, (-pi, pi]
    MinutiaKind kind = MinutiaKind::ridge_ending;
    double quality = 1.0;

    friend bool operator==(const Minutia&, const Minutia&) = default;
};

/// Minutiae of one image together with the image extent they refer to.
struct MinutiaSet {
    std::size_t width = 0;
    std::size_t height = 0;
    std::vector<Minutia> items;

    std::size_t size() const noexcept { return items.size(); }
    bool empty() const noexcept { return items.empty(); }

    friend bool operator==(const MinutiaSet&, const MinutiaSet&) = default;
};

}  // namespace leader
