#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace leader {

/// Raised when operands have incompatible shapes or a configuration is
/// structurally invalid (missing tensor, wrong kernel size, ...).
class StructuralError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Raised when a computation produces NaN/Inf.
class NumericError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Dense height x width x channels float map, row-major with channels
/// innermost. Images, feature maps and output maps all use this type.
class Tensor {
public:
    Tensor() = default;

    Tensor(std::size_t height, std::size_t width, std::size_t channels, float fill = 0.0f)
        : height_(height), width_(width), channels_(channels), data_(height * width * channels, fill) {
        if (height == 0 || width == 0 || channels == 0) {
            throw StructuralError("tensor dimensions must be positive, got " + shape_string(height, width, channels));
        }
    }

    Tensor(std::size_t height, std::size_t width, std::size_t channels, std::vector<float> data)
        : height_(height), width_(width), channels_(channels), data_(std::move(data)) {
        if (height == 0 || width == 0 || channels == 0) {
            throw StructuralError("tensor dimensions must be positive, got " + shape_string(height, width, channels));
        }
        if (data_.size() != height * width * channels) {
            throw StructuralError("tensor data length " + std::to_string(data_.size()) + " does not match shape " +
                                  shape_string(height, width, channels));
        }
    }

    std::size_t height() const noexcept { return height_; }
    std::size_t width() const noexcept { return width_; }
    std::size_t channels() const noexcept { return channels_; }
    std::size_t pixels() const noexcept { return height_ * width_; }
    std::size_t size() const noexcept { return data_.size(); }
    bool empty() const noexcept { return data_.empty(); }

    float& at(std::size_t row, std::size_t col, std::size_t ch = 0) noexcept {
        return data_[(row * width_ + col) * channels_ + ch];
    }
    float at(std::size_t row, std::size_t col, std::size_t ch = 0) const noexcept {
        return data_[(row * width_ + col) * channels_ + ch];
    }

    /// Channel vector of one pixel.
    std::span<float> pixel(std::size_t row, std::size_t col) noexcept {
        return {data_.data() + (row * width_ + col) * channels_, channels_};
    }
    std::span<const float> pixel(std::size_t row, std::size_t col) const noexcept {
        return {data_.data() + (row * width_ + col) * channels_, channels_};
    }

    float* data() noexcept { return data_.data(); }
    const float* data() const noexcept { return data_.data(); }
    std::span<float> values() noexcept { return data_; }
    std::span<const float> values() const noexcept { return data_; }

    bool same_shape(const Tensor& other) const noexcept {
        return height_ == other.height_ && width_ == other.width_ && channels_ == other.channels_;
    }
    bool same_spatial(const Tensor& other) const noexcept {
        return height_ == other.height_ && width_ == other.width_;
    }

    bool all_finite() const noexcept {
        return std::all_of(data_.begin(), data_.end(), [](float v) { return std::isfinite(v); });
    }

    std::string shape_string() const { return shape_string(height_, width_, channels_); }

    static std::string shape_string(std::size_t h, std::size_t w, std::size_t c) {
        return std::to_string(h) + "x" + std::to_string(w) + "x" + std::to_string(c);
    }

    friend bool operator==(const Tensor& a, const Tensor& b) {
        return a.same_shape(b) && a.data_ == b.data_;
    }

private:
    std::size_t height_ = 0;
    std::size_t width_ = 0;
    std::size_t channels_ = 0;
    std::vector<float> data_;
};

/// Weights of a dense convolution in (size, size, in, out) order.
struct ConvKernel {
    std::size_t size = 1;
    std::size_t in_channels = 0;
    std::size_t out_channels = 0;
    std::vector<float> weights;
    std::vector<float> bias;  // empty when the layer is unbiased

    bool has_bias() const noexcept { return !bias.empty(); }

    std::size_t parameter_count() const noexcept { return weights.size() + bias.size(); }

    float weight(std::size_t ky, std::size_t kx, std::size_t ci, std::size_t co) const noexcept {
        return weights[((ky * size + kx) * in_channels + ci) * out_channels + co];
    }

    void validate() const {
        if (size == 0 || size % 2 == 0) {
            throw StructuralError("convolution kernel size must be odd, got " + std::to_string(size));
        }
        if (in_channels == 0 || out_channels == 0) {
            throw StructuralError("convolution kernel needs positive channel counts");
        }
        if (weights.size() != size * size * in_channels * out_channels) {
            throw StructuralError("convolution weight length " + std::to_string(weights.size()) +
                                  " does not match " + std::to_string(size) + "x" + std::to_string(size) + "x" +
                                  std::to_string(in_channels) + "x" + std::to_string(out_channels));
        }
        if (!bias.empty() && bias.size() != out_channels) {
            throw StructuralError("convolution bias length " + std::to_string(bias.size()) + " != out channels " +
                                  std::to_string(out_channels));
        }
    }
};

/// One s x s filter per channel, (size, size, channels) order, no bias.
struct DepthwiseKernel {
    std::size_t size = 3;
    std::size_t channels = 0;
    std::vector<float> weights;

    std::size_t parameter_count() const noexcept { return weights.size(); }

    float weight(std::size_t ky, std::size_t kx, std::size_t c) const noexcept {
        return weights[(ky * size + kx) * channels + c];
    }

    void validate() const {
        if (size == 0 || size % 2 == 0) {
            throw StructuralError("depthwise kernel size must be odd, got " + std::to_string(size));
        }
        if (weights.size() != size * size * channels) {
            throw StructuralError("depthwise weight length " + std::to_string(weights.size()) + " does not match " +
                                  std::to_string(size) + "x" + std::to_string(size) + "x" + std::to_string(channels));
        }
    }
};

}  // namespace leader
