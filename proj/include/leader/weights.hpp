#pragma once

#include <leader/tensor.hpp>

#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <numeric>
#include <string>
#include <vector>

namespace leader {

/// A named parameter array of arbitrary rank (conv kernels are rank 4).
struct WeightTensor {
    std::vector<std::size_t> shape;
    std::vector<float> values;

    static std::size_t element_count(const std::vector<std::size_t>& shape) {
        return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
    }

    std::size_t size() const noexcept { return values.size(); }

    friend bool operator==(const WeightTensor&, const WeightTensor&) = default;
};

inline std::string shape_to_string(const std::vector<std::size_t>& shape) {
    std::string s = "[";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) s += ",";
        s += std::to_string(shape[i]);
    }
    return s + "]";
}

/// Name -> parameter array, iterated in name order.
class WeightStore {
public:
    using Map = std::map<std::string, WeightTensor>;

    void insert(const std::string& name, WeightTensor tensor) {
        if (tensor.values.size() != WeightTensor::element_count(tensor.shape)) {
            throw StructuralError("weight '" + name + "': " + std::to_string(tensor.values.size()) +
                                  " values for shape " + shape_to_string(tensor.shape));
        }
        if (!tensors_.emplace(name, std::move(tensor)).second) {
            throw StructuralError("weight '" + name + "' already present");
        }
    }

    void insert_or_assign(const std::string& name, WeightTensor tensor) {
        tensors_.erase(name);
        insert(name, std::move(tensor));
    }

    bool contains(const std::string& name) const { return tensors_.contains(name); }
    const WeightTensor* find(const std::string& name) const {
        auto it = tensors_.find(name);
        return it == tensors_.end() ? nullptr : &it->second;
    }
    std::size_t erase(const std::string& name) { return tensors_.erase(name); }

    std::size_t size() const noexcept { return tensors_.size(); }
    Map::const_iterator begin() const { return tensors_.begin(); }
    Map::const_iterator end() const { return tensors_.end(); }

    std::size_t element_count() const {
        std::size_t n = 0;
        for (const auto& [name, t] : tensors_) n += t.size();
        return n;
    }

    bool all_finite() const {
        for (const auto& [name, t] : tensors_) {
            for (float v : t.values) {
                if (!std::isfinite(v)) return false;
            }
        }
        return true;
    }

    friend bool operator==(const WeightStore&, const WeightStore&) = default;

private:
    Map tensors_;
};

}  // namespace leader
