#pragma once

#include <cstdint>
#include <vector>

#include "medirl/common.hpp"

namespace medirl {

/// N-dimensional row-major float tensor. Feature maps are [h × w × channels].
struct Tensor {
    std::vector<std::uint32_t> shape;
    std::vector<float> v;

    Tensor() = default;
    explicit Tensor(std::vector<std::uint32_t> dims, float fill = 0.0f);

    static Tensor hwc(int h, int w, int c, float fill = 0.0f);

    std::size_t size() const { return v.size(); }
    int ndim() const { return static_cast<int>(shape.size()); }

    int height() const { return static_cast<int>(shape[0]); }
    int width() const { return static_cast<int>(shape[1]); }
    int channels() const { return ndim() == 3 ? static_cast<int>(shape[2]) : 1; }

    float& at(int y, int x, int c) {
        return v[(static_cast<std::size_t>(y) * shape[1] + x) * shape[2] + c];
    }
    float at(int y, int x, int c) const {
        return v[(static_cast<std::size_t>(y) * shape[1] + x) * shape[2] + c];
    }

    bool same_shape(const Tensor& o) const { return shape == o.shape; }
    bool all_finite() const;
};

}  // namespace medirl
