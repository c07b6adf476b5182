#include "medirl/tensor.hpp"

#include <cmath>

namespace medirl {

Tensor::Tensor(std::vector<std::uint32_t> dims, float fill) : shape(std::move(dims)) {
    std::size_t n = 1;
    for (std::uint32_t d : shape) n *= d;
    v.assign(n, fill);
}

Tensor Tensor::hwc(int h, int w, int c, float fill) {
    return Tensor({static_cast<std::uint32_t>(h), static_cast<std::uint32_t>(w),
                   static_cast<std::uint32_t>(c)},
                  fill);
}

bool Tensor::all_finite() const {
    for (float x : v)
        if (!std::isfinite(x)) return false;
    return true;
}

}  // namespace medirl
