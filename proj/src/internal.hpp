#pragma once

// Helpers shared by the op implementations. Not part of the public surface.

#include <cmath>
#include <memory>
#include <vector>

#include "swat/tensor.hpp"

namespace swat::internal {

inline Tensor make_result(Shape shape) {
    auto node = std::make_shared<detail::TensorNode>();
    node->shape = std::move(shape);
    node->values = std::make_shared<std::vector<double>>(
        static_cast<std::size_t>(shape_numel(node->shape)), 0.0);
    return Tensor::wrap(std::move(node));
}

inline std::vector<int64_t> row_major_strides(const Shape& s) {
    std::vector<int64_t> st(s.size(), 1);
    for (int i = static_cast<int>(s.size()) - 2; i >= 0; --i) st[i] = st[i + 1] * s[i + 1];
    return st;
}

inline bool all_finite(const std::vector<double>& v) {
    for (double x : v) {
        if (!std::isfinite(x)) return false;
    }
    return true;
}

}  // namespace swat::internal
