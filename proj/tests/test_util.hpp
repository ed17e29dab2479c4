#pragma once

#include <cmath>
#include <cstring>
#include <limits>
#include <vector>

#include "ctxf/rng.hpp"
#include "ctxf/tensor.hpp"

namespace ctxf::testutil {

inline Tensor random_tensor(std::vector<int> shape, Rng& rng, bool requires_grad = false,
                            double lo = -1.0, double hi = 1.0) {
    Tensor t = Tensor::zeros(std::move(shape), requires_grad);
    for (double& v : t.data()) {
        v = lo + (hi - lo) * rng.uniform();
    }
    return t;
}

inline double max_abs_diff(const Tensor& a, const Tensor& b) {
    if (a.shape() != b.shape()) {
        return std::numeric_limits<double>::infinity();
    }
    double m = 0.0;
    for (std::size_t i = 0; i < a.numel(); ++i) {
        m = std::max(m, std::abs(a.data()[i] - b.data()[i]));
    }
    return m;
}

inline bool bitwise_equal(const Tensor& a, const Tensor& b) {
    if (a.shape() != b.shape()) {
        return false;
    }
    for (std::size_t i = 0; i < a.numel(); ++i) {
        if (std::memcmp(&a.data()[i], &b.data()[i], sizeof(double)) != 0) {
            return false;
        }
    }
    return true;
}

}  // namespace ctxf::testutil
