#pragma once

#include <cstddef>
#include <vector>

namespace biaslens {

// Dense row-major matrix of doubles. Used for transform coefficients,
// which unlike ImageTensor are not range-restricted.
struct Matrix {
    int rows = 0;
    int cols = 0;
    std::vector<double> v;

    Matrix() = default;
    Matrix(int r, int c) : rows(r), cols(c), v(static_cast<size_t>(r) * c, 0.0) {}

    double operator()(int r, int c) const {
        return v[static_cast<size_t>(r) * cols + c];
    }
    double& operator()(int r, int c) {
        return v[static_cast<size_t>(r) * cols + c];
    }
};

}  // namespace biaslens
