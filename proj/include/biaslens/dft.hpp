#pragma once

#include "biaslens/matrix.hpp"

namespace biaslens::dft {

// Unnormalized 2D DFT of a real matrix:
//   F(u,v) = sum_x sum_y f(x,y) * exp(-2*pi*i*(u*x/H + v*y/W))
// Row-column decomposition, O(H*W*(H+W)). Outputs real and imaginary
// parts, both H x W.
void dft2d(const Matrix& in, Matrix& re, Matrix& im);

// |F| of the above.
Matrix magnitude(const Matrix& in);

}  // namespace biaslens::dft
