#pragma once

#include <span>

#include "biaslens/matrix.hpp"

namespace biaslens::dwt {

enum class Family { Haar, Daubechies4 };

// Orthonormal analysis lowpass filter for the family.
std::span<const double> lowpass(Family family);

// Highpass by alternating-sign reversal of the lowpass:
// g[k] = (-1)^k * h[F-1-k].
std::span<const double> highpass(Family family);

// Separable 2D DWT with periodic boundary extension, in the standard
// pyramid layout: level-1 coefficients occupy the quadrants
// [LL LH; HL HH]; deeper levels recurse into LL. Throws
// DegenerateInputError when a level would see an odd or too-small
// dimension.
Matrix forward(const Matrix& img, Family family, int levels);

// Exact inverse of forward (orthonormal filters + periodic extension
// give perfect reconstruction).
Matrix inverse(const Matrix& coeffs, Family family, int levels);

// Fails with DegenerateInputError explaining the first violated level
// if (rows, cols) cannot host `levels` decomposition levels.
void check_dimensions(int rows, int cols, Family family, int levels);

}  // namespace biaslens::dwt
