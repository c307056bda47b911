#include "biaslens/dwt.hpp"

#include <array>
#include <string>
#include <vector>

#include "biaslens/error.hpp"

namespace biaslens::dwt {

namespace {

constexpr std::array<double, 2> kHaarLow = {0.7071067811865475244008443621048,
                                            0.7071067811865475244008443621048};
constexpr std::array<double, 2> kHaarHigh = {0.7071067811865475244008443621048,
                                             -0.7071067811865475244008443621048};

// Daubechies-4 (two vanishing moments), orthonormal analysis taps.
constexpr std::array<double, 4> kDb4Low = {
    0.4829629131445341433748715998644,   // (1+sqrt(3))/(4*sqrt(2))
    0.8365163037378079055752937809168,   // (3+sqrt(3))/(4*sqrt(2))
    0.2241438680420133810259727622404,   // (3-sqrt(3))/(4*sqrt(2))
    -0.1294095225512603811744494188120,  // (1-sqrt(3))/(4*sqrt(2))
};
constexpr std::array<double, 4> kDb4High = {kDb4Low[3], -kDb4Low[2], kDb4Low[1],
                                            -kDb4Low[0]};

// Analysis: a[n] = sum_k h[k] x[(2n+k) mod N], likewise d with g.
void analyze(std::span<const double> x, std::span<const double> h,
             std::span<const double> g, std::span<double> approx,
             std::span<double> detail) {
    const int n = static_cast<int>(x.size());
    const int half = n / 2;
    const int taps = static_cast<int>(h.size());
    for (int i = 0; i < half; ++i) {
        double a = 0.0, d = 0.0;
        for (int k = 0; k < taps; ++k) {
            const double xv = x[(2 * i + k) % n];
            a += h[k] * xv;
            d += g[k] * xv;
        }
        approx[i] = a;
        detail[i] = d;
    }
}

// Synthesis is the adjoint: x[(2n+k) mod N] += a[n] h[k] + d[n] g[k].
void synthesize(std::span<const double> approx, std::span<const double> detail,
                std::span<const double> h, std::span<const double> g,
                std::span<double> x) {
    const int n = static_cast<int>(x.size());
    const int half = n / 2;
    const int taps = static_cast<int>(h.size());
    for (int i = 0; i < n; ++i) x[i] = 0.0;
    for (int i = 0; i < half; ++i) {
        for (int k = 0; k < taps; ++k) {
            x[(2 * i + k) % n] += approx[i] * h[k] + detail[i] * g[k];
        }
    }
}

// One forward level over the top-left (rows x cols) submatrix.
void level_forward(Matrix& m, int rows, int cols, std::span<const double> h,
                   std::span<const double> g) {
    std::vector<double> buf(static_cast<size_t>(std::max(rows, cols)));
    std::vector<double> a(buf.size()), d(buf.size());

    for (int r = 0; r < rows; ++r) {
        for (int c = 0; c < cols; ++c) buf[c] = m(r, c);
        analyze({buf.data(), static_cast<size_t>(cols)}, h, g,
                {a.data(), static_cast<size_t>(cols / 2)},
                {d.data(), static_cast<size_t>(cols / 2)});
        for (int c = 0; c < cols / 2; ++c) {
            m(r, c) = a[c];
            m(r, c + cols / 2) = d[c];
        }
    }
    for (int c = 0; c < cols; ++c) {
        for (int r = 0; r < rows; ++r) buf[r] = m(r, c);
        analyze({buf.data(), static_cast<size_t>(rows)}, h, g,
                {a.data(), static_cast<size_t>(rows / 2)},
                {d.data(), static_cast<size_t>(rows / 2)});
        for (int r = 0; r < rows / 2; ++r) {
            m(r, c) = a[r];
            m(r + rows / 2, c) = d[r];
        }
    }
}

void level_inverse(Matrix& m, int rows, int cols, std::span<const double> h,
                   std::span<const double> g) {
    std::vector<double> x(static_cast<size_t>(std::max(rows, cols)));
    std::vector<double> a(x.size()), d(x.size());

    // Columns first (forward did rows then columns).
    for (int c = 0; c < cols; ++c) {
        for (int r = 0; r < rows / 2; ++r) {
            a[r] = m(r, c);
            d[r] = m(r + rows / 2, c);
        }
        synthesize({a.data(), static_cast<size_t>(rows / 2)},
                   {d.data(), static_cast<size_t>(rows / 2)}, h, g,
                   {x.data(), static_cast<size_t>(rows)});
        for (int r = 0; r < rows; ++r) m(r, c) = x[r];
    }
    for (int r = 0; r < rows; ++r) {
        for (int c = 0; c < cols / 2; ++c) {
            a[c] = m(r, c);
            d[c] = m(r, c + cols / 2);
        }
        synthesize({a.data(), static_cast<size_t>(cols / 2)},
                   {d.data(), static_cast<size_t>(cols / 2)}, h, g,
                   {x.data(), static_cast<size_t>(cols)});
        for (int c = 0; c < cols; ++c) m(r, c) = x[c];
    }
}

}  // namespace

std::span<const double> lowpass(Family family) {
    return family == Family::Haar ? std::span<const double>(kHaarLow)
                                  : std::span<const double>(kDb4Low);
}

std::span<const double> highpass(Family family) {
    return family == Family::Haar ? std::span<const double>(kHaarHigh)
                                  : std::span<const double>(kDb4High);
}

void check_dimensions(int rows, int cols, Family family, int levels) {
    if (levels < 1) throw ParameterError("dwt levels must be >= 1");
    const int taps = static_cast<int>(lowpass(family).size());
    int r = rows, c = cols;
    for (int l = 1; l <= levels; ++l) {
        if (r % 2 != 0 || c % 2 != 0 || r < taps || c < taps)
            throw DegenerateInputError(
                "image " + std::to_string(rows) + "x" + std::to_string(cols) +
                " too small for dwt level " + std::to_string(l) + " (needs even dims >= " +
                std::to_string(taps) + " at that level)");
        r /= 2;
        c /= 2;
    }
}

Matrix forward(const Matrix& img, Family family, int levels) {
    check_dimensions(img.rows, img.cols, family, levels);
    const auto h = lowpass(family);
    const auto g = highpass(family);
    Matrix m = img;
    int r = img.rows, c = img.cols;
    for (int l = 0; l < levels; ++l) {
        level_forward(m, r, c, h, g);
        r /= 2;
        c /= 2;
    }
    return m;
}

Matrix inverse(const Matrix& coeffs, Family family, int levels) {
    check_dimensions(coeffs.rows, coeffs.cols, family, levels);
    const auto h = lowpass(family);
    const auto g = highpass(family);
    Matrix m = coeffs;
    for (int l = levels - 1; l >= 0; --l) {
        level_inverse(m, coeffs.rows >> l, coeffs.cols >> l, h, g);
    }
    return m;
}

}  // namespace biaslens::dwt
