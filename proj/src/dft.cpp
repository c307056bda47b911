#include "biaslens/dft.hpp"

#include <cmath>
#include <numbers>
#include <vector>

namespace biaslens::dft {

namespace {

// Twiddle table for exp(-2*pi*i*k/n), k in [0, n).
struct Twiddles {
    std::vector<double> cos_t;
    std::vector<double> sin_t;
    explicit Twiddles(int n) : cos_t(n), sin_t(n) {
        for (int k = 0; k < n; ++k) {
            const double a = -2.0 * std::numbers::pi * k / n;
            cos_t[k] = std::cos(a);
            sin_t[k] = std::sin(a);
        }
    }
};

}  // namespace

void dft2d(const Matrix& in, Matrix& re, Matrix& im) {
    const int h = in.rows;
    const int w = in.cols;
    const Twiddles th(h);
    const Twiddles tw(w);

    // Column pass: G(u,y) = sum_x f(x,y) * W_H^(u*x).
    Matrix gre(h, w), gim(h, w);
    for (int u = 0; u < h; ++u) {
        for (int x = 0; x < h; ++x) {
            const int k = static_cast<int>((static_cast<long long>(u) * x) % h);
            const double c = th.cos_t[k];
            const double s = th.sin_t[k];
            const double* row = &in.v[static_cast<size_t>(x) * w];
            double* outr = &gre.v[static_cast<size_t>(u) * w];
            double* outi = &gim.v[static_cast<size_t>(u) * w];
            for (int y = 0; y < w; ++y) {
                outr[y] += row[y] * c;
                outi[y] += row[y] * s;
            }
        }
    }

    // Row pass: F(u,v) = sum_y G(u,y) * W_W^(v*y).
    re = Matrix(h, w);
    im = Matrix(h, w);
    for (int u = 0; u < h; ++u) {
        const double* gr = &gre.v[static_cast<size_t>(u) * w];
        const double* gi = &gim.v[static_cast<size_t>(u) * w];
        double* outr = &re.v[static_cast<size_t>(u) * w];
        double* outi = &im.v[static_cast<size_t>(u) * w];
        for (int v = 0; v < w; ++v) {
            double sr = 0.0, si = 0.0;
            for (int y = 0; y < w; ++y) {
                const int k = static_cast<int>((static_cast<long long>(v) * y) % w);
                const double c = tw.cos_t[k];
                const double s = tw.sin_t[k];
                sr += gr[y] * c - gi[y] * s;
                si += gr[y] * s + gi[y] * c;
            }
            outr[v] = sr;
            outi[v] = si;
        }
    }
}

Matrix magnitude(const Matrix& in) {
    Matrix re, im;
    dft2d(in, re, im);
    Matrix mag(in.rows, in.cols);
    for (size_t i = 0; i < mag.v.size(); ++i)
        mag.v[i] = std::hypot(re.v[i], im.v[i]);
    return mag;
}

}  // namespace biaslens::dft
