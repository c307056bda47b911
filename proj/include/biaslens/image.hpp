#pragma once

#include <cstdint>
#include <vector>

namespace biaslens::image {

// Single image: row-major H x W x C grid of real intensities in [0, 1].
// C is 1 (gray) or 3 (RGB). All toolkit operations treat instances as
// immutable values; every op returns a fresh tensor.
struct ImageTensor {
    int height = 0;
    int width = 0;
    int channels = 1;
    std::vector<double> data;  // size == height * width * channels

    double at(int y, int x, int c = 0) const {
        return data[(static_cast<size_t>(y) * width + x) * channels + c];
    }
    double& at(int y, int x, int c = 0) {
        return data[(static_cast<size_t>(y) * width + x) * channels + c];
    }
    size_t pixel_count() const {
        return static_cast<size_t>(height) * static_cast<size_t>(width);
    }
};

// Validating factory: throws ParameterError on any invariant violation
// (non-positive dims, channels not in {1,3}, wrong data length, values
// outside [0,1] or non-finite).
ImageTensor make_image(int height, int width, int channels, std::vector<double> data);

// Constant-valued image.
ImageTensor constant_image(int height, int width, int channels, double value);

void validate(const ImageTensor& img);

// Luma conversion (0.299 R + 0.587 G + 0.114 B). Gray input is returned
// unchanged, which makes the op idempotent.
ImageTensor to_grayscale(const ImageTensor& img);

// Bilinear resize with half-pixel centers and edge clamping. Resizing to
// the source size reproduces the input exactly.
ImageTensor resize(const ImageTensor& img, int out_h, int out_w);

}  // namespace biaslens::image
