#include "biaslens/image.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "biaslens/error.hpp"

namespace biaslens::image {

void validate(const ImageTensor& img) {
    if (img.height < 1 || img.width < 1)
        throw ParameterError("image dimensions must be positive, got " +
                             std::to_string(img.height) + "x" + std::to_string(img.width));
    if (img.channels != 1 && img.channels != 3)
        throw ParameterError("image channels must be 1 or 3, got " +
                             std::to_string(img.channels));
    const size_t expected =
        static_cast<size_t>(img.height) * img.width * img.channels;
    if (img.data.size() != expected)
        throw ParameterError("image data length " + std::to_string(img.data.size()) +
                             " does not match " + std::to_string(expected));
    for (const double v : img.data) {
        if (!std::isfinite(v) || v < 0.0 || v > 1.0)
            throw ParameterError("image intensity " + std::to_string(v) +
                                 " outside [0,1]");
    }
}

ImageTensor make_image(int height, int width, int channels, std::vector<double> data) {
    ImageTensor img{height, width, channels, std::move(data)};
    validate(img);
    return img;
}

ImageTensor constant_image(int height, int width, int channels, double value) {
    return make_image(height, width, channels,
                      std::vector<double>(
                          static_cast<size_t>(height) * width * channels, value));
}

ImageTensor to_grayscale(const ImageTensor& img) {
    if (img.channels == 1) return img;
    ImageTensor out;
    out.height = img.height;
    out.width = img.width;
    out.channels = 1;
    out.data.resize(img.pixel_count());
    for (size_t p = 0; p < img.pixel_count(); ++p) {
        const double r = img.data[p * 3 + 0];
        const double g = img.data[p * 3 + 1];
        const double b = img.data[p * 3 + 2];
        out.data[p] = std::clamp(0.299 * r + 0.587 * g + 0.114 * b, 0.0, 1.0);
    }
    return out;
}

ImageTensor resize(const ImageTensor& img, int out_h, int out_w) {
    if (out_h < 1 || out_w < 1)
        throw ParameterError("resize target must be positive, got " +
                             std::to_string(out_h) + "x" + std::to_string(out_w));
    if (out_h == img.height && out_w == img.width) return img;

    ImageTensor out;
    out.height = out_h;
    out.width = out_w;
    out.channels = img.channels;
    out.data.resize(static_cast<size_t>(out_h) * out_w * img.channels);

    const double sy = static_cast<double>(img.height) / out_h;
    const double sx = static_cast<double>(img.width) / out_w;
    for (int y = 0; y < out_h; ++y) {
        // Half-pixel center mapping; clamped so border samples replicate edges.
        const double fy = std::clamp((y + 0.5) * sy - 0.5, 0.0, img.height - 1.0);
        const int y0 = static_cast<int>(fy);
        const int y1 = std::min(y0 + 1, img.height - 1);
        const double wy = fy - y0;
        for (int x = 0; x < out_w; ++x) {
            const double fx = std::clamp((x + 0.5) * sx - 0.5, 0.0, img.width - 1.0);
            const int x0 = static_cast<int>(fx);
            const int x1 = std::min(x0 + 1, img.width - 1);
            const double wx = fx - x0;
            for (int c = 0; c < img.channels; ++c) {
                const double top = (1.0 - wx) * img.at(y0, x0, c) + wx * img.at(y0, x1, c);
                const double bot = (1.0 - wx) * img.at(y1, x0, c) + wx * img.at(y1, x1, c);
                out.at(y, x, c) = std::clamp((1.0 - wy) * top + wy * bot, 0.0, 1.0);
            }
        }
    }
    return out;
}

}  // namespace biaslens::image
