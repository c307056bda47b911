#include "biaslens/image_io.hpp"

#include <png.h>

#include <cmath>
#include <csetjmp>
#include <cstdio>
#include <cstring>
#include <memory>
#include <string>
#include <vector>

#include "biaslens/error.hpp"

namespace biaslens::image {

namespace {

struct FileCloser {
    void operator()(std::FILE* f) const {
        if (f) std::fclose(f);
    }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

ImageTensor from_bytes(int h, int w, int c, const std::vector<uint8_t>& bytes) {
    std::vector<double> data(bytes.size());
    for (size_t i = 0; i < bytes.size(); ++i) data[i] = bytes[i] / 255.0;
    return make_image(h, w, c, std::move(data));
}

ImageTensor load_png(const std::filesystem::path& path, std::FILE* f) {
    png_structp png =
        png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png) throw IoError("libpng init failed for " + path.string());
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_read_struct(&png, nullptr, nullptr);
        throw IoError("libpng init failed for " + path.string());
    }

    std::string error;
    std::vector<uint8_t> bytes;
    int h = 0, w = 0, c = 0;
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw FormatError("corrupt PNG: " + path.string());
    }

    png_init_io(png, f);
    png_read_info(png, info);

    const png_uint_32 width = png_get_image_width(png, info);
    const png_uint_32 height = png_get_image_height(png, info);
    const int bit_depth = png_get_bit_depth(png, info);
    const int color_type = png_get_color_type(png, info);
    const int interlace = png_get_interlace_type(png, info);

    // Reject everything outside the 8-bit gray/RGB contract before decoding.
    if (bit_depth != 8)
        error = "unsupported bit depth " + std::to_string(bit_depth);
    else if (color_type == PNG_COLOR_TYPE_GRAY_ALPHA ||
             color_type == PNG_COLOR_TYPE_RGB_ALPHA)
        error = "alpha channel";
    else if (color_type == PNG_COLOR_TYPE_PALETTE)
        error = "palette color type";
    else if (color_type != PNG_COLOR_TYPE_GRAY && color_type != PNG_COLOR_TYPE_RGB)
        error = "color type " + std::to_string(color_type);
    else if (interlace != PNG_INTERLACE_NONE)
        error = "interlaced encoding";
    else if (png_get_valid(png, info, PNG_INFO_tRNS))
        error = "transparency chunk";

    if (!error.empty()) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw FormatError("unsupported PNG (" + error + "): " + path.string());
    }

    h = static_cast<int>(height);
    w = static_cast<int>(width);
    c = (color_type == PNG_COLOR_TYPE_GRAY) ? 1 : 3;
    bytes.resize(static_cast<size_t>(h) * w * c);

    std::vector<png_bytep> rows(height);
    for (png_uint_32 y = 0; y < height; ++y)
        rows[y] = bytes.data() + static_cast<size_t>(y) * w * c;
    png_read_image(png, rows.data());
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);

    return from_bytes(h, w, c, bytes);
}

// Binary PGM (P5) / PPM (P6), maxval 255. Header tokens may be separated
// by whitespace and '#' comments.
ImageTensor load_pnm(const std::filesystem::path& path, std::FILE* f) {
    auto next_token = [&]() -> std::string {
        std::string tok;
        int ch = 0;
        while ((ch = std::fgetc(f)) != EOF) {
            if (ch == '#') {
                while ((ch = std::fgetc(f)) != EOF && ch != '\n') {
                }
                continue;
            }
            if (std::isspace(ch)) {
                if (!tok.empty()) break;
                continue;
            }
            tok.push_back(static_cast<char>(ch));
        }
        if (tok.empty()) throw FormatError("truncated PNM header: " + path.string());
        return tok;
    };

    const std::string magic = next_token();
    int channels = 0;
    if (magic == "P5")
        channels = 1;
    else if (magic == "P6")
        channels = 3;
    else
        throw FormatError("unsupported PNM magic '" + magic + "': " + path.string());

    int w = 0, h = 0, maxval = 0;
    try {
        w = std::stoi(next_token());
        h = std::stoi(next_token());
        maxval = std::stoi(next_token());
    } catch (const std::logic_error&) {
        throw FormatError("malformed PNM header: " + path.string());
    }
    if (w < 1 || h < 1)
        throw FormatError("non-positive PNM dimensions: " + path.string());
    if (maxval != 255)
        throw FormatError("unsupported PNM maxval " + std::to_string(maxval) +
                          " (only 255): " + path.string());

    std::vector<uint8_t> bytes(static_cast<size_t>(h) * w * channels);
    if (std::fread(bytes.data(), 1, bytes.size(), f) != bytes.size())
        throw FormatError("truncated PNM pixel data: " + path.string());
    return from_bytes(h, w, channels, bytes);
}

}  // namespace

ImageTensor load_image(const std::filesystem::path& path) {
    FilePtr f(std::fopen(path.string().c_str(), "rb"));
    if (!f) throw IoError("cannot open for reading: " + path.string());

    uint8_t sig[8] = {};
    const size_t got = std::fread(sig, 1, sizeof(sig), f.get());
    std::rewind(f.get());
    if (got >= 8 && png_sig_cmp(sig, 0, 8) == 0) return load_png(path, f.get());
    if (got >= 2 && sig[0] == 'P' && (sig[1] == '5' || sig[1] == '6'))
        return load_pnm(path, f.get());
    throw FormatError("unrecognized image format (expected PNG, PGM or PPM): " +
                      path.string());
}

void save_image(const ImageTensor& img, const std::filesystem::path& path) {
    validate(img);
    FilePtr f(std::fopen(path.string().c_str(), "wb"));
    if (!f) throw IoError("cannot open for writing: " + path.string());

    png_structp png =
        png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png) throw IoError("libpng init failed for " + path.string());
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_write_struct(&png, nullptr);
        throw IoError("libpng init failed for " + path.string());
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw IoError("PNG write failed: " + path.string());
    }

    png_init_io(png, f.get());
    const int color_type =
        (img.channels == 1) ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB;
    png_set_IHDR(png, info, img.width, img.height, 8, color_type,
                 PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
                 PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);

    std::vector<uint8_t> bytes(img.data.size());
    for (size_t i = 0; i < img.data.size(); ++i)
        bytes[i] = static_cast<uint8_t>(std::lround(img.data[i] * 255.0));

    std::vector<png_bytep> rows(img.height);
    for (int y = 0; y < img.height; ++y)
        rows[y] = bytes.data() + static_cast<size_t>(y) * img.width * img.channels;
    png_write_image(png, rows.data());
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
}

}  // namespace biaslens::image
