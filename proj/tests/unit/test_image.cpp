#include <doctest.h>

#include <png.h>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "biaslens/error.hpp"
#include "biaslens/image.hpp"
#include "biaslens/image_io.hpp"
#include "biaslens/rng.hpp"
#include "oracles.hpp"

using namespace biaslens;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir() {
    const fs::path dir = fs::temp_directory_path() / "biaslens_test_image";
    fs::create_directories(dir);
    return dir;
}

void write_rgba_png(const fs::path& path) {
    std::FILE* f = std::fopen(path.string().c_str(), "wb");
    REQUIRE(f != nullptr);
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr,
                                              nullptr);
    png_infop info = png_create_info_struct(png);
    png_init_io(png, f);
    png_set_IHDR(png, info, 2, 2, 8, PNG_COLOR_TYPE_RGB_ALPHA, PNG_INTERLACE_NONE,
                 PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    uint8_t row0[8] = {255, 0, 0, 255, 0, 255, 0, 128};
    uint8_t row1[8] = {0, 0, 255, 0, 255, 255, 255, 255};
    png_bytep rows[2] = {row0, row1};
    png_write_image(png, rows);
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
    std::fclose(f);
}

std::vector<uint8_t> file_bytes(const fs::path& p) {
    std::ifstream f(p, std::ios::binary);
    return std::vector<uint8_t>((std::istreambuf_iterator<char>(f)),
                                std::istreambuf_iterator<char>());
}

}  // namespace

TEST_CASE("PGM load scales bytes to [0,1]") {
    const fs::path p = temp_dir() / "two_by_two.pgm";
    {
        std::ofstream f(p, std::ios::binary);
        f << "P5\n2 2\n255\n";
        const uint8_t bytes[4] = {0, 255, 128, 64};
        f.write(reinterpret_cast<const char*>(bytes), 4);
    }
    const auto img = image::load_image(p);
    CHECK(img.height == 2);
    CHECK(img.width == 2);
    CHECK(img.channels == 1);
    CHECK(img.data[0] == doctest::Approx(0.0));
    CHECK(img.data[1] == doctest::Approx(1.0));
    CHECK(img.data[2] == doctest::Approx(128.0 / 255.0));
    CHECK(img.data[3] == doctest::Approx(64.0 / 255.0));
}

TEST_CASE("PPM load keeps three channels") {
    const fs::path p = temp_dir() / "rgb.ppm";
    {
        std::ofstream f(p, std::ios::binary);
        f << "P6\n1 1\n255\n";
        const uint8_t bytes[3] = {255, 0, 128};
        f.write(reinterpret_cast<const char*>(bytes), 3);
    }
    const auto img = image::load_image(p);
    CHECK(img.channels == 3);
    CHECK(img.data[0] == doctest::Approx(1.0));
    CHECK(img.data[1] == doctest::Approx(0.0));
}

TEST_CASE("PNG with alpha is rejected naming the property") {
    const fs::path p = temp_dir() / "alpha.png";
    write_rgba_png(p);
    CHECK_THROWS_WITH_AS(image::load_image(p), doctest::Contains("alpha"), FormatError);
}

TEST_CASE("unreadable file raises IoError") {
    CHECK_THROWS_AS(image::load_image(temp_dir() / "missing.png"), IoError);
}

TEST_CASE("save quantizes with round-half-away-from-zero") {
    // v=0.5 -> 127.5 -> byte 128.
    const auto img = image::constant_image(4, 4, 1, 0.5);
    const fs::path p = temp_dir() / "half.png";
    image::save_image(img, p);
    const auto back = image::load_image(p);
    for (const double v : back.data) CHECK(v == doctest::Approx(128.0 / 255.0));
}

TEST_CASE("all-zero image decodes to zeros") {
    const auto img = image::constant_image(4, 4, 1, 0.0);
    const fs::path p = temp_dir() / "zeros.png";
    image::save_image(img, p);
    const auto back = image::load_image(p);
    for (const double v : back.data) CHECK(v == 0.0);
}

TEST_CASE("load/save round trip is lossless at 8 bits") {
    SplitMix64 rng(42);
    const fs::path p = temp_dir() / "roundtrip.png";
    const fs::path p2 = temp_dir() / "roundtrip2.png";
    for (int trial = 0; trial < 100; ++trial) {
        const int h = 1 + static_cast<int>(rng.next_below(16));
        const int w = 1 + static_cast<int>(rng.next_below(16));
        const int c = rng.next_below(2) == 0 ? 1 : 3;
        // Start from exact 8-bit values so the trip is lossless.
        std::vector<double> data(static_cast<size_t>(h) * w * c);
        for (double& v : data) v = static_cast<double>(rng.next_below(256)) / 255.0;
        const auto img = image::make_image(h, w, c, std::move(data));

        image::save_image(img, p);
        const auto back = image::load_image(p);
        REQUIRE(back.height == h);
        REQUIRE(back.width == w);
        REQUIRE(back.channels == c);
        for (size_t i = 0; i < img.data.size(); ++i) CHECK(back.data[i] == img.data[i]);

        // Deterministic bytes for identical input.
        image::save_image(back, p2);
        CHECK(file_bytes(p) == file_bytes(p2));
    }
}

TEST_CASE("grayscale uses luma weights") {
    auto rgb = [](double r, double g, double b) {
        return image::make_image(1, 1, 3, {r, g, b});
    };
    CHECK(image::to_grayscale(rgb(1, 1, 1)).data[0] == doctest::Approx(1.0));
    CHECK(image::to_grayscale(rgb(1, 0, 0)).data[0] == doctest::Approx(0.299));
    CHECK(image::to_grayscale(rgb(0, 1, 0)).data[0] == doctest::Approx(0.587));
    CHECK(image::to_grayscale(rgb(0, 0, 1)).data[0] == doctest::Approx(0.114));
}

TEST_CASE("grayscale is the identity on gray input and idempotent") {
    SplitMix64 rng(7);
    const auto gray = oracles::random_image(rng, 9, 5);
    const auto once = image::to_grayscale(gray);
    CHECK(once.data == gray.data);
    const auto rgbish = oracles::random_image(rng, 6, 6, 3);
    const auto g1 = image::to_grayscale(rgbish);
    const auto g2 = image::to_grayscale(g1);
    CHECK(g1.data == g2.data);
}

TEST_CASE("resize to identical size is the identity") {
    SplitMix64 rng(3);
    const auto img = oracles::random_image(rng, 13, 7, 3);
    const auto out = image::resize(img, 13, 7);
    CHECK(out.data == img.data);
}

TEST_CASE("resize of a constant image is constant") {
    const auto img = image::constant_image(5, 9, 1, 0.7);
    for (const auto [h, w] : {std::pair{3, 4}, {17, 2}, {64, 64}}) {
        const auto out = image::resize(img, h, w);
        for (const double v : out.data) CHECK(v == doctest::Approx(0.7));
    }
}

TEST_CASE("2x2 checkerboard upsized to 4x4: frozen center values") {
    // Half-pixel-center bilinear on {0,1;1,0}: the four center pixels sample
    // (0.25,0.25) etc. of f(y,x) = x + y - 2xy.
    const auto img = image::make_image(2, 2, 1, {0, 1, 1, 0});
    const auto out = image::resize(img, 4, 4);
    CHECK(out.at(1, 1) == doctest::Approx(0.375));
    CHECK(out.at(1, 2) == doctest::Approx(0.625));
    CHECK(out.at(2, 1) == doctest::Approx(0.625));
    CHECK(out.at(2, 2) == doctest::Approx(0.375));
}

TEST_CASE("resize matches the independent reference implementation") {
    SplitMix64 rng(11);
    for (int trial = 0; trial < 25; ++trial) {
        const int h = 2 + static_cast<int>(rng.next_below(14));
        const int w = 2 + static_cast<int>(rng.next_below(14));
        const int oh = 1 + static_cast<int>(rng.next_below(24));
        const int ow = 1 + static_cast<int>(rng.next_below(24));
        const auto img = oracles::random_image(rng, h, w);
        const auto got = image::resize(img, oh, ow);
        const auto want = oracles::reference_bilinear(img, oh, ow);
        REQUIRE(got.data.size() == want.data.size());
        for (size_t i = 0; i < got.data.size(); ++i)
            CHECK(got.data[i] == doctest::Approx(want.data[i]).epsilon(1e-12));
    }
}

TEST_CASE("resize preserves the range envelope") {
    SplitMix64 rng(19);
    for (int trial = 0; trial < 20; ++trial) {
        const auto img = oracles::random_image(rng, 8, 8);
        const auto [in_min, in_max] =
            std::minmax_element(img.data.begin(), img.data.end());
        const double lo = *in_min, hi = *in_max;
        const auto out = image::resize(img, 21, 5);
        for (const double v : out.data) {
            CHECK(v >= lo - 1e-6);
            CHECK(v <= hi + 1e-6);
        }
    }
}

TEST_CASE("tensor invariants are enforced") {
    CHECK_THROWS_AS(image::make_image(0, 4, 1, {}), ParameterError);
    CHECK_THROWS_AS(image::make_image(1, 1, 2, {0.5, 0.5}), ParameterError);
    CHECK_THROWS_AS(image::make_image(1, 2, 1, {0.5}), ParameterError);
    CHECK_THROWS_AS(image::make_image(1, 1, 1, {1.5}), ParameterError);
    CHECK_THROWS_AS(image::make_image(1, 1, 1, {-0.1}), ParameterError);
}
