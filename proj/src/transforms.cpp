#include "biaslens/transforms.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <set>

#include <nlohmann/json.hpp>

#include "biaslens/dft.hpp"
#include "biaslens/error.hpp"
#include "biaslens/rng.hpp"

namespace biaslens::transforms {

using nlohmann::json;

// --- spec construction and validation ---------------------------------------

TransformSpec TransformSpec::identity() {
    return {};
}

TransformSpec TransformSpec::crop_background(int x0, int y0, int w, int h) {
    TransformSpec s;
    s.kind = Kind::CropBackground;
    s.x0 = x0;
    s.y0 = y0;
    s.w = w;
    s.h = h;
    return s;
}

TransformSpec TransformSpec::flip_augment(FlipMode mode) {
    TransformSpec s;
    s.kind = Kind::FlipAugment;
    s.flip_mode = mode;
    return s;
}

TransformSpec TransformSpec::tile_scramble(int tile, uint64_t seed,
                                           bool per_image_seed) {
    TransformSpec s;
    s.kind = Kind::TileScramble;
    s.tile = tile;
    s.seed = seed;
    s.per_image_seed = per_image_seed;
    return s;
}

TransformSpec TransformSpec::dft_magnitude(bool log_scale, bool center) {
    TransformSpec s;
    s.kind = Kind::DftMagnitude;
    s.log_scale = log_scale;
    s.center = center;
    return s;
}

TransformSpec TransformSpec::dwt_compose(dwt::Family family, int levels) {
    TransformSpec s;
    s.kind = Kind::DwtCompose;
    s.family = family;
    s.levels = levels;
    return s;
}

TransformSpec TransformSpec::median_filter(int window) {
    TransformSpec s;
    s.kind = Kind::MedianFilter;
    s.window = window;
    return s;
}

TransformSpec TransformSpec::compose(std::vector<TransformSpec> steps) {
    TransformSpec s;
    s.kind = Kind::Compose;
    s.steps = std::move(steps);
    return s;
}

namespace {

constexpr int kMaxComposeDepth = 4;

void validate_rec(const TransformSpec& spec, int compose_depth) {
    switch (spec.kind) {
        case Kind::Identity:
        case Kind::FlipAugment:
        case Kind::DftMagnitude:
            break;
        case Kind::CropBackground:
            if (spec.w < 1 || spec.h < 1)
                throw ParameterError("crop_background needs w,h >= 1");
            if (spec.x0 < 0 || spec.y0 < 0)
                throw ParameterError("crop_background needs x0,y0 >= 0");
            break;
        case Kind::TileScramble:
            if (spec.tile < 1) throw ParameterError("tile_scramble tile must be >= 1");
            break;
        case Kind::DwtCompose:
            if (spec.levels < 1) throw ParameterError("dwt_compose levels must be >= 1");
            break;
        case Kind::MedianFilter:
            if (spec.window < 3 || spec.window % 2 == 0)
                throw ParameterError("median_filter window must be odd and >= 3, got " +
                                     std::to_string(spec.window));
            break;
        case Kind::Compose:
            if (spec.steps.empty()) throw ParameterError("compose list must be non-empty");
            if (compose_depth + 1 > kMaxComposeDepth)
                throw ParameterError("compose nesting depth exceeds " +
                                     std::to_string(kMaxComposeDepth));
            for (const auto& step : spec.steps) validate_rec(step, compose_depth + 1);
            break;
    }
}

}  // namespace

void validate(const TransformSpec& spec) {
    validate_rec(spec, 0);
}

// --- JSON --------------------------------------------------------------------

namespace {

const char* kind_name(Kind k) {
    switch (k) {
        case Kind::Identity: return "identity";
        case Kind::CropBackground: return "crop_background";
        case Kind::FlipAugment: return "flip_augment";
        case Kind::TileScramble: return "tile_scramble";
        case Kind::DftMagnitude: return "dft_magnitude";
        case Kind::DwtCompose: return "dwt_compose";
        case Kind::MedianFilter: return "median_filter";
        case Kind::Compose: return "compose";
    }
    return "?";
}

void require_keys(const json& j, const std::set<std::string>& allowed) {
    for (auto it = j.begin(); it != j.end(); ++it) {
        if (!allowed.contains(it.key()))
            throw ParameterError("unknown key '" + it.key() + "' in transform spec");
    }
}

}  // namespace

json to_json(const TransformSpec& spec) {
    json j;
    j["kind"] = kind_name(spec.kind);
    switch (spec.kind) {
        case Kind::Identity:
            break;
        case Kind::CropBackground:
            j["x0"] = spec.x0;
            j["y0"] = spec.y0;
            j["w"] = spec.w;
            j["h"] = spec.h;
            break;
        case Kind::FlipAugment:
            j["mode"] = spec.flip_mode == FlipMode::Horizontal ? "horizontal" : "vertical";
            break;
        case Kind::TileScramble:
            j["tile"] = spec.tile;
            j["seed"] = spec.seed;
            if (!spec.per_image_seed) j["per_image_seed"] = false;
            break;
        case Kind::DftMagnitude:
            j["log_scale"] = spec.log_scale;
            j["center"] = spec.center;
            break;
        case Kind::DwtCompose:
            j["family"] = spec.family == dwt::Family::Haar ? "haar" : "db4";
            j["levels"] = spec.levels;
            break;
        case Kind::MedianFilter:
            j["window"] = spec.window;
            break;
        case Kind::Compose: {
            json steps = json::array();
            for (const auto& s : spec.steps) steps.push_back(to_json(s));
            j["steps"] = steps;
            break;
        }
    }
    return j;
}

TransformSpec spec_from_json(const json& j) {
    if (!j.is_object() || !j.contains("kind") || !j["kind"].is_string())
        throw ParameterError("transform spec must be an object with a 'kind' string");
    const std::string kind = j["kind"].get<std::string>();
    TransformSpec s;

    if (kind == "identity") {
        require_keys(j, {"kind"});
        s.kind = Kind::Identity;
    } else if (kind == "crop_background") {
        require_keys(j, {"kind", "x0", "y0", "w", "h"});
        s.kind = Kind::CropBackground;
        s.x0 = j.value("x0", 0);
        s.y0 = j.value("y0", 0);
        s.w = j.at("w").get<int>();
        s.h = j.at("h").get<int>();
    } else if (kind == "flip_augment") {
        require_keys(j, {"kind", "mode"});
        s.kind = Kind::FlipAugment;
        const std::string mode = j.at("mode").get<std::string>();
        if (mode == "horizontal")
            s.flip_mode = FlipMode::Horizontal;
        else if (mode == "vertical")
            s.flip_mode = FlipMode::Vertical;
        else
            throw ParameterError("unknown flip mode '" + mode + "'");
    } else if (kind == "tile_scramble") {
        require_keys(j, {"kind", "tile", "seed", "per_image_seed"});
        s.kind = Kind::TileScramble;
        s.tile = j.at("tile").get<int>();
        s.seed = j.value("seed", uint64_t{0});
        s.per_image_seed = j.value("per_image_seed", true);
    } else if (kind == "dft_magnitude") {
        require_keys(j, {"kind", "log_scale", "center"});
        s.kind = Kind::DftMagnitude;
        s.log_scale = j.value("log_scale", true);
        s.center = j.value("center", true);
    } else if (kind == "dwt_compose") {
        require_keys(j, {"kind", "family", "levels"});
        s.kind = Kind::DwtCompose;
        const std::string family = j.value("family", "haar");
        if (family == "haar")
            s.family = dwt::Family::Haar;
        else if (family == "db4")
            s.family = dwt::Family::Daubechies4;
        else
            throw ParameterError("unknown wavelet family '" + family + "'");
        s.levels = j.value("levels", 1);
    } else if (kind == "median_filter") {
        require_keys(j, {"kind", "window"});
        s.kind = Kind::MedianFilter;
        s.window = j.value("window", 5);
    } else if (kind == "compose") {
        require_keys(j, {"kind", "steps"});
        s.kind = Kind::Compose;
        if (!j.contains("steps") || !j["steps"].is_array())
            throw ParameterError("compose spec needs a 'steps' array");
        for (const auto& step : j["steps"]) s.steps.push_back(spec_from_json(step));
    } else {
        throw ParameterError("unknown transform kind '" + kind + "'");
    }
    validate(s);
    return s;
}

std::string describe(const TransformSpec& spec) {
    switch (spec.kind) {
        case Kind::Identity: return "identity";
        case Kind::CropBackground:
            return "crop_background(" + std::to_string(spec.x0) + "," +
                   std::to_string(spec.y0) + "," + std::to_string(spec.w) + "x" +
                   std::to_string(spec.h) + ")";
        case Kind::FlipAugment:
            return spec.flip_mode == FlipMode::Horizontal ? "flip(horizontal)"
                                                          : "flip(vertical)";
        case Kind::TileScramble:
            return "tile_scramble(tile=" + std::to_string(spec.tile) + ")";
        case Kind::DftMagnitude: return "dft_magnitude";
        case Kind::DwtCompose:
            return std::string("dwt_compose(") +
                   (spec.family == dwt::Family::Haar ? "haar" : "db4") +
                   ",levels=" + std::to_string(spec.levels) + ")";
        case Kind::MedianFilter:
            return "median_filter(window=" + std::to_string(spec.window) + ")";
        case Kind::Compose: {
            std::string out = "[";
            for (size_t i = 0; i < spec.steps.size(); ++i) {
                if (i) out += " -> ";
                out += describe(spec.steps[i]);
            }
            return out + "]";
        }
    }
    return "?";
}

bool is_information_free(const TransformSpec& spec) {
    switch (spec.kind) {
        case Kind::CropBackground: return true;
        case Kind::TileScramble: return spec.tile == 1;
        case Kind::Compose:
            for (const auto& s : spec.steps)
                if (is_information_free(s)) return true;
            return false;
        default: return false;
    }
}

// --- operations --------------------------------------------------------------

ImageTensor crop_background(const ImageTensor& img, int x0, int y0, int w, int h) {
    if (x0 < 0 || y0 < 0 || w < 1 || h < 1)
        throw ParameterError("crop rectangle must have non-negative origin and positive size");
    if (x0 + w > img.width)
        throw BoundsError("crop exceeds right edge: x0+w=" + std::to_string(x0 + w) +
                          " > width=" + std::to_string(img.width));
    if (y0 + h > img.height)
        throw BoundsError("crop exceeds bottom edge: y0+h=" + std::to_string(y0 + h) +
                          " > height=" + std::to_string(img.height));

    ImageTensor out;
    out.height = h;
    out.width = w;
    out.channels = img.channels;
    out.data.resize(static_cast<size_t>(h) * w * img.channels);
    for (int y = 0; y < h; ++y) {
        const double* src = &img.data[((static_cast<size_t>(y0) + y) * img.width + x0) *
                                      img.channels];
        double* dst = &out.data[static_cast<size_t>(y) * w * img.channels];
        std::memcpy(dst, src, static_cast<size_t>(w) * img.channels * sizeof(double));
    }
    return out;
}

ImageTensor flip_augment(const ImageTensor& img, FlipMode mode) {
    ImageTensor out = img;
    if (mode == FlipMode::Horizontal) {
        for (int y = 0; y < img.height; ++y)
            for (int x = 0; x < img.width; ++x)
                for (int c = 0; c < img.channels; ++c)
                    out.at(y, x, c) = img.at(y, img.width - 1 - x, c);
    } else {
        for (int y = 0; y < img.height; ++y)
            for (int x = 0; x < img.width; ++x)
                for (int c = 0; c < img.channels; ++c)
                    out.at(y, x, c) = img.at(img.height - 1 - y, x, c);
    }
    return out;
}

ImageTensor tile_scramble(const ImageTensor& img, int tile, uint64_t seed) {
    if (tile < 1) throw ParameterError("tile_scramble tile must be >= 1");
    const int tiles_y = img.height / tile;
    const int tiles_x = img.width / tile;
    if (tiles_y == 0 || tiles_x == 0)
        throw DegenerateInputError("tile " + std::to_string(tile) +
                                   " larger than image " + std::to_string(img.height) +
                                   "x" + std::to_string(img.width));

    const int out_h = tiles_y * tile;
    const int out_w = tiles_x * tile;
    const auto perm =
        random_permutation(static_cast<size_t>(tiles_y) * tiles_x, seed);

    ImageTensor out;
    out.height = out_h;
    out.width = out_w;
    out.channels = img.channels;
    out.data.resize(static_cast<size_t>(out_h) * out_w * img.channels);
    for (int t = 0; t < tiles_y * tiles_x; ++t) {
        const int src = static_cast<int>(perm[t]);
        const int dy = (t / tiles_x) * tile;
        const int dx = (t % tiles_x) * tile;
        const int sy = (src / tiles_x) * tile;
        const int sx = (src % tiles_x) * tile;
        for (int y = 0; y < tile; ++y) {
            const double* s =
                &img.data[((static_cast<size_t>(sy) + y) * img.width + sx) * img.channels];
            double* d =
                &out.data[((static_cast<size_t>(dy) + y) * out_w + dx) * img.channels];
            std::memcpy(d, s, static_cast<size_t>(tile) * img.channels * sizeof(double));
        }
    }
    return out;
}

namespace {

Matrix to_matrix(const ImageTensor& gray) {
    Matrix m(gray.height, gray.width);
    m.v = gray.data;
    return m;
}

ImageTensor rescaled_image(const Matrix& m) {
    double lo = m.v[0], hi = m.v[0];
    for (const double v : m.v) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    ImageTensor out;
    out.height = m.rows;
    out.width = m.cols;
    out.channels = 1;
    out.data.resize(m.v.size());
    if (hi > lo) {
        for (size_t i = 0; i < m.v.size(); ++i)
            out.data[i] = std::clamp((m.v[i] - lo) / (hi - lo), 0.0, 1.0);
    }
    return out;
}

void rescale_block(Matrix& m, int r0, int r1, int c0, int c1) {
    double lo = m(r0, c0), hi = m(r0, c0);
    for (int r = r0; r < r1; ++r)
        for (int c = c0; c < c1; ++c) {
            lo = std::min(lo, m(r, c));
            hi = std::max(hi, m(r, c));
        }
    for (int r = r0; r < r1; ++r)
        for (int c = c0; c < c1; ++c)
            m(r, c) = hi > lo ? std::clamp((m(r, c) - lo) / (hi - lo), 0.0, 1.0) : 0.0;
}

}  // namespace

ImageTensor dft_magnitude_image(const ImageTensor& img, bool log_scale, bool center) {
    const Matrix m = to_matrix(image::to_grayscale(img));
    Matrix mag = dft::magnitude(m);
    if (log_scale)
        for (double& v : mag.v) v = std::log1p(v);
    if (center) {
        Matrix shifted(mag.rows, mag.cols);
        const int half_r = mag.rows / 2;
        const int half_c = mag.cols / 2;
        for (int u = 0; u < mag.rows; ++u)
            for (int v = 0; v < mag.cols; ++v)
                shifted((u + half_r) % mag.rows, (v + half_c) % mag.cols) = mag(u, v);
        mag = std::move(shifted);
    }
    return rescaled_image(mag);
}

ImageTensor dwt_compose_image(const ImageTensor& img, dwt::Family family, int levels) {
    Matrix coeffs = dwt::forward(to_matrix(image::to_grayscale(img)), family, levels);
    // Detail subbands carry far less energy than LL; per-subband rescaling
    // keeps them visible in the composite image.
    int r = coeffs.rows, c = coeffs.cols;
    for (int l = 0; l < levels; ++l) {
        rescale_block(coeffs, 0, r / 2, c / 2, c);      // LH
        rescale_block(coeffs, r / 2, r, 0, c / 2);      // HL
        rescale_block(coeffs, r / 2, r, c / 2, c);      // HH
        r /= 2;
        c /= 2;
    }
    rescale_block(coeffs, 0, r, 0, c);  // final LL
    ImageTensor out;
    out.height = coeffs.rows;
    out.width = coeffs.cols;
    out.channels = 1;
    out.data = std::move(coeffs.v);
    return out;
}

ImageTensor median_filter(const ImageTensor& img, int window) {
    if (window < 3 || window % 2 == 0)
        throw ParameterError("median window must be odd and >= 3, got " +
                             std::to_string(window));
    const int radius = window / 2;
    const size_t count = static_cast<size_t>(window) * window;

    ImageTensor out = img;
    std::vector<double> buf(count);
    for (int c = 0; c < img.channels; ++c) {
        for (int y = 0; y < img.height; ++y) {
            for (int x = 0; x < img.width; ++x) {
                size_t n = 0;
                for (int dy = -radius; dy <= radius; ++dy) {
                    const int yy = std::clamp(y + dy, 0, img.height - 1);
                    for (int dx = -radius; dx <= radius; ++dx) {
                        const int xx = std::clamp(x + dx, 0, img.width - 1);
                        buf[n++] = img.at(yy, xx, c);
                    }
                }
                auto mid = buf.begin() + count / 2;
                std::nth_element(buf.begin(), mid, buf.end());
                out.at(y, x, c) = *mid;
            }
        }
    }
    return out;
}

ImageTensor apply(const TransformSpec& spec, const ImageTensor& img,
                  uint64_t path_salt) {
    switch (spec.kind) {
        case Kind::Identity:
            return img;
        case Kind::CropBackground:
            return crop_background(img, spec.x0, spec.y0, spec.w, spec.h);
        case Kind::FlipAugment:
            return flip_augment(img, spec.flip_mode);
        case Kind::TileScramble:
            return tile_scramble(img, spec.tile,
                                 spec.per_image_seed ? (spec.seed ^ path_salt)
                                                     : spec.seed);
        case Kind::DftMagnitude:
            return dft_magnitude_image(img, spec.log_scale, spec.center);
        case Kind::DwtCompose:
            return dwt_compose_image(img, spec.family, spec.levels);
        case Kind::MedianFilter:
            return median_filter(img, spec.window);
        case Kind::Compose: {
            ImageTensor cur = img;
            for (const auto& step : spec.steps) cur = apply(step, cur, path_salt);
            return cur;
        }
    }
    throw ParameterError("unhandled transform kind");
}

}  // namespace biaslens::transforms
