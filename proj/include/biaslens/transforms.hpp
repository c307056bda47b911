#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "biaslens/dwt.hpp"
#include "biaslens/image.hpp"

namespace biaslens::transforms {

using image::ImageTensor;

enum class Kind {
    Identity,
    CropBackground,
    FlipAugment,
    TileScramble,
    DftMagnitude,
    DwtCompose,
    MedianFilter,
    Compose,
};

enum class FlipMode { Horizontal, Vertical };

// Declarative description of one preprocessing condition. Serializes to
// the JSON object {"kind": "...", ...params}; see to_json/from_json.
struct TransformSpec {
    Kind kind = Kind::Identity;

    // crop_background
    int x0 = 0, y0 = 0, w = 0, h = 0;
    // flip_augment
    FlipMode flip_mode = FlipMode::Horizontal;
    // tile_scramble; per_image_seed: XOR the seed with a stable hash of the
    // image path when applied across a dataset, so each image draws its own
    // permutation. Off = one shared permutation for the whole dataset.
    int tile = 1;
    uint64_t seed = 0;
    bool per_image_seed = true;
    // dft_magnitude
    bool log_scale = true;
    bool center = true;
    // dwt_compose
    dwt::Family family = dwt::Family::Haar;
    int levels = 1;
    // median_filter
    int window = 5;
    // compose (applied left-to-right)
    std::vector<TransformSpec> steps;

    static TransformSpec identity();
    static TransformSpec crop_background(int x0, int y0, int w, int h);
    static TransformSpec flip_augment(FlipMode mode);
    static TransformSpec tile_scramble(int tile, uint64_t seed,
                                       bool per_image_seed = true);
    static TransformSpec dft_magnitude(bool log_scale = true, bool center = true);
    static TransformSpec dwt_compose(dwt::Family family, int levels = 1);
    static TransformSpec median_filter(int window);
    static TransformSpec compose(std::vector<TransformSpec> steps);
};

// Structural validation (window odd and >= 3, tile >= 1, compose non-empty
// with nesting depth <= 4, ...). Throws ParameterError.
void validate(const TransformSpec& spec);

nlohmann::json to_json(const TransformSpec& spec);
TransformSpec spec_from_json(const nlohmann::json& j);

// Short human-readable label, e.g. "tile_scramble(tile=16)".
std::string describe(const TransformSpec& spec);

// True when the chain destroys all object information: it contains a
// background crop or a single-pixel scramble. Above-chance accuracy under
// such a condition can only come from bias.
bool is_information_free(const TransformSpec& spec);

// --- individual operations -------------------------------------------------

ImageTensor crop_background(const ImageTensor& img, int x0, int y0, int w, int h);
ImageTensor flip_augment(const ImageTensor& img, FlipMode mode);

// Crops bottom/right remainder to a tile multiple, then permutes the tiles
// by Fisher-Yates on a SplitMix64 stream. Pixel values are relocated, never
// altered; the permutation depends only on (tile count, seed).
ImageTensor tile_scramble(const ImageTensor& img, int tile, uint64_t seed);

// Grayscale -> |DFT|, optional log(1+|F|), optional quadrant swap placing DC
// at the center, then per-image min-max rescale to [0,1].
ImageTensor dft_magnitude_image(const ImageTensor& img, bool log_scale, bool center);

// Grayscale -> multi-level DWT pyramid rendered as one image, each subband
// independently min-max rescaled to [0,1].
ImageTensor dwt_compose_image(const ImageTensor& img, dwt::Family family, int levels);

// Exact median over the window x window neighborhood, replicate padding,
// channels filtered independently.
ImageTensor median_filter(const ImageTensor& img, int window);

// Applies one spec. path_salt diversifies tile_scramble seeds per image
// (seed ^ salt) when the spec opts in; pass 0 for standalone use.
ImageTensor apply(const TransformSpec& spec, const ImageTensor& img,
                  uint64_t path_salt = 0);

}  // namespace biaslens::transforms
