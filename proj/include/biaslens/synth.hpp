#pragma once

#include <array>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "biaslens/dataset.hpp"

namespace biaslens::synth {

// Foreground glyphs. Scale is normalized per shape so that, for a given
// target area, every shape covers the same expected pixel count: without
// that, a fully scrambled image would still leak the class through its
// pixel-value histogram and the ground truth of "information-free"
// conditions would be lost.
enum class Shape {
    Circle, Ring, Square, Frame, Diamond, Triangle, Pentagon, Hexagon,
    Octagon, Cross, Saltire, HBar, VBar, Star, Crescent, Tee,
};

const char* shape_name(Shape s);
Shape shape_from_name(const std::string& name);

struct JitterSpec {
    double position = 4.0;        // +- pixels, uniform
    double scale = 0.2;           // +- fraction of the target glyph area
    double rotation_deg = 15.0;   // +- degrees, uniform
};

struct SynthSpec {
    int num_classes = 5;
    int per_class = 100;
    int image_h = 64;
    int image_w = 64;
    std::vector<Shape> shapes;  // one glyph per class; size >= num_classes
    JitterSpec jitter;
    double background_level = 0.35;
    double foreground_level = 0.85;
    // Optional per-class glyph brightness (classes may share a shape and
    // differ photometrically); empty = foreground_level for every class.
    std::vector<double> foreground_levels;
    double foreground_jitter = 0.0;  // +- per-image foreground level draw
    double noise_amplitude = 0.03;   // i.i.d. uniform +- amplitude per pixel
    double base_radius_frac = 0.15;  // nominal glyph radius / min(image dim)
    std::array<double, 3> split_fractions = {0.70, 0.15, 0.15};
    uint64_t seed = 1;
};

enum class BiasKind { None, CornerWatermark, NoiseSignature, DcOffset };

// Injectable capture-bias channel. All signals are additive on top of the
// bias-free rendering, so strength 0 is pixel-identical to kind None under
// the same seed.
struct BiasSpec {
    BiasKind kind = BiasKind::None;
    double strength = 0.0;        // in [0,1], scales the whole signal
    double watermark_span = 0.3;  // CornerWatermark: class deltas spread over +-span
    double texture_amplitude = 0.1;  // NoiseSignature: texture amplitude
    double dc_span = 0.25;           // DcOffset: shift of the last class
};

void validate(const SynthSpec& spec);
void validate(const BiasSpec& bias);

nlohmann::json synth_to_json(const SynthSpec& spec);
SynthSpec synth_from_json(const nlohmann::json& j);
nlohmann::json bias_to_json(const BiasSpec& bias);
BiasSpec bias_from_json(const nlohmann::json& j);

// Top-left region that must stay glyph-free; the audit's crop probe.
inline constexpr int kProbeSize = 20;

struct GenerateStats {
    size_t clamped_pixels = 0;  // bias pushed a value outside [0,1]
    size_t total_pixels = 0;
};

// Renders the dataset under out_root (standard layout + manifest.json) and
// returns it. Deterministic per (spec, bias, seed).
dataset::LabeledDataset generate(const SynthSpec& spec, const BiasSpec& bias,
                                 const std::filesystem::path& out_root,
                                 GenerateStats* stats = nullptr);

// Renders one image without touching the filesystem (class `cls`, index
// `idx` within the class). Exposed for statistical tests.
image::ImageTensor render_item(const SynthSpec& spec, const BiasSpec& bias, int cls,
                               int idx, GenerateStats* stats = nullptr);

struct ClassSummary {
    std::string name;
    int count = 0;
    int train = 0, val = 0, test = 0;
    double mean = 0.0;
    double stddev = 0.0;
};

struct DatasetSummary {
    int total = 0;
    std::vector<ClassSummary> classes;
    std::map<std::string, int> size_histogram;  // "HxW" -> count
};

DatasetSummary describe(const dataset::LabeledDataset& ds);
std::string format_summary(const DatasetSummary& s);

}  // namespace biaslens::synth
