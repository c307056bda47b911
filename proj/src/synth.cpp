#include "biaslens/synth.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <numbers>
#include <sstream>

#include <nlohmann/json.hpp>

#include "biaslens/error.hpp"
#include "biaslens/image_io.hpp"
#include "biaslens/parallel.hpp"
#include "biaslens/rng.hpp"

namespace biaslens::synth {

namespace fs = std::filesystem;
using nlohmann::json;

// --- shapes ------------------------------------------------------------------

namespace {

constexpr int kShapeCount = 16;

constexpr const char* kShapeNames[kShapeCount] = {
    "circle", "ring", "square", "frame", "diamond", "triangle", "pentagon",
    "hexagon", "octagon", "cross", "saltire", "hbar", "vbar", "star",
    "crescent", "tee"};

bool in_regular_polygon(double x, double y, int n, double phase) {
    // Intersection of n half-planes through the polygon edges (circumradius 1).
    const double apothem = std::cos(std::numbers::pi / n);
    for (int k = 0; k < n; ++k) {
        const double a = phase + (2.0 * std::numbers::pi * (k + 0.5)) / n;
        if (x * std::cos(a) + y * std::sin(a) > apothem) return false;
    }
    return true;
}

bool in_star5(double x, double y) {
    // Even-odd test against the 10-vertex star outline (R=1, r=0.45).
    double vx[10], vy[10];
    for (int k = 0; k < 10; ++k) {
        const double r = (k % 2 == 0) ? 1.0 : 0.45;
        const double a = -std::numbers::pi / 2 + k * std::numbers::pi / 5;
        vx[k] = r * std::cos(a);
        vy[k] = r * std::sin(a);
    }
    bool inside = false;
    for (int i = 0, j = 9; i < 10; j = i++) {
        if ((vy[i] > y) != (vy[j] > y) &&
            x < (vx[j] - vx[i]) * (y - vy[i]) / (vy[j] - vy[i]) + vx[i])
            inside = !inside;
    }
    return inside;
}

bool inside_unit(Shape s, double x, double y) {
    switch (s) {
        case Shape::Circle: return x * x + y * y <= 1.0;
        case Shape::Ring: {
            const double r2 = x * x + y * y;
            return r2 <= 1.0 && r2 >= 0.78 * 0.78;
        }
        case Shape::Square: return std::max(std::abs(x), std::abs(y)) <= 1.0;
        case Shape::Frame: {
            const double m = std::max(std::abs(x), std::abs(y));
            return m <= 1.0 && m >= 0.72;
        }
        case Shape::Diamond: return std::abs(x) + std::abs(y) <= 1.0;
        case Shape::Triangle:
            return in_regular_polygon(x, y, 3, -std::numbers::pi / 2);
        case Shape::Pentagon:
            return in_regular_polygon(x, y, 5, -std::numbers::pi / 2);
        case Shape::Hexagon: return in_regular_polygon(x, y, 6, 0.0);
        case Shape::Octagon:
            return in_regular_polygon(x, y, 8, std::numbers::pi / 8);
        case Shape::Cross:
            return (std::abs(x) <= 0.20 && std::abs(y) <= 1.0) ||
                   (std::abs(y) <= 0.20 && std::abs(x) <= 1.0);
        case Shape::Saltire: {
            const double c = std::numbers::sqrt2 / 2;
            const double u = c * (x + y), v = c * (y - x);
            return (std::abs(u) <= 0.20 && std::abs(v) <= 1.0) ||
                   (std::abs(v) <= 0.20 && std::abs(u) <= 1.0);
        }
        case Shape::HBar: return std::abs(y) <= 0.28 && std::abs(x) <= 1.0;
        case Shape::VBar: return std::abs(x) <= 0.28 && std::abs(y) <= 1.0;
        case Shape::Star: return in_star5(x, y);
        case Shape::Crescent: {
            const double dx = x - 0.45;
            return x * x + y * y <= 1.0 && dx * dx + y * y > 0.75 * 0.75;
        }
        case Shape::Tee:
            return (y >= -1.0 && y <= -0.56 && std::abs(x) <= 1.0) ||
                   (std::abs(x) <= 0.22 && y > -0.56 && y <= 1.0);
    }
    return false;
}

struct ShapeGeometry {
    double unit_area;    // area of the unit-scale glyph
    double unit_radius;  // bounding radius of the unit-scale glyph
};

// Estimated once on a fixed grid; deterministic.
const ShapeGeometry& geometry(Shape s) {
    static const auto table = [] {
        std::array<ShapeGeometry, kShapeCount> t{};
        constexpr int n = 512;
        constexpr double lim = 1.12;
        for (int si = 0; si < kShapeCount; ++si) {
            const Shape shape = static_cast<Shape>(si);
            double cell = (2.0 * lim / n) * (2.0 * lim / n);
            size_t hits = 0;
            double max_r2 = 0.0;
            for (int iy = 0; iy < n; ++iy) {
                const double y = -lim + (iy + 0.5) * (2.0 * lim / n);
                for (int ix = 0; ix < n; ++ix) {
                    const double x = -lim + (ix + 0.5) * (2.0 * lim / n);
                    if (inside_unit(shape, x, y)) {
                        ++hits;
                        max_r2 = std::max(max_r2, x * x + y * y);
                    }
                }
            }
            t[si].unit_area = static_cast<double>(hits) * cell;
            t[si].unit_radius = std::sqrt(max_r2) + 2.0 * lim / n;
        }
        return t;
    }();
    return table[static_cast<int>(s)];
}

uint64_t scramble64(uint64_t x) {
    return SplitMix64(x).next_u64();
}

// The user seed is scrambled before mixing so that nearby seeds (or small
// indices) never alias into overlapping item streams.
uint64_t item_seed(uint64_t seed, int cls, int idx) {
    return scramble64(scramble64(seed) ^ (static_cast<uint64_t>(cls + 1) << 40) ^
                      static_cast<uint64_t>(idx));
}

}  // namespace

const char* shape_name(Shape s) {
    return kShapeNames[static_cast<int>(s)];
}

Shape shape_from_name(const std::string& name) {
    for (int i = 0; i < kShapeCount; ++i)
        if (name == kShapeNames[i]) return static_cast<Shape>(i);
    std::string known;
    for (int i = 0; i < kShapeCount; ++i) {
        if (i) known += ", ";
        known += kShapeNames[i];
    }
    throw ParameterError("unknown shape '" + name + "' (known: " + known + ")");
}

// --- validation / JSON ----------------------------------------------------------

void validate(const SynthSpec& spec) {
    if (spec.num_classes < 2 || spec.num_classes > 20)
        throw ParameterError("num_classes must be in [2,20]");
    if (static_cast<int>(spec.shapes.size()) < spec.num_classes)
        throw ParameterError("need at least num_classes shapes, got " +
                             std::to_string(spec.shapes.size()));
    if (spec.per_class < 10) throw ParameterError("per_class must be >= 10");
    if (spec.image_h < 32 || spec.image_w < 32)
        throw ParameterError("image_size must be at least 32x32");
    if (spec.background_level < 0 || spec.background_level > 1)
        throw ParameterError("background_level must be in [0,1]");
    if (spec.foreground_level < 0 || spec.foreground_level > 1)
        throw ParameterError("foreground_level must be in [0,1]");
    if (spec.foreground_jitter < 0 || spec.foreground_jitter > 0.2)
        throw ParameterError("foreground_jitter must be in [0,0.2]");
    if (!spec.foreground_levels.empty()) {
        if (static_cast<int>(spec.foreground_levels.size()) != spec.num_classes)
            throw ParameterError("foreground_levels must list one level per class");
        for (const double f : spec.foreground_levels)
            if (f < 0 || f > 1)
                throw ParameterError("foreground_levels entries must be in [0,1]");
    }
    if (spec.noise_amplitude < 0 || spec.noise_amplitude > 0.5)
        throw ParameterError("noise_amplitude must be in [0,0.5]");
    if (spec.base_radius_frac <= 0 || spec.base_radius_frac > 0.35)
        throw ParameterError("base_radius_frac must be in (0,0.35]");
    if (spec.jitter.position < 0 || spec.jitter.scale < 0 ||
        spec.jitter.scale >= 1 || spec.jitter.rotation_deg < 0)
        throw ParameterError("jitter ranges must be non-negative (scale < 1)");
    double sum = 0;
    for (const double f : spec.split_fractions) {
        if (f <= 0) throw ParameterError("split_fractions must be positive");
        sum += f;
    }
    if (std::abs(sum - 1.0) > 1e-9)
        throw ParameterError("split_fractions must sum to 1");
}

void validate(const BiasSpec& bias) {
    if (bias.strength < 0 || bias.strength > 1)
        throw ParameterError("strength must be in [0,1]");
    if (bias.watermark_span < 0 || bias.watermark_span > 0.5)
        throw ParameterError("watermark_span must be in [0,0.5]");
    if (bias.texture_amplitude < 0 || bias.texture_amplitude > 0.5)
        throw ParameterError("texture_amplitude must be in [0,0.5]");
    if (bias.dc_span < 0 || bias.dc_span > 0.5)
        throw ParameterError("dc_span must be in [0,0.5]");
}

json synth_to_json(const SynthSpec& spec) {
    json shapes = json::array();
    for (const Shape s : spec.shapes) shapes.push_back(shape_name(s));
    json j{{"num_classes", spec.num_classes},
                {"per_class", spec.per_class},
                {"image_size", {spec.image_h, spec.image_w}},
                {"shapes", shapes},
                {"jitter",
                 {{"position", spec.jitter.position},
                  {"scale", spec.jitter.scale},
                  {"rotation_deg", spec.jitter.rotation_deg}}},
                {"background_level", spec.background_level},
                {"foreground_level", spec.foreground_level},
                {"foreground_jitter", spec.foreground_jitter},
                {"noise_amplitude", spec.noise_amplitude},
                {"base_radius_frac", spec.base_radius_frac},
                {"split_fractions", spec.split_fractions},
                {"seed", spec.seed}};
    if (!spec.foreground_levels.empty())
        j["foreground_levels"] = spec.foreground_levels;
    return j;
}

SynthSpec synth_from_json(const json& j) {
    SynthSpec s;
    s.num_classes = j.at("num_classes").get<int>();
    s.per_class = j.at("per_class").get<int>();
    if (j.contains("image_size")) {
        s.image_h = j["image_size"].at(0).get<int>();
        s.image_w = j["image_size"].at(1).get<int>();
    }
    s.shapes.clear();
    for (const auto& name : j.at("shapes"))
        s.shapes.push_back(shape_from_name(name.get<std::string>()));
    if (j.contains("jitter")) {
        const auto& jj = j["jitter"];
        s.jitter.position = jj.value("position", s.jitter.position);
        s.jitter.scale = jj.value("scale", s.jitter.scale);
        s.jitter.rotation_deg = jj.value("rotation_deg", s.jitter.rotation_deg);
    }
    s.background_level = j.value("background_level", s.background_level);
    s.foreground_level = j.value("foreground_level", s.foreground_level);
    if (j.contains("foreground_levels"))
        s.foreground_levels = j["foreground_levels"].get<std::vector<double>>();
    s.foreground_jitter = j.value("foreground_jitter", s.foreground_jitter);
    s.noise_amplitude = j.value("noise_amplitude", s.noise_amplitude);
    s.base_radius_frac = j.value("base_radius_frac", s.base_radius_frac);
    if (j.contains("split_fractions")) {
        const auto& f = j["split_fractions"];
        s.split_fractions = {f.at(0).get<double>(), f.at(1).get<double>(),
                             f.at(2).get<double>()};
    }
    s.seed = j.value("seed", s.seed);
    validate(s);
    return s;
}

json bias_to_json(const BiasSpec& bias) {
    const char* kind = "none";
    switch (bias.kind) {
        case BiasKind::None: kind = "none"; break;
        case BiasKind::CornerWatermark: kind = "corner_watermark"; break;
        case BiasKind::NoiseSignature: kind = "noise_signature"; break;
        case BiasKind::DcOffset: kind = "dc_offset"; break;
    }
    json j{{"kind", kind}, {"strength", bias.strength}};
    if (bias.kind == BiasKind::CornerWatermark) j["watermark_span"] = bias.watermark_span;
    if (bias.kind == BiasKind::NoiseSignature)
        j["texture_amplitude"] = bias.texture_amplitude;
    if (bias.kind == BiasKind::DcOffset) j["dc_span"] = bias.dc_span;
    return j;
}

BiasSpec bias_from_json(const json& j) {
    BiasSpec b;
    const std::string kind = j.at("kind").get<std::string>();
    if (kind == "none")
        b.kind = BiasKind::None;
    else if (kind == "corner_watermark")
        b.kind = BiasKind::CornerWatermark;
    else if (kind == "noise_signature")
        b.kind = BiasKind::NoiseSignature;
    else if (kind == "dc_offset")
        b.kind = BiasKind::DcOffset;
    else
        throw ParameterError("unknown bias kind '" + kind + "'");
    b.strength = j.value("strength", b.kind == BiasKind::None ? 0.0 : 1.0);
    b.watermark_span = j.value("watermark_span", b.watermark_span);
    b.texture_amplitude = j.value("texture_amplitude", b.texture_amplitude);
    b.dc_span = j.value("dc_span", b.dc_span);
    if (b.kind == BiasKind::None) b.strength = 0.0;
    validate(b);
    return b;
}

// --- rendering ----------------------------------------------------------------

namespace {

// Fixed 6x6 watermark mask (a filled block with clipped corners, like a
// stamped device mark), anchored at (4,4) inside the probe corner.
constexpr int kWatermarkY = 4;
constexpr int kWatermarkX = 4;
constexpr uint8_t kWatermarkMask[6][6] = {
    {0, 1, 1, 1, 1, 0}, {1, 1, 1, 1, 1, 1}, {1, 1, 1, 1, 1, 1},
    {1, 1, 1, 1, 1, 1}, {1, 1, 1, 1, 1, 1}, {0, 1, 1, 1, 1, 0},
};

// Per-class additive deltas spread evenly over +-span.
double class_delta(int cls, int num_classes, double span) {
    if (num_classes < 2) return 0.0;
    return span * (2.0 * cls / (num_classes - 1) - 1.0);
}

// Per-class session texture in [-1,1], independent of item streams. Smooth
// (low-frequency) like lighting drift: i.i.d. values on a coarse grid,
// bilinearly upsampled, so mild spatial filtering cannot strip it.
std::vector<double> class_texture(uint64_t seed, int cls, int h, int w) {
    SplitMix64 rng(scramble64(seed ^ 0x5445585455524501ULL ^
                              (static_cast<uint64_t>(cls) << 32)));
    constexpr int kCell = 8;
    const int gh = h / kCell + 2;
    const int gw = w / kCell + 2;
    std::vector<double> grid(static_cast<size_t>(gh) * gw);
    for (double& v : grid) v = rng.next_double(-1.0, 1.0);

    std::vector<double> t(static_cast<size_t>(h) * w);
    for (int y = 0; y < h; ++y) {
        const double gy = static_cast<double>(y) / kCell;
        const int y0 = static_cast<int>(gy);
        const double fy = gy - y0;
        for (int x = 0; x < w; ++x) {
            const double gx = static_cast<double>(x) / kCell;
            const int x0 = static_cast<int>(gx);
            const double fx = gx - x0;
            const double top = grid[static_cast<size_t>(y0) * gw + x0] * (1 - fx) +
                               grid[static_cast<size_t>(y0) * gw + x0 + 1] * fx;
            const double bot =
                grid[static_cast<size_t>(y0 + 1) * gw + x0] * (1 - fx) +
                grid[static_cast<size_t>(y0 + 1) * gw + x0 + 1] * fx;
            t[static_cast<size_t>(y) * w + x] = top * (1 - fy) + bot * fy;
        }
    }
    return t;
}

}  // namespace

image::ImageTensor render_item(const SynthSpec& spec, const BiasSpec& bias, int cls,
                               int idx, GenerateStats* stats) {
    const int h = spec.image_h, w = spec.image_w;
    SplitMix64 rng(item_seed(spec.seed, cls, idx));

    // Geometry draws come first and in fixed order so that the bias channel
    // never shifts the rendering stream.
    const double base_radius = spec.base_radius_frac * std::min(h, w);
    const double base_area = std::numbers::pi * base_radius * base_radius;
    const double area =
        base_area * (1.0 + rng.next_double(-spec.jitter.scale, spec.jitter.scale));
    const double rot_range = spec.jitter.rotation_deg * std::numbers::pi / 180.0;
    const double theta = rng.next_double(-rot_range, rot_range);
    const double jy = rng.next_double(-spec.jitter.position, spec.jitter.position);
    const double jx = rng.next_double(-spec.jitter.position, spec.jitter.position);
    const double fg_base = spec.foreground_levels.empty()
                               ? spec.foreground_level
                               : spec.foreground_levels[cls];
    const double fg = std::clamp(
        fg_base + rng.next_double(-spec.foreground_jitter, spec.foreground_jitter),
        0.0, 1.0);

    const Shape shape = spec.shapes[cls];
    const auto& geo = geometry(shape);
    const double scale = std::sqrt(area / geo.unit_area);
    const double bound = scale * geo.unit_radius;

    // Nominal center keeps the glyph clear of the probe corner and the
    // borders; jitter is clamped back into the legal band.
    if (2.0 * bound > h || 2.0 * bound > w)
        throw ParameterError("glyph (extent " + std::to_string(2 * bound) +
                             "px) larger than " + std::to_string(h) + "x" +
                             std::to_string(w) + " image");
    double cy = std::clamp((h + kProbeSize) / 2.0 + jy, bound, h - bound);
    double cx = std::clamp((w + kProbeSize) / 2.0 + jx, bound, w - bound);
    if (cy - bound < kProbeSize && cx - bound < kProbeSize)
        throw ParameterError("glyph (extent " + std::to_string(2 * bound) +
                             "px) too large for " + std::to_string(h) + "x" +
                             std::to_string(w) + " image with a clear " +
                             std::to_string(kProbeSize) + "px probe corner");

    std::vector<double> pix(static_cast<size_t>(h) * w, spec.background_level);

    // Anti-aliased glyph rasterization, 4x4 coverage subsampling.
    const double cos_t = std::cos(-theta), sin_t = std::sin(-theta);
    const int y0 = std::max(0, static_cast<int>(std::floor(cy - bound - 1)));
    const int y1 = std::min(h - 1, static_cast<int>(std::ceil(cy + bound + 1)));
    const int x0 = std::max(0, static_cast<int>(std::floor(cx - bound - 1)));
    const int x1 = std::min(w - 1, static_cast<int>(std::ceil(cx + bound + 1)));
    const double fg_delta = fg - spec.background_level;
    for (int y = y0; y <= y1; ++y) {
        for (int x = x0; x <= x1; ++x) {
            int hits = 0;
            for (int sy = 0; sy < 4; ++sy) {
                for (int sx = 0; sx < 4; ++sx) {
                    const double py = (y + (sy + 0.5) / 4.0 - cy) / scale;
                    const double px = (x + (sx + 0.5) / 4.0 - cx) / scale;
                    const double qx = cos_t * px - sin_t * py;
                    const double qy = sin_t * px + cos_t * py;
                    if (inside_unit(shape, qx, qy)) ++hits;
                }
            }
            if (hits)
                pix[static_cast<size_t>(y) * w + x] += fg_delta * hits / 16.0;
        }
    }

    // Pixel noise over the whole image, then clamp: this is the bias-free
    // base image.
    for (double& v : pix) {
        v = std::clamp(
            v + rng.next_double(-spec.noise_amplitude, spec.noise_amplitude), 0.0,
            1.0);
    }

    // Additive bias on top; clamping here is counted, because it erodes the
    // declared strength semantics.
    size_t clamped = 0;
    if (bias.kind != BiasKind::None && bias.strength > 0.0) {
        auto add = [&](size_t p, double delta) {
            const double v = pix[p] + delta;
            if (v < 0.0 || v > 1.0) ++clamped;
            pix[p] = std::clamp(v, 0.0, 1.0);
        };
        switch (bias.kind) {
            case BiasKind::CornerWatermark: {
                const double delta =
                    bias.strength *
                    class_delta(cls, spec.num_classes, bias.watermark_span);
                for (int y = 0; y < 6; ++y)
                    for (int x = 0; x < 6; ++x)
                        if (kWatermarkMask[y][x])
                            add(static_cast<size_t>(kWatermarkY + y) * w +
                                    (kWatermarkX + x),
                                delta);
                break;
            }
            case BiasKind::NoiseSignature: {
                const auto texture = class_texture(spec.seed, cls, h, w);
                const double amp = bias.strength * bias.texture_amplitude;
                for (size_t p = 0; p < pix.size(); ++p) add(p, amp * texture[p]);
                break;
            }
            case BiasKind::DcOffset: {
                const double delta =
                    bias.strength * bias.dc_span * cls /
                    std::max(1, spec.num_classes - 1);
                for (size_t p = 0; p < pix.size(); ++p) add(p, delta);
                break;
            }
            case BiasKind::None: break;
        }
    }
    if (stats) {
        stats->clamped_pixels += clamped;
        stats->total_pixels += pix.size();
    }
    return image::make_image(h, w, 1, std::move(pix));
}

dataset::LabeledDataset generate(const SynthSpec& spec, const BiasSpec& bias,
                                 const fs::path& out_root, GenerateStats* stats) {
    validate(spec);
    validate(bias);

    dataset::LabeledDataset ds;
    ds.root = out_root;
    fs::create_directories(out_root);
    bool duplicate_shapes = false;
    for (int a = 0; a < spec.num_classes; ++a)
        for (int b = a + 1; b < spec.num_classes; ++b)
            duplicate_shapes |= spec.shapes[a] == spec.shapes[b];
    for (int c = 0; c < spec.num_classes; ++c) {
        std::string name = shape_name(spec.shapes[c]);
        if (duplicate_shapes) name = "c" + std::to_string(c) + "_" + name;
        ds.class_names.push_back(name);
        fs::create_directories(out_root / ds.class_names.back());
    }

    // Exact per-class split counts from the fractions, assigned through a
    // seeded shuffle of the class indices.
    const int n = spec.per_class;
    const int n_train =
        static_cast<int>(std::lround(spec.split_fractions[0] * n));
    const int n_val = static_cast<int>(std::lround(spec.split_fractions[1] * n));
    if (n_train < 1 || n_val < 1 || n_train + n_val >= n)
        throw ParameterError("split_fractions leave an empty split for per_class=" +
                             std::to_string(n));

    std::vector<dataset::Split> split_of(static_cast<size_t>(spec.num_classes) * n);
    for (int c = 0; c < spec.num_classes; ++c) {
        std::vector<int> order(n);
        for (int i = 0; i < n; ++i) order[i] = i;
        SplitMix64 rng(scramble64(spec.seed ^ 0x53504C4954535F01ULL ^
                                  (static_cast<uint64_t>(c) << 32)));
        fisher_yates_shuffle(order, rng);
        for (int i = 0; i < n; ++i) {
            auto& s = split_of[static_cast<size_t>(c) * n + order[i]];
            s = i < n_train ? dataset::Split::Train
                            : (i < n_train + n_val ? dataset::Split::Val
                                                   : dataset::Split::Test);
        }
    }

    ds.items.resize(static_cast<size_t>(spec.num_classes) * n);
    std::atomic<size_t> clamped{0}, total{0};
    parallel_for(ds.items.size(), 0, [&](size_t i) {
        const int c = static_cast<int>(i) / n;
        const int idx = static_cast<int>(i) % n;
        GenerateStats local;
        const auto img = render_item(spec, bias, c, idx, &local);
        char name[32];
        std::snprintf(name, sizeof(name), "%04d.png", idx);
        dataset::Item item;
        item.rel_path = ds.class_names[c] + "/" + name;
        item.class_id = c;
        item.split = split_of[i];
        image::save_image(img, out_root / item.rel_path);
        ds.items[i] = std::move(item);
        clamped += local.clamped_pixels;
        total += local.total_pixels;
    });

    if (stats) {
        stats->clamped_pixels = clamped.load();
        stats->total_pixels = total.load();
    }

    json extra;
    extra["seed"] = spec.seed;
    extra["synth_spec"] = synth_to_json(spec);
    extra["bias_spec"] = bias_to_json(bias);
    extra["generator_stats"] = {{"clamped_pixels", clamped.load()},
                                {"total_pixels", total.load()}};
    ds.set_manifest_extra(std::move(extra));
    dataset::write_manifest(ds);
    return ds;
}

DatasetSummary describe(const dataset::LabeledDataset& ds) {
    DatasetSummary s;
    s.total = static_cast<int>(ds.items.size());
    s.classes.resize(ds.class_names.size());
    for (size_t c = 0; c < ds.class_names.size(); ++c)
        s.classes[c].name = ds.class_names[c];

    std::vector<double> sum(ds.class_names.size(), 0.0);
    std::vector<double> sum_sq(ds.class_names.size(), 0.0);
    std::vector<size_t> pixels(ds.class_names.size(), 0);
    for (const auto& item : ds.items) {
        auto& cls = s.classes[item.class_id];
        ++cls.count;
        switch (item.split) {
            case dataset::Split::Train: ++cls.train; break;
            case dataset::Split::Val: ++cls.val; break;
            case dataset::Split::Test: ++cls.test; break;
        }
        const auto img = dataset::load_item(ds, item);
        s.size_histogram[std::to_string(img.height) + "x" +
                         std::to_string(img.width)]++;
        for (const double v : img.data) {
            sum[item.class_id] += v;
            sum_sq[item.class_id] += v * v;
        }
        pixels[item.class_id] += img.data.size();
    }
    for (size_t c = 0; c < s.classes.size(); ++c) {
        if (pixels[c] == 0) continue;
        const double mean = sum[c] / pixels[c];
        s.classes[c].mean = mean;
        s.classes[c].stddev = std::sqrt(std::max(0.0, sum_sq[c] / pixels[c] - mean * mean));
    }
    return s;
}

std::string format_summary(const DatasetSummary& s) {
    std::ostringstream out;
    out << "items: " << s.total << "\n";
    out << "class               count  train  val  test   mean    std\n";
    for (const auto& c : s.classes) {
        char line[128];
        std::snprintf(line, sizeof(line), "%-18s %6d %6d %4d %5d  %.4f  %.4f\n",
                      c.name.c_str(), c.count, c.train, c.val, c.test, c.mean,
                      c.stddev);
        out << line;
    }
    out << "sizes:";
    for (const auto& [size, count] : s.size_histogram)
        out << " " << size << "=" << count;
    out << "\n";
    return out.str();
}

}  // namespace biaslens::synth
