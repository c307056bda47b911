#include "biaslens/audit.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "biaslens/error.hpp"
#include "biaslens/parallel.hpp"
#include "biaslens/stats.hpp"
#include "biaslens/version.hpp"

namespace biaslens::audit {

namespace fs = std::filesystem;
using nlohmann::json;
using transforms::Kind;
using transforms::TransformSpec;

std::vector<Condition> default_conditions(uint64_t seed) {
    const auto crop20 = TransformSpec::crop_background(0, 0, 20, 20);
    const auto fourier = TransformSpec::dft_magnitude();
    const auto haar = TransformSpec::dwt_compose(dwt::Family::Haar, 1);
    const auto db4 = TransformSpec::dwt_compose(dwt::Family::Daubechies4, 1);
    const auto median5 = TransformSpec::median_filter(5);

    std::vector<Condition> c;
    c.push_back({"raw", TransformSpec::identity()});
    c.push_back({"cropped20", crop20});
    c.push_back({"scrambled@1", TransformSpec::tile_scramble(1, seed)});
    c.push_back({"scrambled@16", TransformSpec::tile_scramble(16, seed)});
    c.push_back({"scrambled@32", TransformSpec::tile_scramble(32, seed)});
    c.push_back({"fourier", fourier});
    c.push_back({"dwt_haar", haar});
    c.push_back({"dwt_db4", db4});
    c.push_back({"median5", median5});
    c.push_back({"median5+fourier", TransformSpec::compose({median5, fourier})});
    c.push_back({"median5+dwt_haar", TransformSpec::compose({median5, haar})});
    c.push_back({"cropped20+fourier", TransformSpec::compose({crop20, fourier})});
    c.push_back({"cropped20+dwt_haar", TransformSpec::compose({crop20, haar})});
    c.push_back({"cropped20+dwt_db4", TransformSpec::compose({crop20, db4})});
    c.push_back({"cropped20+median5", TransformSpec::compose({crop20, median5})});
    c.push_back({"cropped20+median5+fourier",
                 TransformSpec::compose({crop20, median5, fourier})});
    c.push_back({"cropped20+median5+dwt_haar",
                 TransformSpec::compose({crop20, median5, haar})});
    return c;
}

void validate(const AuditConfig& cfg) {
    if (!(cfg.alpha > 0.0 && cfg.alpha < 1.0))
        throw ParameterError("alpha must be in (0,1)");
    if (!(cfg.ratio_threshold > 1.0))
        throw ParameterError("ratio_threshold must be > 1");
    if (cfg.seeds.empty()) throw ParameterError("audit needs at least one seed");
    if (cfg.conditions.empty()) throw ParameterError("audit needs conditions");
    bool has_raw = false;
    for (const auto& c : cfg.conditions) {
        if (c.name.empty()) throw ParameterError("condition with empty name");
        transforms::validate(c.spec);
        if (c.name == "raw") has_raw = true;
    }
    if (!has_raw) throw ParameterError("conditions must include 'raw'");
    net::validate_config(cfg.train);
}

namespace {

// Arch placeholders: num_classes 0 (and a trailing fc width 0) mean "take
// the class count from the dataset".
net::ArchSpec parse_arch(const json& j) {
    net::ArchSpec a;
    if (j.contains("input_size")) {
        a.input_h = j["input_size"].at(0).get<int>();
        a.input_w = j["input_size"].at(1).get<int>();
    }
    a.input_channels = j.value("input_channels", 1);
    if (j.contains("blocks")) a.conv_filters = j["blocks"].get<std::vector<int>>();
    if (j.contains("fc_widths")) a.fc_widths = j["fc_widths"].get<std::vector<int>>();
    a.num_classes = j.value("num_classes", 0);
    if (a.num_classes != 0) net::validate_arch(a);
    return a;
}

net::ArchSpec resolve_arch(net::ArchSpec arch, int num_classes) {
    if (arch.num_classes == 0) arch.num_classes = num_classes;
    if (!arch.fc_widths.empty() && arch.fc_widths.back() == 0)
        arch.fc_widths.back() = arch.num_classes;
    net::validate_arch(arch);
    return arch;
}

}  // namespace

json config_to_json(const AuditConfig& cfg) {
    json conditions = json::array();
    for (const auto& c : cfg.conditions)
        conditions.push_back(
            {{"name", c.name}, {"transform", transforms::to_json(c.spec)}});
    return json{{"conditions", conditions},
                {"arch", net::arch_to_json(cfg.arch)},
                {"train", net::config_to_json(cfg.train)},
                {"alpha", cfg.alpha},
                {"ratio_threshold", cfg.ratio_threshold},
                {"seeds", cfg.seeds}};
}

AuditConfig config_from_json(const json& j) {
    AuditConfig cfg;
    if (j.contains("conditions")) {
        for (const auto& c : j["conditions"]) {
            Condition cond;
            cond.name = c.at("name").get<std::string>();
            cond.spec = transforms::spec_from_json(c.at("transform"));
            cfg.conditions.push_back(std::move(cond));
        }
    } else {
        cfg.conditions = default_conditions(j.value("scramble_seed", uint64_t{7}));
    }
    if (j.contains("arch")) cfg.arch = parse_arch(j["arch"]);
    else cfg.arch.num_classes = 0;
    if (j.contains("train")) cfg.train = net::config_from_json(j["train"]);
    cfg.alpha = j.value("alpha", cfg.alpha);
    cfg.ratio_threshold = j.value("ratio_threshold", cfg.ratio_threshold);
    if (j.contains("seeds")) cfg.seeds = j["seeds"].get<std::vector<uint64_t>>();
    return cfg;
}

const char* to_string(BiasVerdict v) {
    return v == BiasVerdict::BiasDetected ? "bias_detected" : "none_detected";
}

const char* to_string(ProfileVerdict v) {
    switch (v) {
        case ProfileVerdict::ContextualSignal: return "contextual_signal";
        case ProfileVerdict::BackgroundNoise: return "background_noise";
        case ProfileVerdict::Inconclusive: return "inconclusive";
    }
    return "?";
}

// --- profile rule -------------------------------------------------------------

namespace {

void flatten_chain(const TransformSpec& spec, std::vector<Kind>& out) {
    if (spec.kind == Kind::Compose) {
        for (const auto& s : spec.steps) flatten_chain(s, out);
    } else if (spec.kind != Kind::Identity) {
        out.push_back(spec.kind);
    }
}

struct ConditionStats {
    double mean = 0.0;
    double std_err = 0.0;
    int n = 0;
};

ConditionStats stats_of(const ConditionResult& r) {
    ConditionStats s;
    const size_t k = r.seeds.size();
    if (k == 0) return s;
    double sum = 0.0;
    for (const auto& seed : r.seeds) sum += seed.accuracy;
    s.mean = sum / static_cast<double>(k);
    if (k > 1) {
        double var = 0.0;
        for (const auto& seed : r.seeds) {
            const double d = seed.accuracy - s.mean;
            var += d * d;
        }
        var /= static_cast<double>(k - 1);
        s.std_err = std::sqrt(var / static_cast<double>(k));
    }
    s.n = r.seeds.front().n;
    return s;
}

}  // namespace

ProfileVerdict profile_rule(const std::vector<ConditionResult>& results) {
    const ConditionResult* raw = nullptr;
    const ConditionResult* wavelet = nullptr;
    int wavelet_rank = 99;
    const ConditionResult* median = nullptr;

    for (const auto& r : results) {
        if (r.failed || r.seeds.empty()) continue;
        std::vector<Kind> chain;
        flatten_chain(r.spec, chain);
        if (chain.empty()) {
            if (!raw) raw = &r;
            continue;
        }
        const bool has_crop =
            std::find(chain.begin(), chain.end(), Kind::CropBackground) != chain.end();
        const bool has_scramble =
            std::find(chain.begin(), chain.end(), Kind::TileScramble) != chain.end();
        const bool has_dft =
            std::find(chain.begin(), chain.end(), Kind::DftMagnitude) != chain.end();
        const bool has_dwt =
            std::find(chain.begin(), chain.end(), Kind::DwtCompose) != chain.end();
        if (has_crop || has_scramble || has_dft) continue;  // not a full-image probe

        if (has_dwt) {
            // Prefer the plain wavelet condition over median+wavelet.
            const int rank = chain.size() == 1
                                 ? (r.spec.family == dwt::Family::Haar ? 0 : 1)
                                 : 2;
            if (rank < wavelet_rank) {
                wavelet = &r;
                wavelet_rank = rank;
            }
        } else if (chain.size() == 1 && chain[0] == Kind::MedianFilter) {
            if (!median) median = &r;
        }
    }

    if (!raw)
        throw ParameterError("profile_rule requires a 'raw' condition result");
    if (!wavelet && !median)
        throw ParameterError(
            "profile_rule requires a full-image wavelet or median condition");

    const ConditionStats raw_stats = stats_of(*raw);
    // Accuracy deltas below half a test image are quantization, not signal.
    const auto epsilon = [&](const ConditionStats& a) {
        const double floor = a.n > 0 ? 0.5 / a.n : 0.0;
        return std::max(std::sqrt(a.std_err * a.std_err +
                                  raw_stats.std_err * raw_stats.std_err),
                        floor);
    };

    const ConditionStats discr_stats = stats_of(wavelet ? *wavelet : *median);
    const double delta_w = discr_stats.mean - raw_stats.mean;
    if (delta_w >= -epsilon(discr_stats)) return ProfileVerdict::BackgroundNoise;

    if (wavelet && median) {
        const ConditionStats med_stats = stats_of(*median);
        const double delta_m = med_stats.mean - raw_stats.mean;
        if (delta_m < -epsilon(med_stats)) return ProfileVerdict::ContextualSignal;
    }
    return ProfileVerdict::Inconclusive;
}

// --- audit loop ----------------------------------------------------------------

AuditReport run_audit(const dataset::LabeledDataset& ds, const AuditConfig& cfg,
                      int jobs) {
    validate(cfg);
    const int num_classes = ds.num_classes();
    if (num_classes < 2) throw DatasetError("audit needs at least 2 classes");

    AuditConfig resolved = cfg;
    resolved.arch = resolve_arch(cfg.arch, num_classes);
    const double chance = stats::chance_accuracy(num_classes);

    // Grayscale once; every condition transforms from this common base.
    std::vector<image::ImageTensor> gray(ds.items.size());
    parallel_for(ds.items.size(), jobs, [&](size_t i) {
        gray[i] = image::to_grayscale(dataset::load_item(ds, ds.items[i]));
    });
    for (const auto split :
         {dataset::Split::Train, dataset::Split::Val, dataset::Split::Test}) {
        if (ds.split_indices(split).empty())
            throw DatasetError(std::string("dataset has an empty ") +
                               dataset::split_name(split) + " split");
    }

    AuditReport report;
    report.dataset_id = ds.root.filename().string();
    report.config = resolved;
    report.version = kVersion;
    report.conditions.resize(resolved.conditions.size());

    parallel_for(resolved.conditions.size(), jobs, [&](size_t ci) {
        const auto& cond = resolved.conditions[ci];
        ConditionResult result;
        result.name = cond.name;
        result.spec = cond.spec;
        result.chance = chance;
        try {
            net::ExampleSet sets[3];
            for (auto& s : sets) {
                s.height = resolved.arch.input_h;
                s.width = resolved.arch.input_w;
            }
            for (size_t i = 0; i < ds.items.size(); ++i) {
                const auto& item = ds.items[i];
                auto img = transforms::apply(cond.spec, gray[i],
                                             dataset::path_salt(item));
                img = image::resize(img, resolved.arch.input_h, resolved.arch.input_w);
                auto& set = sets[static_cast<int>(item.split)];
                set.images.push_back(std::move(img.data));
                set.labels.push_back(item.class_id);
            }
            const auto& train_set = sets[static_cast<int>(dataset::Split::Train)];
            const auto& val_set = sets[static_cast<int>(dataset::Split::Val)];
            const auto& test_set = sets[static_cast<int>(dataset::Split::Test)];

            for (const uint64_t seed : resolved.seeds) {
                net::TrainConfig train_cfg = resolved.train;
                train_cfg.seed = seed;
                const auto model =
                    net::train(train_set, val_set, resolved.arch, train_cfg);
                const auto metrics = net::evaluate(model, test_set);

                SeedResult sr;
                sr.seed = seed;
                sr.n = metrics.n;
                int correct = 0;
                for (int c = 0; c < num_classes; ++c)
                    correct += metrics.confusion[static_cast<size_t>(c) * num_classes + c];
                sr.correct = correct;
                sr.accuracy = metrics.accuracy;
                sr.p_value = stats::binomial_p_value(correct, metrics.n, chance);
                sr.flagged = sr.p_value < resolved.alpha &&
                             sr.accuracy / chance >= resolved.ratio_threshold;
                result.seeds.push_back(sr);
            }
            double sum = 0.0;
            int flagged_seeds = 0;
            for (const auto& sr : result.seeds) {
                sum += sr.accuracy;
                flagged_seeds += sr.flagged ? 1 : 0;
            }
            result.mean_accuracy = sum / static_cast<double>(result.seeds.size());
            result.ratio = result.mean_accuracy / chance;
            result.flagged = 2 * flagged_seeds > static_cast<int>(result.seeds.size());
        } catch (const std::exception& e) {
            result.failed = true;
            result.error = e.what();
            result.seeds.clear();
        }
        report.conditions[ci] = std::move(result);
    });

    bool any_ok = false;
    for (const auto& r : report.conditions) any_ok |= !r.failed;
    if (!any_ok) throw Error("audit failed: every condition failed to train");

    report.bias_verdict = BiasVerdict::NoneDetected;
    for (const auto& r : report.conditions) {
        if (!r.failed && r.flagged && transforms::is_information_free(r.spec))
            report.bias_verdict = BiasVerdict::BiasDetected;
    }
    try {
        report.profile_verdict = profile_rule(report.conditions);
    } catch (const ParameterError&) {
        report.profile_verdict = ProfileVerdict::Inconclusive;
    }
    return report;
}

// --- serialization ---------------------------------------------------------------

json report_to_json(const AuditReport& report) {
    json conditions = json::array();
    for (const auto& r : report.conditions) {
        json c{{"name", r.name}, {"transform", transforms::to_json(r.spec)}};
        if (r.failed) {
            c["failed"] = true;
            c["error"] = r.error;
        } else {
            json seeds = json::array();
            for (const auto& s : r.seeds)
                seeds.push_back({{"seed", s.seed},
                                 {"accuracy", s.accuracy},
                                 {"correct", s.correct},
                                 {"n", s.n},
                                 {"p_value", s.p_value},
                                 {"flagged", s.flagged}});
            c["seeds"] = seeds;
            c["mean_accuracy"] = r.mean_accuracy;
            c["chance"] = r.chance;
            c["ratio"] = r.ratio;
            c["flagged"] = r.flagged;
        }
        conditions.push_back(std::move(c));
    }
    return json{{"dataset", report.dataset_id},
                {"config", config_to_json(report.config)},
                {"conditions", conditions},
                {"bias_verdict", to_string(report.bias_verdict)},
                {"profile_verdict", to_string(report.profile_verdict)},
                {"version", report.version}};
}

AuditReport report_from_json(const json& j) {
    AuditReport report;
    report.dataset_id = j.at("dataset").get<std::string>();
    report.config = config_from_json(j.at("config"));
    report.version = j.value("version", "");
    for (const auto& c : j.at("conditions")) {
        ConditionResult r;
        r.name = c.at("name").get<std::string>();
        r.spec = transforms::spec_from_json(c.at("transform"));
        if (c.value("failed", false)) {
            r.failed = true;
            r.error = c.value("error", "");
        } else {
            for (const auto& s : c.at("seeds")) {
                SeedResult sr;
                sr.seed = s.at("seed").get<uint64_t>();
                sr.accuracy = s.at("accuracy").get<double>();
                sr.correct = s.value("correct", 0);
                sr.n = s.at("n").get<int>();
                sr.p_value = s.at("p_value").get<double>();
                sr.flagged = s.value("flagged", false);
                r.seeds.push_back(sr);
            }
            r.mean_accuracy = c.at("mean_accuracy").get<double>();
            r.chance = c.at("chance").get<double>();
            r.ratio = c.at("ratio").get<double>();
            r.flagged = c.at("flagged").get<bool>();
        }
        report.conditions.push_back(std::move(r));
    }
    const std::string bias = j.at("bias_verdict").get<std::string>();
    report.bias_verdict = bias == "bias_detected" ? BiasVerdict::BiasDetected
                                                  : BiasVerdict::NoneDetected;
    const std::string profile = j.at("profile_verdict").get<std::string>();
    report.profile_verdict = profile == "contextual_signal"
                                 ? ProfileVerdict::ContextualSignal
                                 : (profile == "background_noise"
                                        ? ProfileVerdict::BackgroundNoise
                                        : ProfileVerdict::Inconclusive);
    return report;
}

std::string report_to_csv(const AuditReport& report) {
    std::ostringstream out;
    out << "condition,seed,accuracy,correct,n,chance,ratio,p_value,flagged\n";
    char line[256];
    for (const auto& r : report.conditions) {
        if (r.failed) continue;
        for (const auto& s : r.seeds) {
            std::snprintf(line, sizeof(line), "%s,%llu,%.6f,%d,%d,%.6f,%.6f,%.8g,%d\n",
                          r.name.c_str(), static_cast<unsigned long long>(s.seed),
                          s.accuracy, s.correct, s.n, r.chance,
                          s.accuracy / r.chance, s.p_value, s.flagged ? 1 : 0);
            out << line;
        }
    }
    return out.str();
}

void write_report(const AuditReport& report, const fs::path& out_dir) {
    fs::create_directories(out_dir);
    const auto write_atomic = [&](const fs::path& name, const std::string& body) {
        const fs::path tmp = out_dir / (name.string() + ".tmp");
        {
            std::ofstream f(tmp, std::ios::binary);
            if (!f) throw IoError("cannot write " + tmp.string());
            f << body;
        }
        fs::rename(tmp, out_dir / name);
    };
    write_atomic("audit_report.json", report_to_json(report).dump(2) + "\n");
    write_atomic("audit_report.csv", report_to_csv(report));
}

}  // namespace biaslens::audit
