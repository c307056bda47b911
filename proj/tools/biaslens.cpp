// biaslens command-line front end: generate synthetic datasets, batch-apply
// transforms, train the small classifier, and run full bias audits.

#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "biaslens/audit.hpp"
#include "biaslens/dataset.hpp"
#include "biaslens/error.hpp"
#include "biaslens/net.hpp"
#include "biaslens/svg_report.hpp"
#include "biaslens/synth.hpp"
#include "biaslens/version.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace biaslens;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitRuntime = 2;

json load_json_file(const fs::path& path) {
    std::ifstream f(path);
    if (!f) throw IoError("cannot read " + path.string());
    try {
        return json::parse(f);
    } catch (const json::parse_error& e) {
        throw ParameterError("malformed JSON in " + path.string() + " at byte " +
                             std::to_string(e.byte) + ": " + e.what());
    }
}

void ensure_out_dir(const fs::path& out, bool overwrite) {
    if (fs::exists(out) && !fs::is_directory(out))
        throw ParameterError("--out exists and is not a directory: " + out.string());
    if (fs::is_directory(out) && !fs::is_empty(out) && !overwrite)
        throw ParameterError("--out directory " + out.string() +
                             " is not empty (pass --overwrite to replace)");
    fs::create_directories(out);
}

void print_config(const std::string& label, const json& j) {
    std::cout << "resolved " << label << ": " << j.dump() << "\n";
}

int cmd_gen(const fs::path& spec_path, const fs::path& bias_path, const fs::path& out,
            bool overwrite) {
    synth::SynthSpec spec;
    synth::BiasSpec bias;
    try {
        spec = synth::synth_from_json(load_json_file(spec_path));
        bias = bias_path.empty() ? synth::BiasSpec{}
                                 : synth::bias_from_json(load_json_file(bias_path));
        ensure_out_dir(out, overwrite);
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    }
    print_config("synth spec", synth::synth_to_json(spec));
    print_config("bias spec", synth::bias_to_json(bias));

    try {
        synth::GenerateStats stats;
        const auto ds = synth::generate(spec, bias, out, &stats);
        std::cout << synth::format_summary(synth::describe(ds));
        if (stats.clamped_pixels > 0)
            std::cout << "warning: bias clamped " << stats.clamped_pixels << " of "
                      << stats.total_pixels << " pixels\n";
        std::cout << "wrote " << ds.items.size() << " images under " << out.string()
                  << "\n";
        return kExitOk;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitRuntime;
    }
}

int cmd_transform(const fs::path& in, const fs::path& out, const fs::path& spec_path,
                  int jobs, bool overwrite) {
    transforms::TransformSpec spec;
    try {
        spec = transforms::spec_from_json(load_json_file(spec_path));
        ensure_out_dir(out, overwrite);
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    }
    print_config("transform", transforms::to_json(spec));

    try {
        const auto ds = dataset::scan_dataset(in);
        const auto result = dataset::apply_to_dataset(ds, spec, out, jobs);
        std::vector<int> counts(result.num_classes(), 0);
        for (const auto& item : result.items) ++counts[item.class_id];
        for (int c = 0; c < result.num_classes(); ++c)
            std::cout << result.class_names[c] << ": " << counts[c] << "\n";
        std::cout << "wrote " << result.items.size() << " images under " << out.string()
                  << "\n";
        return kExitOk;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitRuntime;
    }
}

int cmd_train(const fs::path& data, const fs::path& arch_path,
              const fs::path& config_path, const fs::path& out, bool overwrite) {
    net::TrainConfig cfg;
    json arch_json;
    try {
        if (!config_path.empty()) cfg = net::config_from_json(load_json_file(config_path));
        if (!arch_path.empty()) arch_json = load_json_file(arch_path);
        ensure_out_dir(out, overwrite);
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    }

    try {
        const auto ds = dataset::scan_dataset(data);
        net::ArchSpec arch;
        if (arch_json.is_null()) {
            arch = net::default_arch(ds.num_classes());
        } else {
            if (!arch_json.contains("num_classes"))
                arch_json["num_classes"] = ds.num_classes();
            if (arch_json.contains("fc_widths") &&
                arch_json["fc_widths"].back().get<int>() == 0)
                arch_json["fc_widths"].back() = ds.num_classes();
            arch = net::arch_from_json(arch_json);
        }
        print_config("arch", net::arch_to_json(arch));
        print_config("train config", net::config_to_json(cfg));

        net::ExampleSet sets[3];
        for (auto& s : sets) {
            s.height = arch.input_h;
            s.width = arch.input_w;
        }
        for (const auto& item : ds.items) {
            auto img = image::to_grayscale(dataset::load_item(ds, item));
            img = image::resize(img, arch.input_h, arch.input_w);
            auto& set = sets[static_cast<int>(item.split)];
            set.images.push_back(std::move(img.data));
            set.labels.push_back(item.class_id);
        }
        const auto model = net::train(sets[0], sets[1], arch, cfg);
        net::save_model(model, out / "model.blns");
        net::save_history_csv(model, out / "history.csv");

        const auto test_metrics = net::evaluate(model, sets[2]);
        std::cout << "final train_acc " << model.history.back().train_acc
                  << ", val_acc " << model.history.back().val_acc << ", test_acc "
                  << test_metrics.accuracy << " (n=" << test_metrics.n << ")\n";
        std::cout << "wrote " << (out / "model.blns").string() << "\n";
        return kExitOk;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitRuntime;
    }
}

int cmd_audit(const fs::path& data, const fs::path& config_path, const fs::path& out,
              int jobs, bool overwrite) {
    audit::AuditConfig cfg;
    try {
        cfg = config_path.empty() ? audit::AuditConfig{.conditions =
                                                           audit::default_conditions(7)}
                                  : audit::config_from_json(load_json_file(config_path));
        ensure_out_dir(out, overwrite);
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    }
    print_config("audit config", audit::config_to_json(cfg));

    try {
        const auto ds = dataset::scan_dataset(data);
        const auto report = audit::run_audit(ds, cfg, jobs);
        audit::write_report(report, out);
        report::render_chart(report, out / "audit_report.svg");

        for (const auto& c : report.conditions) {
            if (c.failed) {
                std::cout << c.name << ": FAILED (" << c.error << ")\n";
            } else {
                std::cout << c.name << ": mean_acc " << c.mean_accuracy << ", ratio "
                          << c.ratio << (c.flagged ? " [flagged]" : "") << "\n";
            }
        }
        std::cout << "bias_verdict: " << audit::to_string(report.bias_verdict) << "\n";
        std::cout << "profile_verdict: " << audit::to_string(report.profile_verdict)
                  << "\n";
        std::cout << "wrote " << (out / "audit_report.json").string() << "\n";
        return kExitOk;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitRuntime;
    }
}

int cmd_report(const fs::path& report_path, const fs::path& out, bool overwrite) {
    audit::AuditReport report;
    try {
        report = audit::report_from_json(load_json_file(report_path));
        ensure_out_dir(out, overwrite);
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    }
    print_config("report", {{"dataset", report.dataset_id},
                            {"conditions", report.conditions.size()}});
    try {
        audit::write_report(report, out);
        report::render_chart(report, out / "audit_report.svg");
        std::cout << "wrote " << (out / "audit_report.svg").string() << "\n";
        return kExitOk;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitRuntime;
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"biaslens: dataset bias audits via background crops, tile "
                 "scrambling and image transforms"};
    app.set_version_flag("--version", kVersion);
    app.require_subcommand(1);

    std::string spec_path, bias_path, in_dir, out_dir, transform_path, data_dir;
    std::string arch_path, config_path, report_path;
    int jobs = 0;
    bool overwrite = false;

    auto* gen = app.add_subcommand("gen", "generate a synthetic labeled dataset");
    gen->add_option("--spec", spec_path, "synth spec JSON")->required();
    gen->add_option("--bias", bias_path, "bias spec JSON (default: none)");
    gen->add_option("--out", out_dir, "output dataset directory")->required();
    gen->add_flag("--overwrite", overwrite, "replace existing output");

    auto* tr = app.add_subcommand("transform", "apply a transform to a dataset tree");
    tr->add_option("--in", in_dir, "input dataset directory")->required();
    tr->add_option("--out", out_dir, "output dataset directory")->required();
    tr->add_option("--transform", transform_path, "transform spec JSON")->required();
    tr->add_option("--jobs", jobs, "worker threads (default: cores)");
    tr->add_flag("--overwrite", overwrite, "replace existing output");

    auto* train = app.add_subcommand("train", "train the small CNN on a dataset");
    train->add_option("--data", data_dir, "dataset directory")->required();
    train->add_option("--arch", arch_path, "architecture JSON (default: MiniVGG-3)");
    train->add_option("--config", config_path, "train config JSON (default: RMSprop)");
    train->add_option("--out", out_dir, "output directory")->required();
    train->add_flag("--overwrite", overwrite, "replace existing output");

    auto* aud = app.add_subcommand("audit", "run the full bias audit");
    aud->add_option("--data", data_dir, "dataset directory")->required();
    aud->add_option("--config", config_path, "audit config JSON (default battery)");
    aud->add_option("--out", out_dir, "output directory")->required();
    aud->add_option("--jobs", jobs, "worker threads (default: cores)");
    aud->add_flag("--overwrite", overwrite, "replace existing output");

    auto* rep = app.add_subcommand("report", "re-render CSV/SVG from a report JSON");
    rep->add_option("--report", report_path, "audit_report.json path")->required();
    rep->add_option("--out", out_dir, "output directory")->required();
    rep->add_flag("--overwrite", overwrite, "replace existing output");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);  // exits 0
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitUsage;
    }

    try {
        if (gen->parsed()) return cmd_gen(spec_path, bias_path, out_dir, overwrite);
        if (tr->parsed())
            return cmd_transform(in_dir, out_dir, transform_path, jobs, overwrite);
        if (train->parsed())
            return cmd_train(data_dir, arch_path, config_path, out_dir, overwrite);
        if (aud->parsed()) return cmd_audit(data_dir, config_path, out_dir, jobs, overwrite);
        if (rep->parsed()) return cmd_report(report_path, out_dir, overwrite);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitRuntime;
    }
    return kExitUsage;
}
