#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "biaslens/dataset.hpp"
#include "biaslens/net.hpp"
#include "biaslens/transforms.hpp"

namespace biaslens::audit {

struct Condition {
    std::string name;
    transforms::TransformSpec spec;
};

// The paper-style condition battery: raw, the background-crop probe, three
// scramble granularities, every transform, and the cropped variant of every
// transform. `seed` feeds the scramble conditions.
std::vector<Condition> default_conditions(uint64_t seed);

struct AuditConfig {
    std::vector<Condition> conditions;  // must include "raw"
    net::ArchSpec arch;                 // num_classes 0 = take from dataset
    net::TrainConfig train;
    double alpha = 0.01;           // binomial significance gate
    double ratio_threshold = 2.0;  // accuracy / chance gate
    std::vector<uint64_t> seeds = {1, 2, 3};
};

void validate(const AuditConfig& cfg);
nlohmann::json config_to_json(const AuditConfig& cfg);
AuditConfig config_from_json(const nlohmann::json& j);

struct SeedResult {
    uint64_t seed = 0;
    double accuracy = 0.0;
    int correct = 0;
    int n = 0;
    double p_value = 1.0;
    bool flagged = false;  // p < alpha AND accuracy/chance >= ratio_threshold
};

struct ConditionResult {
    std::string name;
    transforms::TransformSpec spec;
    std::vector<SeedResult> seeds;
    double mean_accuracy = 0.0;
    double chance = 0.0;
    double ratio = 0.0;
    bool flagged = false;  // majority of seeds flagged
    bool failed = false;
    std::string error;
};

enum class BiasVerdict { NoneDetected, BiasDetected };
enum class ProfileVerdict { ContextualSignal, BackgroundNoise, Inconclusive };

const char* to_string(BiasVerdict v);
const char* to_string(ProfileVerdict v);

struct AuditReport {
    std::string dataset_id;
    AuditConfig config;
    std::vector<ConditionResult> conditions;
    BiasVerdict bias_verdict = BiasVerdict::NoneDetected;
    ProfileVerdict profile_verdict = ProfileVerdict::Inconclusive;
    std::string version;
};

// Context-vs-noise discrimination: compares the full-image wavelet (and
// median) conditions against raw. Accuracy preserved or boosted under the
// wavelet => hidden background signal; both transforms degrading => genuine
// visual features. Throws ParameterError when raw or every transform
// condition is missing.
ProfileVerdict profile_rule(const std::vector<ConditionResult>& results);

// Full methodology over one dataset: per condition x seed, train from
// scratch on the transformed train split, evaluate on the transformed test
// split, gate against chance. A failed condition is recorded and skipped;
// if every condition fails the audit itself fails.
AuditReport run_audit(const dataset::LabeledDataset& ds, const AuditConfig& cfg,
                      int jobs = 0);

nlohmann::json report_to_json(const AuditReport& report);
AuditReport report_from_json(const nlohmann::json& j);
std::string report_to_csv(const AuditReport& report);

// Writes audit_report.json and audit_report.csv atomically under out_dir.
void write_report(const AuditReport& report, const std::filesystem::path& out_dir);

}  // namespace biaslens::audit
