#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "biaslens/image.hpp"
#include "biaslens/transforms.hpp"

namespace biaslens::net {

// Architecture descriptor for the small VGG-style classifier: per block one
// 3x3/stride-1/pad-1 convolution + ReLU + 2x2/stride-2 max-pool, then fully
// connected layers (ReLU between, raw logits at the end). fc_widths includes
// the final layer, whose width must equal num_classes.
struct ArchSpec {
    int input_h = 64;
    int input_w = 64;
    int input_channels = 1;
    std::vector<int> conv_filters = {16, 32, 64};
    std::vector<int> fc_widths = {128, 0};
    int num_classes = 0;
};

void validate_arch(const ArchSpec& arch);
nlohmann::json arch_to_json(const ArchSpec& arch);
ArchSpec arch_from_json(const nlohmann::json& j);

// Desk-scale default: MiniVGG-3 (16/32/64 + FC 128) at 64x64 gray input.
ArchSpec default_arch(int num_classes);

struct TrainConfig {
    double learning_rate = 1e-4;
    double rho = 0.9;       // RMSprop decay
    double epsilon = 1e-8;  // RMSprop denominator floor
    int epochs = 10;
    int batch_size = 32;
    uint64_t seed = 1;
    bool shuffle = true;
};

void validate_config(const TrainConfig& cfg);
nlohmann::json config_to_json(const TrainConfig& cfg);
TrainConfig config_from_json(const nlohmann::json& j);

// All learnable tensors in declaration order: per block conv W then bias,
// then per FC layer W then bias. Double in memory; float32 on disk.
struct Params {
    std::vector<std::vector<double>> tensors;
};

struct EpochStats {
    double train_loss = 0.0;
    double train_acc = 0.0;
    double val_acc = 0.0;
};

struct TrainedModel {
    ArchSpec arch;
    Params params;
    std::vector<EpochStats> history;
};

struct Metrics {
    double accuracy = 0.0;
    std::vector<int> confusion;  // num_classes x num_classes, rows = true class
    int n = 0;
};

// In-memory grayscale examples at a fixed size.
struct ExampleSet {
    int height = 0;
    int width = 0;
    std::vector<std::vector<double>> images;
    std::vector<int> labels;
    size_t size() const { return images.size(); }
};

// He-style init: weights ~ N(0, 2/fan_in) from a seeded SplitMix64 stream,
// biases zero. The final linear head starts at zero so a fresh model emits
// uniform logits. Bit-identical for identical (arch, seed).
Params init_params(const ArchSpec& arch, uint64_t seed);

std::vector<double> forward_logits(const ArchSpec& arch, const Params& params,
                                   std::span<const double> img);

std::vector<double> softmax(std::span<const double> logits);

// Mean softmax cross-entropy over the batch plus exact analytic gradients.
// `grads` is resized/zeroed inside. Optional per-item argmax predictions.
double loss_and_grads(const ArchSpec& arch, const Params& params,
                      const ExampleSet& data, std::span<const size_t> batch,
                      Params& grads, std::vector<int>* predictions = nullptr);

struct RmspropState {
    std::vector<std::vector<double>> sq_avg;
};

// s <- rho*s + (1-rho)*g^2;  theta <- theta - lr*g/(sqrt(s) + eps).
void rmsprop_step(Params& params, const Params& grads, RmspropState& state,
                  const TrainConfig& cfg);

// Full training loop: seeded shuffling, mini-batches, RMSprop, per-epoch
// history. Deterministic for identical (data, arch, cfg).
TrainedModel train(const ExampleSet& train_set, const ExampleSet& val_set,
                   const ArchSpec& arch, const TrainConfig& cfg);

// Argmax prediction with ties broken toward the lower class id.
Metrics evaluate(const TrainedModel& model, const ExampleSet& data);

std::vector<double> predict_probs(const TrainedModel& model,
                                  const image::ImageTensor& img);

// Transforms the image by specs[i], classifies with models[i], averages the
// softmax vectors, returns the argmax (ties toward the lower class id).
int ensemble_predict(const std::vector<const TrainedModel*>& models,
                     const std::vector<transforms::TransformSpec>& specs,
                     const image::ImageTensor& img);

// Checkpoint: magic "BLNS", version, arch JSON, then raw little-endian
// float32 parameter arrays in declaration order.
void save_model(const TrainedModel& model, const std::filesystem::path& path);
TrainedModel load_model(const std::filesystem::path& path);

// CSV history: epoch,train_loss,train_acc,val_acc.
void save_history_csv(const TrainedModel& model, const std::filesystem::path& path);

}  // namespace biaslens::net
